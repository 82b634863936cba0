"""Calibrated noise thermometry: detection gain, bath occupancies and heating rates."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.constants import hbar
from scipy.optimize import nnls

from .core import (BathOccupancies, DriveCondition, LocalizedTransducer, ModelError,
                   WaveguideModeSet, optical_row)

#: Condition number of the noise basis above which the solve is flagged.
COND_WARN = 1e8


class IllConditionedWarning(UserWarning):
    pass


class NegativeOccupancyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CalibrationChain:
    """Detection chain from the device to the spectrum analyzer.

    Efficiencies are the fiber-to-chip coupling ``eta_c``, fiber losses
    ``eta_f`` and splitters ``eta_s``.  ``R`` is the detector responsivity in
    V/W, ``Z_o`` the analyzer impedance and ``omega_p`` the probe frequency.
    """

    eta_s: float
    eta_f: float
    eta_c: float
    G_EDFA: float
    A: float
    R: float
    Z_o: float = 50.0
    omega_p: float = 2 * np.pi * 192.2e12

    def __post_init__(self):
        for name in ("eta_s", "eta_f", "eta_c"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ModelError(f"{name} must lie in (0, 1], got {v}")
        for name in ("G_EDFA", "A", "R", "Z_o", "omega_p"):
            if getattr(self, name) <= 0:
                raise ModelError(f"{name} must be positive")

    @property
    def detection_efficiency(self) -> float:
        """``eta_c eta_f eta_s^3``, the optical path of the sideband signal."""
        return self.eta_c * self.eta_f * self.eta_s**3


def gain_from_two_tone(P_RF, P_probe):
    """System gain ``G_R = P_RF / P_probe`` from a two-tone beat-note calibration."""
    P_RF, P_probe = np.asarray(P_RF, dtype=float), np.asarray(P_probe, dtype=float)
    if np.any(P_RF <= 0) or np.any(P_probe <= 0):
        raise ModelError("powers must be positive")
    out = P_RF / P_probe
    return out if out.ndim else float(out)


def predicted_gain(chain: CalibrationChain, alpha_L) -> float:
    """Closed-form gain ``(2 hbar w_p / Z_o) [pi R eta_s eta_f eta_c G_EDFA A |alpha_L|]^2``.

    ``alpha_L`` is the local-oscillator amplitude (square root of photon flux).
    """
    amp = (np.pi * chain.R * chain.eta_s * chain.eta_f * chain.eta_c * chain.G_EDFA * chain.A
           * np.abs(alpha_L))
    return 2.0 * hbar * chain.omega_p / chain.Z_o * amp**2


def normalized_gain(G_R, G_EDFA, A):
    """``G_R / (G_EDFA A)^2``; removes the user-set amplification and attenuation."""
    return np.asarray(G_R) / (np.asarray(G_EDFA) * np.asarray(A)) ** 2


def fit_gain_curve(reflected_power, gain_norm, degree: int = 3) -> np.polynomial.Polynomial:
    """Polynomial (default cubic) fit of normalized gain versus reflected power."""
    x = np.asarray(reflected_power, dtype=float)
    y = np.asarray(gain_norm, dtype=float)
    if x.size <= degree:
        raise ModelError(f"need more than {degree} calibration points for a degree-{degree} fit")
    return np.polynomial.Polynomial.fit(x, y, degree)


def sideband_flux(n_phon, kappa, kappa_e, gamma_om):
    """Output photon flux ``(kappa_e / kappa) gamma_om n`` for ``Delta = omega_m``."""
    return kappa_e / kappa * gamma_om * np.asarray(n_phon)


def rf_power_from_flux(flux, G_R, chain: CalibrationChain, omega_c):
    """Detected RF power ``hbar w_c |alpha|^2 G_R eta_c eta_f eta_s^3``."""
    return hbar * omega_c * np.asarray(flux) * G_R * chain.detection_efficiency


def phonon_occupancy_from_power(P_RF, G_R, chain: CalibrationChain, kappa, kappa_e, gamma_om,
                                omega_c):
    """Mechanical occupancy from integrated sideband RF power.

    Assumes a sideband-resolved drive at ``Delta = omega_m``, so the sideband
    flux is ``(kappa_e / kappa) gamma_om n``.
    """
    for name, v in (("G_R", G_R), ("kappa", kappa), ("kappa_e", kappa_e),
                    ("gamma_om", gamma_om), ("omega_c", omega_c)):
        if np.any(np.asarray(v) <= 0):
            raise ModelError(f"{name} must be positive")
    out = (np.asarray(P_RF, dtype=float) / G_R / (hbar * omega_c)
           * kappa / (kappa_e * gamma_om * chain.detection_efficiency))
    return out if out.ndim else float(out)


def normalize_psd(S_vv, G_R, chain: CalibrationChain, omega_c):
    """Convert a measured voltage PSD to output photon-flux units."""
    return np.asarray(S_vv, dtype=float) / (G_R * chain.detection_efficiency * hbar * omega_c)


def build_noise_basis(sys: LocalizedTransducer, wg: WaveguideModeSet, drive: DriveCondition,
                      omega) -> np.ndarray:
    """Columns ``|G_1j(w)|^2`` for the N+1 mechanical channels plus a column of ones."""
    g = optical_row(sys, wg, drive, np.asarray(omega, dtype=float))
    h = np.abs(g[:, 1:]) ** 2
    return np.hstack([h, np.ones((h.shape[0], 1))])


def basis_labels(n_wg: int) -> list:
    return ["localized"] + [f"wg{k}" for k in range(n_wg)] + ["floor"]


def _collinear_columns(h, labels, rel_tol):
    scale = np.linalg.norm(h, axis=0)
    scale[scale == 0] = 1.0
    _, s, vt = np.linalg.svd(h / scale, full_matrices=False)
    null = vt[-1]
    involved = np.flatnonzero(np.abs(null) > 0.1 * np.max(np.abs(null)))
    return [labels[i] for i in involved], s


def solve_bath_occupancies(H, S, labels: Optional[Sequence[str]] = None,
                           nonnegative: bool = False, rank_tol: float = 1e-12) -> BathOccupancies:
    """Least-squares bath occupancies ``N`` from ``H N = S``.

    Negative occupancies are kept and reported with a warning; pass
    ``nonnegative=True`` for a bound-constrained solve instead.  A rank
    deficient basis raises ``ModelError`` naming the collinear columns.
    """
    H = np.asarray(H, dtype=float)
    S = np.asarray(S, dtype=float)
    if H.ndim != 2 or S.shape != (H.shape[0],):
        raise ModelError("H must be (n_points, n_cols) and S (n_points,)")
    if H.shape[0] < H.shape[1]:
        raise ModelError("fewer grid points than unknown occupancies")
    if labels is None:
        labels = basis_labels(H.shape[1] - 2)
    s = np.linalg.svd(H, compute_uv=False)
    if s[-1] <= rank_tol * s[0]:
        cols, _ = _collinear_columns(H, labels, rank_tol)
        raise ModelError(f"noise basis is rank deficient; collinear columns: {', '.join(cols)}")
    cond = s[0] / s[-1]
    if cond > COND_WARN:
        warnings.warn(f"noise basis condition number {cond:.2e} exceeds {COND_WARN:.0e}",
                      IllConditionedWarning, stacklevel=2)
    if nonnegative:
        n, _ = nnls(H, S)
    else:
        n = np.linalg.lstsq(H, S, rcond=None)[0]
        neg = [labels[i] for i in np.flatnonzero(n[:-1] < 0)]
        if neg:
            warnings.warn(f"negative occupancy for {', '.join(neg)}", NegativeOccupancyWarning,
                          stacklevel=2)
    return BathOccupancies.from_vector(n)


def heating_rates(n_eff, gamma_i, n_i):
    """Noise input ``gamma n_eff`` and heating ``gamma (n_eff - n_i)`` per mode.

    Returns ``(gamma_noise, gamma_heating)``.
    """
    n_eff, gamma_i = np.asarray(n_eff, dtype=float), np.asarray(gamma_i, dtype=float)
    noise = gamma_i * n_eff
    return noise, noise - gamma_i * np.asarray(n_i, dtype=float)


def power_law_exponent(n_c, rate) -> float:
    """Slope of ``log(rate)`` against ``log(n_c)`` over the positive entries."""
    n_c, rate = np.asarray(n_c, dtype=float), np.asarray(rate, dtype=float)
    sel = (n_c > 0) & (rate > 0)
    if sel.sum() < 2:
        raise ModelError("need two positive points for a power-law fit")
    return float(np.polyfit(np.log(n_c[sel]), np.log(rate[sel]), 1)[0])
