"""Normal-mode analysis of the driven system and waveguide figures of merit."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import (DriveCondition, LocalizedTransducer, ModelError, WaveguideModeSet,
                   TWO_PI, build_dynamical_matrix)
from .disorder import l3db_from_sigma

#: Power halving, in dB.
DB_3 = 10.0 * np.log10(2.0)
NEPER_TO_DB = 10.0 * np.log10(np.e)

# Two candidates closer than this (in units of the matching scale) are ambiguous.
AMBIGUITY_TOL = 1e-3


class MatchingError(ModelError):
    """Eigenvalues could not be assigned to mode labels unambiguously."""

    def __init__(self, message, candidates):
        super().__init__(message)
        self.candidates = candidates


@dataclass(frozen=True)
class ModeRecord:
    """One mechanical normal mode.

    ``omega_total`` is ``Im(lambda)``, i.e. the frequency relative to
    ``omega_m`` in the rotating frame; ``gamma_total`` is ``2 Re(lambda)``.
    """

    label: str
    eigenvalue: complex
    omega_total: float
    gamma_total: float
    gamma_zero: float
    gamma_S: float
    cooperativity: float

    @property
    def negative_cooling(self) -> bool:
        """Level repulsion can push the eigenvalue-derived rate slightly below zero."""
        return self.gamma_S < 0


@dataclass(frozen=True)
class ModeReport:
    n_c: float
    optical: complex
    localized: ModeRecord
    waveguide: tuple = field(default_factory=tuple)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([self.optical, self.localized.eigenvalue]
                        + [m.eigenvalue for m in self.waveguide])

    def gamma_S(self) -> np.ndarray:
        return np.array([m.gamma_S for m in self.waveguide])

    def cooperativities(self) -> np.ndarray:
        return np.array([m.cooperativity for m in self.waveguide])

    @property
    def flagged(self) -> list:
        """Waveguide labels whose sympathetic cooling rate came out negative."""
        return [m.label for m in self.waveguide if m.negative_cooling]


def _split_optical(eigs, m):
    i_opt = int(np.argmin(np.abs(eigs - m[0, 0])))
    return eigs[i_opt], np.delete(eigs, i_opt)


def _matching_scale(targets):
    im = np.sort(np.imag(targets))
    gaps = np.diff(im)
    gaps = gaps[gaps > 0]
    if gaps.size:
        return float(np.min(gaps))
    return float(max(np.max(np.abs(np.real(targets))), 1.0))


def _assign(eigs, targets, force=None, complex_distance=False):
    """Assign ``eigs`` to ``targets`` (index 0 is the localized label).

    Nearest ``Im`` wins (nearest in the complex plane with
    ``complex_distance``, as used when following labels along the drive).  A tie between the localized label and a waveguide
    label is a hybridized pair: the smaller ``|Re|`` branch goes to the
    waveguide.  A tie between two waveguide labels raises ``MatchingError``
    unless ``force`` (a full assignment, label -> eigenvalue index) is given.
    """
    if force is not None:
        order = np.asarray(force, dtype=int)
        if sorted(order.tolist()) != list(range(len(eigs))):
            raise ModelError("forced assignment must be a permutation of the eigenvalues")
        return eigs[order]
    if complex_distance:
        sep = np.abs(targets[:, None] - targets[None, :])
        sep = sep[sep > 0]
        scale = float(np.min(sep)) if sep.size else 1.0
        cost = np.abs(eigs[:, None] - targets[None, :]) / scale
    else:
        scale = _matching_scale(targets)
        cost = np.abs(np.imag(eigs)[:, None] - np.imag(targets)[None, :]) / scale
    rows, cols = linear_sum_assignment(cost)
    assigned = np.empty(len(targets), dtype=int)
    assigned[cols] = rows
    total = cost[assigned, np.arange(len(targets))]
    for j in range(len(targets)):
        for l in range(j + 1, len(targets)):
            i, k = assigned[j], assigned[l]
            swapped = cost[k, j] + cost[i, l]
            if abs(swapped - (total[j] + total[l])) >= AMBIGUITY_TOL:
                continue
            if j == 0:
                if abs(eigs[i].real) < abs(eigs[k].real):
                    assigned[j], assigned[l] = k, i
                    total[j], total[l] = cost[k, j], cost[i, l]
            else:
                raise MatchingError(
                    f"ambiguous assignment between waveguide modes {j - 1} and {l - 1}",
                    (eigs[i], eigs[k]))
    return eigs[assigned]


def _mechanical_eigs(sys, wg, n_c, g0=None):
    drive = DriveCondition(float(n_c), sys.g0 if g0 is None else g0)
    m = build_dynamical_matrix(sys, wg, drive)
    eigs = np.linalg.eigvals(m)
    optical, mech = _split_optical(eigs, m)
    return m, optical, mech


def labelled_eigenvalues(sys: LocalizedTransducer, wg: WaveguideModeSet, n_c: float,
                         n_steps: int = 24, force=None):
    """Labelled mechanical eigenvalues at zero power and at ``n_c``.

    Labels are set at zero power against the bare diagonal and then followed
    by nearest-neighbour matching in the complex plane along a ladder of
    drive strengths evenly spaced in ``G``, so a narrow waveguide branch is
    not handed the broad localized branch when their frequencies cross.  ``force`` overrides the zero-power assignment.

    Returns ``(optical, zero, driven)`` where ``zero`` and ``driven`` are
    ordered ``[localized, c_1, ..., c_N]``.
    """
    m0, optical, mech0 = _mechanical_eigs(sys, wg, 0.0)
    zero = _assign(mech0, np.diag(m0)[1:], force=force)
    current = zero
    if n_c > 0:
        for frac in np.linspace(0.0, 1.0, max(int(n_steps), 1) + 1)[1:]:
            _, optical, mech = _mechanical_eigs(sys, wg, n_c * frac**2)
            current = _assign(mech, current, complex_distance=True)
    return optical, zero, current


def eigen_report(sys: LocalizedTransducer, wg: WaveguideModeSet, drive: DriveCondition,
                 n_steps: int = 24, force=None) -> ModeReport:
    """Per-mode frequencies, linewidths, sympathetic cooling and cooperativity."""
    if not np.isclose(drive.g0, sys.g0, rtol=1e-12, atol=0.0):
        raise ModelError("drive.g0 does not match the transducer g0")
    optical, zero, cur = labelled_eigenvalues(sys, wg, drive.n_c, n_steps=n_steps, force=force)
    gamma0 = 2.0 * zero.real
    gamma = 2.0 * cur.real
    gamma_s = gamma - gamma0 if drive.n_c > 0 else np.zeros_like(gamma)
    coop = gamma_s / gamma0
    labels = ["localized"] + [f"wg{k}" for k in range(len(wg))]
    records = [ModeRecord(label, complex(cur[i]), float(cur[i].imag), float(gamma[i]),
                          float(gamma0[i]), float(gamma_s[i]), float(coop[i]))
               for i, label in enumerate(labels)]
    return ModeReport(float(drive.n_c), complex(optical), records[0], tuple(records[1:]))


def weak_coupling_cooling(f_k, delta_k, gamma_om):
    """Sympathetic cooling rate in the weak-coupling limit.

    ``f_k^2 gamma_om / (delta_k^2 + gamma_om^2)``.  Valid for
    ``f_k << gamma_om << kappa`` and, because the transducer response is a
    Lorentzian of half-width ``gamma_om/2``, only for ``|delta_k| >> gamma_om``;
    on resonance the exact rate is four times larger (see
    ``adiabatic_cooling``).
    """
    f_k, delta_k, gamma_om = (np.asarray(x, dtype=float) for x in (f_k, delta_k, gamma_om))
    out = f_k**2 * gamma_om / (delta_k**2 + gamma_om**2)
    return out if out.ndim else float(out)


def adiabatic_cooling(f_k, delta_k, gamma_b, gamma_b0=0.0):
    """Extra damping of a waveguide mode from adiabatically eliminating ``b``.

    With ``b`` damped at ``gamma_b`` the mode acquires
    ``f^2 gamma_b / (delta^2 + gamma_b^2/4)``; subtracting the same expression
    at the zero-power width ``gamma_b0`` gives the optically induced part.
    """
    def lor(g):
        return f_k**2 * g / (delta_k**2 + g**2 / 4.0)
    return lor(gamma_b) - (lor(gamma_b0) if gamma_b0 else 0.0)


def cooperativity(sys: LocalizedTransducer, wg: WaveguideModeSet, n_c: float, k: int,
                  **kwargs) -> float:
    """``C_k = gamma_S(n_c) / gamma_k(0)`` for waveguide mode ``k`` (0-based)."""
    report = eigen_report(sys, wg, DriveCondition.for_transducer(sys, n_c), **kwargs)
    return report.waveguide[k].cooperativity


def cooperativity_sweep(sys, wg, n_c_values: Sequence[float], k: Optional[int] = None,
                        **kwargs) -> np.ndarray:
    """Cooperativity versus drive; shape ``(len(n_c_values), N)`` or ``(len,)`` for one mode."""
    rows = [eigen_report(sys, wg, DriveCondition.for_transducer(sys, n), **kwargs)
            .cooperativities() for n in n_c_values]
    out = np.array(rows)
    return out if k is None else out[:, k]


def coupling_from_fsr(fsr, gamma_e):
    """Transducer-to-standing-wave coupling ``f = sqrt(fsr * gamma_e / 2pi)``."""
    if np.any(np.asarray(fsr) <= 0) or np.any(np.asarray(gamma_e) <= 0):
        raise ModelError("fsr and gamma_e must be positive")
    return np.sqrt(fsr * gamma_e / TWO_PI)


def gamma_e_from_coupling(f, fsr):
    """Inverse of :func:`coupling_from_fsr`."""
    return TWO_PI * np.asarray(f) ** 2 / fsr


@dataclass(frozen=True)
class PropagationMetrics:
    """Transport figures of merit.  Lengths in m, rates in rad/s, loss in dB/cm."""

    v_g: float
    L: float
    fsr: float
    roundtrip: float
    alpha_m: float
    alpha_m_th: float
    L3dB_c: float
    L3dB_q: float
    L3dB_delta: Optional[float] = None

    def as_dict(self) -> dict:
        """Values keyed by name with a units string each; frequencies in Hz."""
        out = {
            "v_g": (self.v_g, "m/s"),
            "L": (self.L, "m"),
            "fsr": (self.fsr / TWO_PI, "Hz"),
            "roundtrip": (self.roundtrip, "s"),
            "alpha_m": (self.alpha_m, "dB/cm"),
            "alpha_m_th": (self.alpha_m_th, "dB/cm"),
            "L3dB_c": (self.L3dB_c, "m"),
            "L3dB_q": (self.L3dB_q, "m"),
        }
        if self.L3dB_delta is not None:
            out["L3dB_delta"] = (self.L3dB_delta, "m")
        return {k: {"value": v, "units": u} for k, (v, u) in out.items()}


def propagation_metrics(v_g: float, L: float, gamma_k_i: float, n_i: float = 0.0,
                        sigma_disorder: Optional[float] = None) -> PropagationMetrics:
    """Free spectral range, loss per length and 3 dB propagation distances.

    ``gamma_k_i`` and ``sigma_disorder`` are angular rates.  Loss is an energy
    decay ``gamma/v_g`` per metre; the thermal variant scales it by ``n_i + 1``.
    """
    if v_g <= 0 or L <= 0 or gamma_k_i <= 0 or n_i < 0:
        raise ModelError("v_g, L and gamma_k_i must be positive and n_i non-negative")
    alpha = gamma_k_i / v_g * NEPER_TO_DB          # dB/m
    alpha_th = (n_i + 1.0) * alpha
    l_delta = None if sigma_disorder is None else l3db_from_sigma(sigma_disorder, v_g)
    return PropagationMetrics(
        v_g=float(v_g), L=float(L),
        fsr=np.pi * v_g / L,
        roundtrip=2.0 * L / v_g,
        alpha_m=alpha / 100.0,
        alpha_m_th=alpha_th / 100.0,
        L3dB_c=DB_3 / alpha,
        L3dB_q=DB_3 / alpha_th,
        L3dB_delta=l_delta,
    )
