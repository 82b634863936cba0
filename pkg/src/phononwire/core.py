"""Linear coupled-mode model of an optomechanical transducer read-out of a
terminated phononic waveguide.

The system is an optical cavity ``a`` coupled (beam-splitter, rate ``G``) to a
localized mechanical mode ``b``, which is in turn coupled (rate ``f_k``) to a
set of standing-wave modes ``c_k`` of the waveguide.  All frequencies and rates
are angular (rad/s).  Public frequency arguments ``omega`` are pump-probe (RF)
detunings, so the cavity sits at ``delta``, the localized mode at ``omega_m``
and waveguide mode ``k`` at ``omega_k``.

Internally the dynamical matrix is written in the frame rotating at
``omega_m``: the optical diagonal carries ``delta - omega_m`` and waveguide
diagonals carry ``omega_k - omega_m``.  The linear response at detuning
``omega`` is obtained from the resolvent of ``M + 1j*nu`` with
``nu = omega_m - omega``.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.constants import hbar
from scipy.integrate import trapezoid

TWO_PI = 2.0 * np.pi

#: Default cap on the number of waveguide modes a dynamical matrix may hold.
MAX_MODES = 256

# Chunk size (frequency points) for batched dense solves.
_CHUNK = 2048


class ModelError(ValueError):
    """Raised for invalid model parameters or inconsistent model state."""


class GridTruncationWarning(UserWarning):
    """The frequency grid does not fully contain the spectrum being integrated."""


def hz(value):
    """Convert an ordinary frequency in Hz to an angular frequency in rad/s."""
    if np.ndim(value):
        return TWO_PI * np.asarray(value, dtype=float)
    return TWO_PI * float(value)


def to_hz(value):
    """Convert an angular frequency in rad/s to Hz."""
    if np.ndim(value):
        return np.asarray(value, dtype=float) / TWO_PI
    return float(value) / TWO_PI


# ---------------------------------------------------------------------------
# Parameter types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalizedTransducer:
    """Optical cavity plus localized mechanical mode.

    ``kappa`` is not stored; it is always ``kappa_i + kappa_e``.
    """

    kappa_i: float
    kappa_e: float
    g0: float
    gamma_i: float
    omega_m: float
    omega_c: float
    delta: float

    def __post_init__(self):
        for name in ("kappa_i", "kappa_e", "g0", "gamma_i", "omega_m", "omega_c"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ModelError(f"{name} must be strictly positive, got {value!r}")
        if not np.isfinite(self.delta):
            raise ModelError(f"delta must be finite, got {self.delta!r}")

    @classmethod
    def from_total(cls, kappa, kappa_e, g0, gamma_i, omega_m, omega_c, delta):
        """Build from the total optical linewidth instead of the intrinsic part."""
        if kappa_e >= kappa:
            raise ModelError("kappa_e must be smaller than kappa")
        return cls(kappa - kappa_e, kappa_e, g0, gamma_i, omega_m, omega_c, delta)

    @property
    def kappa(self) -> float:
        return self.kappa_i + self.kappa_e

    @property
    def sideband_resolved(self) -> bool:
        return self.omega_m > self.kappa

    def gamma_om(self, drive: "DriveCondition") -> float:
        """Sideband-resolved optomechanical damping ``4 G^2 / kappa``."""
        return 4.0 * drive.G**2 / self.kappa


@dataclass(frozen=True)
class WaveguideModeSet:
    """Extended standing-wave modes: frequency, coupling to ``b``, intrinsic loss."""

    omega_k: np.ndarray
    f_k: np.ndarray
    gamma_k_i: np.ndarray

    def __post_init__(self):
        arrays = [np.atleast_1d(np.asarray(a, dtype=float)).copy() for a in
                  (self.omega_k, self.f_k, self.gamma_k_i)]
        omega_k, f_k, gamma_k_i = arrays
        if not (omega_k.shape == f_k.shape == gamma_k_i.shape) or omega_k.ndim != 1:
            raise ModelError("omega_k, f_k and gamma_k_i must be 1-D arrays of equal length")
        if omega_k.size and np.any(np.diff(omega_k) <= 0):
            raise ModelError("waveguide modes must be sorted with strictly increasing omega_k")
        if np.any(~np.isfinite(f_k)) or np.any(f_k < 0):
            raise ModelError("f_k must be real and non-negative")
        if np.any(~np.isfinite(gamma_k_i)) or np.any(gamma_k_i <= 0):
            raise ModelError("gamma_k_i must be strictly positive")
        for a in arrays:
            a.setflags(write=False)
        object.__setattr__(self, "omega_k", omega_k)
        object.__setattr__(self, "f_k", f_k)
        object.__setattr__(self, "gamma_k_i", gamma_k_i)

    @classmethod
    def empty(cls) -> "WaveguideModeSet":
        return cls(np.empty(0), np.empty(0), np.empty(0))

    @classmethod
    def from_modes(cls, modes: Sequence[tuple]) -> "WaveguideModeSet":
        """Build from ``(omega_k, f_k, gamma_k_i)`` tuples in any order."""
        modes = sorted(modes, key=lambda m: m[0])
        if not modes:
            return cls.empty()
        omega_k, f_k, gamma_k_i = (np.array(col, dtype=float) for col in zip(*modes))
        return cls(omega_k, f_k, gamma_k_i)

    @classmethod
    def comb(cls, omega_m, n_modes, spacing, f, gamma, offset=0.0) -> "WaveguideModeSet":
        """Evenly spaced modes centred on ``omega_m + offset`` with uniform couplings."""
        idx = np.arange(n_modes) - (n_modes - 1) / 2.0
        omega_k = omega_m + offset + spacing * idx
        return cls(omega_k, np.full(n_modes, float(f)), np.full(n_modes, float(gamma)))

    def __len__(self):
        return int(self.omega_k.size)

    @property
    def modes(self) -> list:
        return list(zip(self.omega_k.tolist(), self.f_k.tolist(), self.gamma_k_i.tolist()))

    def detunings(self, omega_m) -> np.ndarray:
        """``delta_k = omega_k - omega_m``."""
        return self.omega_k - omega_m

    def spacings(self) -> np.ndarray:
        return np.diff(self.omega_k)

    def with_couplings(self, f_k) -> "WaveguideModeSet":
        return WaveguideModeSet(self.omega_k, f_k, self.gamma_k_i)


@dataclass(frozen=True)
class DriveCondition:
    """Intracavity photon number and the single-photon rate it enhances."""

    n_c: float
    g0: float

    def __post_init__(self):
        if not np.isfinite(self.n_c) or self.n_c < 0:
            raise ModelError(f"n_c must be >= 0, got {self.n_c!r}")
        if not np.isfinite(self.g0) or self.g0 < 0:
            raise ModelError(f"g0 must be >= 0, got {self.g0!r}")

    @classmethod
    def for_transducer(cls, sys: LocalizedTransducer, n_c: float) -> "DriveCondition":
        return cls(float(n_c), sys.g0)

    @property
    def G(self) -> float:
        return self.g0 * np.sqrt(self.n_c)


class SpectrumKind(str, enum.Enum):
    COHERENT_S21 = "coherent_s21"
    REFLECTION = "reflection"
    THERMAL_PSD = "thermal_psd"
    INTERNAL_PSD = "internal_psd"


@dataclass(frozen=True)
class SpectrumGrid:
    """Samples of a spectrum on a strictly increasing angular-frequency grid."""

    omega: np.ndarray
    values: np.ndarray
    kind: SpectrumKind
    channel: Optional[int] = None

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        values = np.asarray(self.values)
        if omega.ndim != 1 or values.shape != omega.shape:
            raise ModelError("omega and values must be 1-D arrays of equal length")
        if omega.size > 1 and np.any(np.diff(omega) <= 0):
            raise ModelError("omega must be strictly increasing")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", SpectrumKind(self.kind))

    def __len__(self):
        return int(self.omega.size)


@dataclass(frozen=True)
class BathOccupancies:
    """Bath occupancies of the intrinsic noise channels plus a constant floor."""

    n_local: float
    n_wg: np.ndarray = field(default_factory=lambda: np.empty(0))
    floor_c: float = 0.0

    def __post_init__(self):
        n_wg = np.atleast_1d(np.asarray(self.n_wg, dtype=float)).copy()
        n_wg.setflags(write=False)
        object.__setattr__(self, "n_wg", n_wg)

    @classmethod
    def uniform(cls, n, n_modes, floor_c=0.0) -> "BathOccupancies":
        return cls(float(n), np.full(n_modes, float(n)), floor_c)

    def as_vector(self) -> np.ndarray:
        """``(n_local, n_wg..., floor_c)``, the layout used by the noise basis."""
        return np.concatenate([[self.n_local], self.n_wg, [self.floor_c]])

    @classmethod
    def from_vector(cls, vec) -> "BathOccupancies":
        vec = np.asarray(vec, dtype=float)
        return cls(float(vec[0]), vec[1:-1], float(vec[-1]))

    def check(self, wg: WaveguideModeSet):
        if self.n_wg.size != len(wg):
            raise ModelError(
                f"got {self.n_wg.size} waveguide bath occupancies for {len(wg)} modes")


# ---------------------------------------------------------------------------
# Dynamical matrix and response
# ---------------------------------------------------------------------------


def build_dynamical_matrix(sys: LocalizedTransducer, wg: WaveguideModeSet,
                           drive: DriveCondition, max_modes: int = MAX_MODES) -> np.ndarray:
    """Dynamical matrix in the frame rotating at ``omega_m``.

    Layout is ``[a, b, c_1, ..., c_N]``. Diagonals carry ``i*detuning + rate/2``
    and couplings enter as ``iG`` (a-b) and ``i f_k`` (b-c_k).
    """
    n = len(wg)
    if n > max_modes:
        raise ModelError(f"too many modes: {n} > {max_modes}")
    size = n + 2
    m = np.zeros((size, size), dtype=complex)
    m[0, 0] = 1j * (sys.delta - sys.omega_m) + sys.kappa / 2
    m[1, 1] = sys.gamma_i / 2
    m[0, 1] = m[1, 0] = 1j * drive.G
    if n:
        idx = np.arange(2, size)
        m[idx, idx] = 1j * wg.detunings(sys.omega_m) + wg.gamma_k_i / 2
        m[1, idx] = m[idx, 1] = 1j * wg.f_k
    return m


def input_coupling(sys: LocalizedTransducer, wg: WaveguideModeSet) -> np.ndarray:
    """Diagonal of the input coupling matrix: ``sqrt`` of each channel's rate."""
    return np.sqrt(np.concatenate([[sys.kappa_e, sys.gamma_i], wg.gamma_k_i]))


def _frame_offset(sys, omega):
    return sys.omega_m - np.asarray(omega, dtype=float)


def _batched(m, nu):
    """Yield ``(slice, A)`` with ``A[j] = m + 1j*nu[j]*I`` over chunks of ``nu``."""
    eye = np.eye(m.shape[0])
    for start in range(0, nu.size, _CHUNK):
        sl = slice(start, min(start + _CHUNK, nu.size))
        yield sl, m[None, :, :] + 1j * nu[sl, None, None] * eye


def resolvent_rows(m: np.ndarray, nu, rows: Sequence[int]) -> np.ndarray:
    """Selected rows of ``(m + 1j*nu)^-1`` for every ``nu``.

    Returns an array of shape ``(len(nu), len(rows), dim)``.  Rows of an inverse
    are obtained by solving the transposed system against unit vectors.
    """
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    dim = m.shape[0]
    rhs = np.zeros((dim, len(rows)), dtype=complex)
    rhs[list(rows), np.arange(len(rows))] = 1.0
    out = np.empty((nu.size, len(rows), dim), dtype=complex)
    for sl, a in _batched(m, nu):
        at = np.swapaxes(a, -1, -2)
        sol = np.linalg.solve(at, np.broadcast_to(rhs, (at.shape[0],) + rhs.shape))
        out[sl] = np.swapaxes(sol, -1, -2)
    return out


def reflection_coefficient(sys: LocalizedTransducer, wg: WaveguideModeSet,
                           drive: DriveCondition, omega):
    """Sideband reflection coefficient ``r(omega)`` as a nested continued fraction."""
    omega = np.asarray(omega, dtype=float)
    w = omega[..., None]
    wg_sum = np.sum(wg.f_k**2 / (1j * (wg.omega_k - w) + wg.gamma_k_i / 2), axis=-1)
    mech = 1j * (sys.omega_m - omega) + sys.gamma_i / 2 + wg_sum
    opt = 1j * (sys.delta - omega) + sys.kappa / 2 + drive.G**2 / mech
    r = 1.0 - sys.kappa_e / opt
    return r if r.ndim else complex(r)


def s21(sys: LocalizedTransducer, wg: WaveguideModeSet, drive: DriveCondition, omega):
    """Normalized RF scattering parameter of the intensity-modulated probe.

    ``S21 = [(1+i) r*(0) r(w) + (1-i) r(0) r*(-w)] / 2``, with the modulator
    biased at its midpoint.
    """
    return s21_from_reflection(lambda w: reflection_coefficient(sys, wg, drive, w), omega)


def s21_from_reflection(r, omega, phi_dc=np.pi / 2):
    """Combine a reflection function ``r(omega)`` into the detected S21.

    ``phi_dc`` is the modulator bias.  For a general bias the carrier is
    ``1 - e^{i phi}`` and each sideband ``-i e^{i phi}``, giving weights
    ``w = i(1 - e^{i phi})`` and ``conj(w)`` normalized by the far-detuned value
    ``2 sin(phi)``; at ``phi = pi/2`` this is exactly ``(1 +/- i) / 2``.
    """
    omega = np.asarray(omega, dtype=float)
    r0 = np.asarray(r(np.zeros(1)))[0]
    rp = np.asarray(r(omega))
    rm = np.asarray(r(-omega))
    if phi_dc == np.pi / 2:
        wp = 1 + 1j
        norm = 2.0
    else:
        wp = 1j * (1 - np.exp(1j * phi_dc))
        norm = 2.0 * np.sin(phi_dc)
    out = (wp * np.conj(r0) * rp + np.conj(wp) * r0 * np.conj(rm)) / norm
    return out if out.ndim else complex(out)


def io_green_function(sys: LocalizedTransducer, wg: WaveguideModeSet,
                      drive: DriveCondition, omega) -> np.ndarray:
    """Input-output matrix ``G(omega) = 1 - K_out (M + i nu)^-1 K_in``.

    ``K_out`` couples the optical channel only, so rows below the first are the
    identity.  ``G[..., 0, 0]`` equals ``reflection_coefficient``.  Array input
    returns a stack of shape ``(len(omega), N+2, N+2)``.
    """
    scalar = np.ndim(omega) == 0
    m = build_dynamical_matrix(sys, wg, drive)
    k_in = input_coupling(sys, wg)
    row = resolvent_rows(m, _frame_offset(sys, np.atleast_1d(omega)), [0])[:, 0, :]
    _check_finite(row, omega)
    dim = m.shape[0]
    g = np.broadcast_to(np.eye(dim, dtype=complex), (row.shape[0], dim, dim)).copy()
    g[:, 0, :] -= np.sqrt(sys.kappa_e) * row * k_in
    return g[0] if scalar else g


def optical_row(sys, wg, drive, omega) -> np.ndarray:
    """First row of the input-output matrix, shape ``(len(omega), N+2)``."""
    m = build_dynamical_matrix(sys, wg, drive)
    k_in = input_coupling(sys, wg)
    row = resolvent_rows(m, _frame_offset(sys, np.atleast_1d(omega)), [0])[:, 0, :]
    _check_finite(row, omega)
    g = -np.sqrt(sys.kappa_e) * row * k_in
    g[:, 0] += 1.0
    return g


def internal_green_rows(sys, wg, drive, omega, rows) -> np.ndarray:
    """Rows of ``G_int = (M + i nu)^-1 K_in``, shape ``(len(omega), len(rows), N+2)``."""
    m = build_dynamical_matrix(sys, wg, drive)
    out = resolvent_rows(m, _frame_offset(sys, np.atleast_1d(omega)), rows)
    _check_finite(out, omega)
    return out * input_coupling(sys, wg)


def _check_finite(arr, omega):
    if not np.all(np.isfinite(arr)):
        bad = np.atleast_1d(omega)[~np.all(np.isfinite(arr.reshape(arr.shape[0], -1)), axis=1)]
        raise ModelError(
            f"singular response matrix at omega={bad[:3]!r}; "
            "positive damping should make this impossible")


# ---------------------------------------------------------------------------
# Thermal spectra
# ---------------------------------------------------------------------------


def thermal_output_spectrum(sys: LocalizedTransducer, wg: WaveguideModeSet,
                            drive: DriveCondition, baths: BathOccupancies,
                            omega) -> SpectrumGrid:
    """Optical output photon-flux PSD from thermally occupied mechanical baths.

    ``S_out(w) = sum_j n_j |G_1j(w)|^2 + floor_c`` over the mechanical input
    channels; the optical input is vacuum.
    """
    baths.check(wg)
    omega = np.asarray(omega, dtype=float)
    g = optical_row(sys, wg, drive, omega)
    n = np.concatenate([[baths.n_local], baths.n_wg])
    psd = np.abs(g[:, 1:]) ** 2 @ n + baths.floor_c
    return SpectrumGrid(omega, psd, SpectrumKind.THERMAL_PSD)


def _target_row(target, wg):
    if target in ("localized", "b", None):
        return 1, None
    k = int(target)
    if not 0 <= k < len(wg):
        raise ModelError(f"waveguide mode index {k} out of range for {len(wg)} modes")
    return 2 + k, k


def internal_mode_spectra(sys: LocalizedTransducer, wg: WaveguideModeSet,
                          drive: DriveCondition, baths: BathOccupancies, omega,
                          target: Union[str, int] = "localized") -> SpectrumGrid:
    """Phonon PSD of one mechanical mode.

    ``target`` is ``"localized"`` or a 0-based waveguide mode index.  The floor
    of ``baths`` is ignored; it only models detection noise.
    """
    baths.check(wg)
    row, channel = _target_row(target, wg)
    omega = np.asarray(omega, dtype=float)
    g = internal_green_rows(sys, wg, drive, omega, [row])[:, 0, :]
    n = np.concatenate([[baths.n_local], baths.n_wg])
    psd = np.abs(g[:, 1:]) ** 2 @ n
    return SpectrumGrid(omega, psd, SpectrumKind.INTERNAL_PSD, channel=channel)


def occupancy_from_spectrum(spec: SpectrumGrid, edge_tol: float = 1e-3) -> float:
    """Integrate a phonon PSD: ``n = (1/2pi) * integral S(w) dw`` (trapezoid)."""
    values = np.asarray(spec.values)
    if np.iscomplexobj(values):
        if np.any(np.abs(values.imag) > 1e-12 * np.max(np.abs(values))):
            raise ModelError("occupancy needs a real spectrum")
        values = values.real
    peak = np.max(np.abs(values)) if values.size else 0.0
    if peak > 0 and max(abs(values[0]), abs(values[-1])) > edge_tol * peak:
        warnings.warn("grid truncation: spectrum edges exceed "
                      f"{edge_tol:g} of the peak", GridTruncationWarning, stacklevel=2)
    return float(trapezoid(values, spec.omega) / TWO_PI)


def default_grid(sys: LocalizedTransducer, wg: WaveguideModeSet, n_points: int = 4001,
                 half_width: Optional[float] = None) -> np.ndarray:
    """Grid over ``[omega_m - W, omega_m + W]``.

    ``W`` defaults to ten times the span of the waveguide modes about
    ``omega_m``; without modes it falls back to 50 localized linewidths.
    """
    if half_width is None:
        if len(wg):
            span = max(np.max(np.abs(wg.omega_k - sys.omega_m)), np.ptp(wg.omega_k))
            half_width = 10.0 * max(span, sys.gamma_i)
        else:
            half_width = 50.0 * sys.gamma_i
    return np.linspace(sys.omega_m - half_width, sys.omega_m + half_width, n_points)


def intracavity_photons(power, sys: LocalizedTransducer, omega_l: Optional[float] = None):
    """Mean photon number for input ``power`` (W): ``kappa_e P / (hbar w_L (Delta^2 + kappa^2/4))``."""
    omega_l = sys.omega_c - sys.delta if omega_l is None else omega_l
    out = sys.kappa_e * np.asarray(power, dtype=float) / (hbar * omega_l) / (
        sys.delta**2 + sys.kappa**2 / 4.0)
    return out if out.ndim else float(out)
