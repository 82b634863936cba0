"""Tight-binding model of a waveguide with random on-site frequency disorder.

The waveguide is discretized into sites of pitch ``a`` with on-site frequencies
drawn from a Gaussian of mean ``Omega`` and standard deviation ``delta_omega``
and a constant nearest-neighbour hopping ``J``.  The clean dispersion is
``Omega + 2 J cos(k a)``, so around ``k a = pi/2`` the group velocity is
``2 J a``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .core import (BathOccupancies, DriveCondition, LocalizedTransducer, ModelError,
                   SpectrumGrid, SpectrumKind, TWO_PI, WaveguideModeSet,
                   thermal_output_spectrum)

#: Half-width of the band-centre statistics window as a fraction of the 4J band.
WINDOW_FRACTION = 0.05


@dataclass(frozen=True)
class DisorderChain:
    """Disordered open chain.  Frequencies in rad/s, ``a`` in metres."""

    n_sites: int
    Omega: float
    J: float
    delta_omega: float
    a: float
    seed: Optional[int] = 0

    def __post_init__(self):
        if self.n_sites < 2:
            raise ModelError("n_sites must be >= 2")
        if self.J <= 0:
            raise ModelError("J must be positive")
        if self.delta_omega < 0:
            raise ModelError("delta_omega must be non-negative")
        if self.a <= 0:
            raise ModelError("lattice constant a must be positive")

    @classmethod
    def from_waveguide(cls, v_g, a, length, band_center, delta_omega, seed=0):
        """Chain of ``round(length / a)`` sites matching group velocity ``v_g``."""
        omega, J = tb_params_from_dispersion(v_g, a, band_center)
        return cls(int(round(length / a)), omega, J, delta_omega, a, seed)

    @property
    def length(self) -> float:
        """Effective standing-wave length ``(N + 1) a`` of the open chain."""
        return (self.n_sites + 1) * self.a

    @property
    def v_g(self) -> float:
        return 2.0 * self.J * self.a

    @property
    def fsr(self) -> float:
        """Band-centre mode spacing of the clean chain, ``pi v_g / length``."""
        return np.pi * self.v_g / self.length

    def window(self, fraction=WINDOW_FRACTION):
        half = fraction * 4.0 * self.J
        return self.Omega - half, self.Omega + half

    def with_seed(self, seed) -> "DisorderChain":
        return replace(self, seed=seed)


def tb_params_from_dispersion(v_g, a, band_center):
    """``(Omega, J)`` such that the band is centred at ``band_center`` with ``2 J a = v_g``."""
    if v_g <= 0 or a <= 0:
        raise ModelError("v_g and a must be positive")
    return float(band_center), v_g / (2.0 * a)


def dispersion(k, chain: DisorderChain):
    return chain.Omega + 2.0 * chain.J * np.cos(k * chain.a)


def group_velocity(k, chain: DisorderChain):
    """``|dE/dk|`` of the clean band."""
    return np.abs(2.0 * chain.J * chain.a * np.sin(k * chain.a))


def sample_chain(chain: DisorderChain) -> np.ndarray:
    """On-site frequencies for one realization, fully determined by ``chain.seed``."""
    rng = np.random.default_rng(chain.seed)
    eps = rng.standard_normal(chain.n_sites)
    return chain.Omega + chain.delta_omega * eps


def chain_eigenmodes(onsite, J, window=None, vectors=True):
    """Eigenfrequencies of the open chain and the amplitude on the last site.

    ``window=(lo, hi)`` restricts the solve to that frequency interval.
    Returns ``(frequencies, end_amplitudes)``; amplitudes are ``None`` when
    ``vectors`` is false.
    """
    onsite = np.asarray(onsite, dtype=float)
    off = np.full(onsite.size - 1, float(J))
    kw = {} if window is None else {"select": "v", "select_range": window}
    if not vectors:
        return eigh_tridiagonal(onsite, off, eigvals_only=True, **kw), None
    w, v = eigh_tridiagonal(onsite, off, **kw)
    return w, np.abs(v[-1, :])


def clean_spectrum(n_sites, Omega, J):
    """Analytic open-chain spectrum ``Omega + 2J cos(pi m / (N+1))``, ascending."""
    m = np.arange(1, n_sites + 1)
    return np.sort(Omega + 2.0 * J * np.cos(np.pi * m / (n_sites + 1)))


def clean_end_amplitudes(n_sites):
    """``|psi_m(N)| = sqrt(2/(N+1)) |sin(pi m N / (N+1))|`` for ``m = 1..N``.

    Ordered like :func:`clean_spectrum` (ascending frequency).
    """
    m = np.arange(1, n_sites + 1)
    amp = np.sqrt(2.0 / (n_sites + 1)) * np.abs(np.sin(np.pi * m * n_sites / (n_sites + 1)))
    return amp[::-1]


def coupling_scale(chain: DisorderChain, gamma_e: float) -> float:
    """Constant ``f0`` so the clean band-centre couplings average ``sqrt(fsr gamma_e / 2pi)``.

    Modes couple through the terminal site: ``f_m = f0 |psi_m(end)| sqrt(N)``.
    """
    target = np.sqrt(chain.fsr * gamma_e / TWO_PI)
    freqs = clean_spectrum(chain.n_sites, chain.Omega, chain.J)
    amp = clean_end_amplitudes(chain.n_sites)
    lo, hi = chain.window()
    sel = (freqs >= lo) & (freqs <= hi)
    if not np.any(sel):
        raise ModelError("no clean-chain modes inside the band-centre window")
    return target / np.mean(amp[sel] * np.sqrt(chain.n_sites))


def mode_couplings(amplitudes, n_sites, f0):
    return f0 * np.asarray(amplitudes) * np.sqrt(n_sites)


@dataclass
class EnsembleStats:
    """Pooled band-centre statistics over disorder realizations."""

    spacings: np.ndarray
    couplings: np.ndarray
    seeds: list
    delta_omega: float
    spacing_hist: tuple = field(default=None)
    coupling_hist: tuple = field(default=None)

    @property
    def spacing_std(self) -> float:
        return float(np.std(self.spacings))

    @property
    def coupling_std(self) -> float:
        return float(np.std(self.couplings)) if self.couplings.size else float("nan")

    @property
    def spacing_ratio(self) -> float:
        """``std(spacing) / delta_omega``; compare with ``sqrt(a / L)``."""
        if self.delta_omega == 0:
            return 0.0
        return self.spacing_std / self.delta_omega


def ensemble_stats(chain: DisorderChain, n_realizations: int, gamma_e: Optional[float] = None,
                   window_fraction=WINDOW_FRACTION, bins=30) -> EnsembleStats:
    """Spacing and coupling distributions near the band centre.

    Realization ``i`` uses seed ``chain.seed + i``.  Couplings are computed
    only when ``gamma_e`` is given (it sets the coupling scale).
    """
    if n_realizations < 1:
        raise ModelError("n_realizations must be >= 1")
    window = chain.window(window_fraction)
    f0 = coupling_scale(chain, gamma_e) if gamma_e is not None else None
    base = chain.seed or 0
    seeds = [base + i for i in range(n_realizations)]
    spacings, couplings = [], []
    for seed in seeds:
        onsite = sample_chain(chain.with_seed(seed))
        w, amp = chain_eigenmodes(onsite, chain.J, window=window, vectors=f0 is not None)
        spacings.append(np.diff(w))
        if f0 is not None:
            couplings.append(mode_couplings(amp, chain.n_sites, f0))
    spacings = np.concatenate(spacings)
    couplings = np.concatenate(couplings) if couplings else np.empty(0)
    stats = EnsembleStats(spacings, couplings, seeds, chain.delta_omega)
    stats.spacing_hist = np.histogram(spacings, bins=bins)
    if couplings.size:
        stats.coupling_hist = np.histogram(couplings, bins=bins)
    return stats


def chain_mode_set(chain: DisorderChain, center: float, half_width: float, gamma_k_i: float,
                   f0: float, onsite=None) -> WaveguideModeSet:
    """Chain modes within ``center +/- half_width`` as a waveguide mode set."""
    if onsite is None:
        onsite = sample_chain(chain)
    w, amp = chain_eigenmodes(onsite, chain.J, window=(center - half_width, center + half_width))
    f = mode_couplings(amp, chain.n_sites, f0)
    return WaveguideModeSet(w, f, np.full(w.size, float(gamma_k_i)))


def tb_thermal_spectrum(chain: DisorderChain, sys: LocalizedTransducer, drive: DriveCondition,
                        n_bath: float, gamma_k_i: float, gamma_e: float, omega,
                        second_band: Optional[DisorderChain] = None,
                        mode_half_width: Optional[float] = None) -> SpectrumGrid:
    """Normalized (0 to 1) thermal output spectrum of a transducer read-out chain.

    The chain modes near ``sys.omega_m`` couple to the transducer through the
    terminal site.  ``second_band`` adds a second independent chain coupled to
    the same end, emulating a multi-band waveguide.  Uniform bath ``n_bath``.
    """
    omega = np.asarray(omega, dtype=float)
    if mode_half_width is None:
        mode_half_width = np.ptp(omega) + 20 * chain.fsr
    modes = []
    for c in [chain] + ([second_band] if second_band is not None else []):
        if c.J * 4.0 < 2 * mode_half_width:
            raise ModelError("mode window wider than the tight-binding band")
        f0 = coupling_scale(c, gamma_e)
        ws = chain_mode_set(c, sys.omega_m, mode_half_width, gamma_k_i, f0)
        modes.extend(ws.modes)
    modes.sort()
    # merge exact frequency collisions between two bands
    kept = [modes[0]] if modes else []
    for m in modes[1:]:
        if m[0] > kept[-1][0]:
            kept.append(m)
    wg = WaveguideModeSet.from_modes(kept)
    baths = BathOccupancies.uniform(n_bath, len(wg))
    spec = thermal_output_spectrum(sys, wg, drive, baths, omega)
    v = spec.values
    lo, hi = np.min(v), np.max(v)
    norm = (v - lo) / (hi - lo) if hi > lo else np.zeros_like(v)
    return SpectrumGrid(omega, norm, SpectrumKind.THERMAL_PSD)


def dephasing_fidelity(t, sigma):
    """Ensemble pulse fidelity ``exp(-t^2 sigma^2 / 2)`` under static Gaussian detunings."""
    if np.any(np.asarray(sigma) < 0):
        raise ModelError("sigma must be non-negative")
    t = np.asarray(t, dtype=float)
    out = np.exp(-0.5 * (t * sigma) ** 2)
    return out if out.ndim else float(out)


def l3db_from_sigma(sigma, v_g):
    """One-way distance ``v_g t`` at which the fidelity drops to one half."""
    if sigma <= 0:
        raise ModelError("sigma must be positive")
    return v_g * np.sqrt(2.0 * np.log(2.0)) / sigma
