"""Joint fit of the coherent (pump-probe phase) response at several drive powers."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import least_squares, minimize
from scipy.signal import find_peaks

from .core import (DriveCondition, LocalizedTransducer, ModelError, WaveguideModeSet,
                   TWO_PI, reflection_coefficient, s21_from_reflection)

log = logging.getLogger(__name__)

LOCAL_PARAMS = ("gamma_i", "g0", "kappa_i", "kappa_e", "omega_m", "delta")
MODE_PARAMS = ("omega_k", "f_k", "gamma_k_i")
_POSITIVE = {"gamma_i", "g0", "kappa_i", "kappa_e", "f_k", "gamma_k_i"}
# Step scales (rad/s) for the frequency-like parameters.
_FREQ_SCALE = {"omega_m": TWO_PI * 1e5, "delta": TWO_PI * 1e7, "omega_k": TWO_PI * 1e5}


def unwrap_phase(phase, threshold=np.pi):
    """Adjacent-sample unwrap with a ``pi`` jump threshold."""
    return np.unwrap(np.asarray(phase, dtype=float), discont=threshold)


@dataclass(frozen=True)
class CoherentDataset:
    """Measured S21 phase at one intracavity photon number."""

    n_c: float
    omega: np.ndarray
    phase: np.ndarray
    weight: Optional[np.ndarray] = None

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        phase = np.asarray(self.phase, dtype=float)
        if omega.ndim != 1 or phase.shape != omega.shape:
            raise ModelError("omega and phase must be 1-D arrays of equal length")
        if omega.size > 1 and np.any(np.diff(omega) <= 0):
            raise ModelError("omega grid must be strictly increasing")
        bad = np.flatnonzero(~np.isfinite(phase))
        if bad.size:
            raise ModelError(f"NaN or inf in phase data at index {int(bad[0])}")
        if omega.size > 1 and np.any(np.abs(np.diff(phase)) > np.pi):
            raise ModelError("phase is not unwrapped (adjacent jump larger than pi)")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "phase", phase)
        if self.weight is not None:
            w = np.asarray(self.weight, dtype=float)
            if w.shape != omega.shape or np.any(w < 0):
                raise ModelError("weight must be non-negative and match omega")
            object.__setattr__(self, "weight", w)

    @classmethod
    def from_raw_phase(cls, n_c, omega, phase, weight=None):
        """Build from wrapped phase; unwrap is applied once here."""
        return cls(n_c, omega, unwrap_phase(phase), weight)


@dataclass
class FitResult:
    """Estimated parameters of the coupled system and fit diagnostics.

    ``deltas`` holds the laser-cavity detuning used for each dataset.
    ``phase_offsets`` (when fitted) are added to the model phase.
    ``uncertainties`` are one-sigma estimates from the curvature of the cost
    (Gauss-Newton ``J^T J``), scaled by the residual variance.
    """

    sys: LocalizedTransducer
    wg: WaveguideModeSet
    deltas: list
    cost: float = float("nan")
    n_iter: int = 0
    converged: bool = False
    cost_trace: list = field(default_factory=list)
    uncertainties: dict = field(default_factory=dict)
    phase_offsets: Optional[list] = None

    @classmethod
    def seed(cls, sys, wg, n_datasets=1):
        return cls(sys, wg, [sys.delta] * n_datasets)

    def summary(self) -> dict:
        """Fitted values in Hz (frequencies divided by 2 pi)."""
        out = {name: getattr(self.sys, name) / TWO_PI for name in LOCAL_PARAMS}
        out["kappa"] = self.sys.kappa / TWO_PI
        out["deltas"] = [d / TWO_PI for d in self.deltas]
        for name in MODE_PARAMS:
            out[name] = (getattr(self.wg, name) / TWO_PI).tolist()
        out["cost"] = self.cost
        out["n_iter"] = self.n_iter
        out["converged"] = self.converged
        return out


def model_phase(sys: LocalizedTransducer, wg: WaveguideModeSet, n_c: float, omega,
                phi_dc: float = np.pi / 2) -> np.ndarray:
    """Unwrapped phase of the normalized S21 on ``omega``."""
    drive = DriveCondition.for_transducer(sys, n_c)
    s = s21_from_reflection(lambda w: reflection_coefficient(sys, wg, drive, w),
                            np.asarray(omega, dtype=float), phi_dc=phi_dc)
    return unwrap_phase(np.angle(s))


class _Packer:
    """Map between a flat optimizer vector and model parameters."""

    def __init__(self, seed: FitResult, n_datasets, free_local, free_modes, per_dataset_delta,
                 linear_phase):
        self.seed = seed
        self.n_modes = len(seed.wg)
        self.n_datasets = n_datasets
        self.free_local = [p for p in LOCAL_PARAMS if p in free_local and p != "delta"]
        self.fit_delta = "delta" in free_local
        self.free_modes = [p for p in MODE_PARAMS if p in free_modes]
        self.per_dataset_delta = per_dataset_delta
        self.linear_phase = linear_phase
        self.n_delta = (n_datasets if per_dataset_delta else 1) if self.fit_delta else 0

    def _enc(self, name, value, ref):
        if name in _POSITIVE:
            return np.log(value / ref)
        return (value - ref) / _FREQ_SCALE[name]

    def _dec(self, name, u, ref):
        if name in _POSITIVE:
            return ref * np.exp(u)
        return ref + u * _FREQ_SCALE[name]

    def x0(self):
        return np.zeros(self.size)

    @property
    def size(self):
        n = len(self.free_local) + self.n_delta + len(self.free_modes) * self.n_modes
        return n + (2 * self.n_datasets if self.linear_phase else 0)

    def names(self):
        out = list(self.free_local)
        out += [f"delta[{i}]" for i in range(self.n_delta)]
        for p in self.free_modes:
            out += [f"{p}[{k}]" for k in range(self.n_modes)]
        if self.linear_phase:
            out += [f"phase_offset[{i}]" for i in range(self.n_datasets)]
            out += [f"phase_slope[{i}]" for i in range(self.n_datasets)]
        return out

    def encode(self, result: FitResult):
        s0, w0 = self.seed.sys, self.seed.wg
        x = [self._enc(p, getattr(result.sys, p), getattr(s0, p)) for p in self.free_local]
        x += [self._enc("delta", d, d0) for d, d0 in
              zip(result.deltas[:self.n_delta], self.seed.deltas[:self.n_delta])]
        for p in self.free_modes:
            x += list(self._enc(p, getattr(result.wg, p), getattr(w0, p)))
        if self.linear_phase:
            x += [0.0] * (2 * self.n_datasets)
        return np.array(x, dtype=float)

    def decode(self, x):
        """Return ``(sys, wg, deltas, offsets, slopes)``."""
        s0, w0 = self.seed.sys, self.seed.wg
        i = 0
        local = {}
        for p in self.free_local:
            local[p] = float(self._dec(p, x[i], getattr(s0, p)))
            i += 1
        deltas = list(self.seed.deltas)
        if self.n_delta:
            vals = [float(self._dec("delta", x[i + j], self.seed.deltas[j]))
                    for j in range(self.n_delta)]
            deltas = vals if self.per_dataset_delta else vals * self.n_datasets
            i += self.n_delta
        local.setdefault("delta", deltas[0])
        sys = replace(s0, **local)
        modes = {}
        for p in self.free_modes:
            modes[p] = self._dec(p, x[i:i + self.n_modes], getattr(w0, p))
            i += self.n_modes
        wg = WaveguideModeSet(modes.get("omega_k", w0.omega_k), modes.get("f_k", w0.f_k),
                              modes.get("gamma_k_i", w0.gamma_k_i)) if modes else w0
        offsets = slopes = None
        if self.linear_phase:
            offsets = x[i:i + self.n_datasets]
            slopes = x[i + self.n_datasets:i + 2 * self.n_datasets]
        return sys, wg, deltas, offsets, slopes


def _residuals(sys, wg, deltas, datasets, offsets=None, slopes=None, phi_dc=np.pi / 2):
    out = []
    for i, ds in enumerate(datasets):
        s = replace(sys, delta=deltas[i])
        r = model_phase(s, wg, ds.n_c, ds.omega, phi_dc) - ds.phase
        if offsets is not None:
            # slope per GHz of detuning keeps the parameter O(1)
            r = r + offsets[i] + slopes[i] * (ds.omega - ds.omega[0]) / (TWO_PI * 1e9)
        if ds.weight is not None:
            r = r * np.sqrt(ds.weight)
        out.append(r)
    return np.concatenate(out)


def fit_cost(sys: LocalizedTransducer, wg: WaveguideModeSet,
             datasets: Sequence[CoherentDataset], deltas=None, phi_dc=np.pi / 2) -> float:
    """Sum of squared (weighted) phase residuals over all datasets and points."""
    if not datasets:
        raise ModelError("fit_cost needs at least one dataset")
    if deltas is None:
        deltas = [sys.delta] * len(datasets)
    r = _residuals(sys, wg, deltas, datasets, phi_dc=phi_dc)
    return float(r @ r)


@dataclass
class FitOptions:
    """Options for :func:`fit_coherent`.

    ``method`` is ``"least_squares"`` (finite-difference trust-region
    Gauss-Newton) or ``"simplex"`` (Nelder-Mead with restarts followed by a
    least-squares refinement when ``refine`` is set).
    """

    method: str = "least_squares"
    staged: bool = True
    free_local: tuple = ("gamma_i", "g0", "kappa_i", "kappa_e", "omega_m", "delta")
    free_modes: tuple = MODE_PARAMS
    per_dataset_delta: bool = False
    linear_phase: bool = False
    max_nfev: int = 4000
    ftol: float = 1e-12
    xtol: float = 1e-12
    gtol: float = 1e-12
    restarts: int = 3
    refine: bool = True
    phi_dc: float = np.pi / 2


def _run(packer, datasets, opts, x0, trace):
    def fun(x):
        sys, wg, deltas, off, sl = packer.decode(x)
        return _residuals(sys, wg, deltas, datasets, off, sl, opts.phi_dc)

    def cost(x):
        r = fun(x)
        c = float(r @ r)
        trace.append(c)
        return c

    nfev = 0
    if opts.method == "simplex":
        x = x0
        for _ in range(max(opts.restarts, 1)):
            res = minimize(cost, x, method="Nelder-Mead",
                           options={"maxfev": opts.max_nfev, "xatol": opts.xtol,
                                    "fatol": opts.ftol, "adaptive": True})
            nfev += res.nfev
            if np.allclose(res.x, x, rtol=0, atol=opts.xtol):
                x = res.x
                break
            x = res.x
        converged = bool(res.success)
        if opts.refine:
            res = least_squares(fun, x, method="trf", x_scale="jac", ftol=opts.ftol,
                                xtol=opts.xtol, gtol=opts.gtol, max_nfev=opts.max_nfev)
            nfev += res.nfev
            x, converged = res.x, res.status > 0
            trace.append(2.0 * res.cost)
        return x, nfev, converged, None
    if opts.method != "least_squares":
        raise ModelError(f"unknown fit method {opts.method!r}")
    res = least_squares(fun, x0, method="trf", x_scale="jac", ftol=opts.ftol, xtol=opts.xtol,
                        gtol=opts.gtol, max_nfev=opts.max_nfev)
    trace.append(2.0 * res.cost)
    return res.x, res.nfev, res.status > 0, res


def _curvature_sigma(res, names, n_points):
    if res is None or res.jac is None:
        return {}
    jac = np.asarray(res.jac)
    dof = max(n_points - jac.shape[1], 1)
    s2 = 2.0 * res.cost / dof
    try:
        cov = np.linalg.pinv(jac.T @ jac) * s2
    except np.linalg.LinAlgError:
        return {}
    return {n: float(np.sqrt(max(cov[i, i], 0.0))) for i, n in enumerate(names)}


def _natural_sigma(packer, x, sigma_u):
    """Convert curvature uncertainties in optimizer units to rad/s (first order)."""
    sys, wg, deltas, _, _ = packer.decode(x)
    out = {}
    for name, su in sigma_u.items():
        base = name.split("[")[0]
        if base in ("phase_offset", "phase_slope"):
            out[name] = su
            continue
        if base == "delta":
            out[name] = su * _FREQ_SCALE["delta"]
            continue
        if "[" in name:
            k = int(name.split("[")[1].rstrip("]"))
            value = getattr(wg, base)[k]
        else:
            value = getattr(sys, base)
        out[name] = su * (value if base in _POSITIVE else _FREQ_SCALE[base])
    return out


def fit_coherent(datasets: Sequence[CoherentDataset], init: FitResult,
                 options: Optional[FitOptions] = None) -> FitResult:
    """Minimize the joint phase cost starting from ``init``.

    With ``options.staged`` the localized parameters are fitted first with
    the waveguide modes held at their seeds, then everything is freed.
    The result is deterministic for given data, seed and options.
    """
    opts = options or FitOptions()
    if not datasets:
        raise ModelError("fit_coherent needs at least one dataset")
    init = replace(init, deltas=list(init.deltas) + [init.sys.delta] *
                   (len(datasets) - len(init.deltas)))
    trace = []
    n_points = sum(ds.omega.size for ds in datasets)
    initial_cost = fit_cost(init.sys, init.wg, datasets, init.deltas, opts.phi_dc)
    trace.append(initial_cost)
    current = init
    total_nfev = 0
    stages = []
    if opts.staged and opts.free_modes and opts.free_local:
        stages.append((opts.free_local, ()))
    stages.append((opts.free_local, opts.free_modes))
    res = packer = None
    x = None
    for free_local, free_modes in stages:
        packer = _Packer(current, len(datasets), free_local, free_modes,
                         opts.per_dataset_delta, opts.linear_phase)
        x, nfev, converged, res = _run(packer, datasets, opts, packer.x0(), trace)
        total_nfev += nfev
        sys, wg, deltas, offsets, _ = packer.decode(x)
        current = FitResult(sys, wg, deltas)
        log.debug("stage %s done: cost %.3e after %d evaluations",
                  free_modes or "local", trace[-1], nfev)
    sys, wg, deltas, offsets, slopes = packer.decode(x)
    final_cost = fit_cost(sys, wg, datasets, deltas, opts.phi_dc) if offsets is None else \
        float(np.sum(_residuals(sys, wg, deltas, datasets, offsets, slopes, opts.phi_dc) ** 2))
    converged = bool(converged) and np.isfinite(final_cost) and final_cost <= initial_cost
    sigma = _natural_sigma(packer, x, _curvature_sigma(res, packer.names(), n_points))
    return FitResult(sys, wg, deltas, cost=final_cost, n_iter=total_nfev, converged=converged,
                     cost_trace=trace, uncertainties=sigma,
                     phase_offsets=None if offsets is None else list(offsets))


def seed_mode_frequencies(dataset: CoherentDataset, n_modes: Optional[int] = None,
                          max_width: Optional[float] = None, min_separation: Optional[float] = None,
                          prominence=0.05) -> np.ndarray:
    """Candidate waveguide-mode frequencies from extrema of ``d(phase)/d(omega)``.

    Narrow resonances show as sharp peaks of the phase slope.  ``max_width``
    (rad/s) drops broad features such as the localized mode; peaks closer than
    ``min_separation`` (default ``max_width``) count as one resonance, since a
    dispersive line can give two slope extrema.  The strongest ``n_modes``
    peaks are returned in ascending frequency.
    """
    w = dataset.omega
    slope = np.gradient(dataset.phase, w)
    mag = np.abs(slope)
    if not np.any(mag > 0):
        return np.empty(0)
    mag = mag / np.max(mag)
    sep = max_width if min_separation is None else min_separation
    distance = None
    if sep is not None:
        distance = max(int(sep / np.median(np.diff(w))), 1)
    peaks, props = find_peaks(mag, prominence=prominence, width=1, distance=distance)
    if max_width is not None and peaks.size:
        dw = np.gradient(w)[peaks]
        keep = props["widths"] * dw <= max_width
        peaks = peaks[keep]
        props = {k: v[keep] for k, v in props.items()}
    if n_modes is not None and peaks.size > n_modes:
        order = np.argsort(props["prominences"])[::-1][:n_modes]
        peaks = peaks[order]
    return np.sort(w[peaks])
