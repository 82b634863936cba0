"""Command-line front end: ``phononwire <command> --config run.yaml --out results/``.

Each run writes ``result.json`` (the result envelope) to the output directory,
plus CSV data files and, with ``--emit-plots``, two-column plot files.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, apply_override, load_config, parse_config_text
from .core import (DriveCondition, ModelError, TWO_PI, default_grid, internal_mode_spectra,
                   occupancy_from_spectrum, thermal_output_spectrum)
from .io import ResultEnvelope, load_spectrum_csv, quantity, write_columns, write_plot_file

log = logging.getLogger("phononwire")

COMMANDS = ("simulate-coherent", "simulate-thermal", "fit-coherent", "fit-thermal",
            "eigen-report", "metrics", "disorder-ensemble", "dephasing")


class CommandError(RuntimeError):
    pass


@contextlib.contextmanager
def stage(name):
    """Prefix any failure with the module operation that raised it."""
    try:
        yield
    except (ModelError, ValueError, OSError, np.linalg.LinAlgError) as err:
        raise CommandError(f"{name}: {err}") from err


class Run:
    def __init__(self, cfg: RunConfig, out: Path, emit_plots: bool, env: ResultEnvelope):
        self.cfg, self.out, self.emit_plots, self.env = cfg, out, emit_plots, env

    def data(self, name, header, *cols):
        self.env.files.append(write_columns(self.out / name, header, *cols))

    def plot(self, name, x, y, xl, yl):
        if self.emit_plots:
            self.env.files.append(write_plot_file(self.out / name, x, y, xl, yl))

    def rng(self):
        return np.random.default_rng(self.cfg.seed)


def _hz(x):
    return quantity(np.asarray(x) / TWO_PI, "Hz")


def _label(n_c):
    return f"nc{n_c:g}".replace(".", "p")


def cmd_simulate_coherent(run: Run):
    from .fitting import model_phase
    cfg = run.cfg
    sys, wg = cfg.transducer(), cfg.waveguide()
    omega = cfg.grid(sys, wg)
    noise = cfg["simulate"]["phase_noise_rad"]
    rng = run.rng()
    traces = []
    for n_c in cfg.photon_numbers():
        with stage("core.s21"):
            phase = model_phase(sys, wg, n_c, omega)
        if noise > 0:
            phase = phase + noise * rng.standard_normal(phase.size)
        name = f"coherent_{_label(n_c)}.csv"
        run.data(name, ["frequency_hz", "phase_rad"], omega / TWO_PI, phase)
        run.plot(f"coherent_{_label(n_c)}.dat", omega / TWO_PI, phase, "frequency_hz",
                 "phase_rad")
        traces.append({"n_c": quantity(n_c, "photons"), "file": name})
    run.env.outputs = {"traces": traces, "n_points": quantity(omega.size, "count"),
                       "phase_noise": quantity(noise, "rad")}


def cmd_simulate_thermal(run: Run):
    cfg = run.cfg
    sys, wg = cfg.transducer(), cfg.waveguide()
    baths = cfg.baths(len(wg))
    omega = cfg.grid(sys, wg)
    # occupancies integrate over a wide grid, independent of the output grid
    wide = default_grid(sys, wg, n_points=8001)
    noise = cfg["simulate"]["psd_noise"]
    rng = run.rng()
    traces = []
    for n_c in cfg.photon_numbers():
        drive = DriveCondition.for_transducer(sys, n_c)
        with stage("core.thermal_output_spectrum"):
            psd = thermal_output_spectrum(sys, wg, drive, baths, omega).values
            occ = [occupancy_from_spectrum(internal_mode_spectra(sys, wg, drive, baths, wide, t))
                   for t in ["localized"] + list(range(len(wg)))]
        if noise > 0 and np.max(psd) > 0:
            psd = psd + noise * np.max(psd) * rng.standard_normal(psd.size)
        name = f"thermal_{_label(n_c)}.csv"
        run.data(name, ["frequency_hz", "psd"], omega / TWO_PI, psd)
        run.plot(f"thermal_{_label(n_c)}.dat", omega / TWO_PI, psd, "frequency_hz",
                 "psd_quanta_per_s_per_hz")
        traces.append({"n_c": quantity(n_c, "photons"), "file": name,
                       "n_localized": quantity(occ[0], "quanta"),
                       "n_waveguide": quantity(np.array(occ[1:]), "quanta")})
    run.env.outputs = {"traces": traces, "psd_units": "quanta/s per rad/s (flux PSD)"}


def _fit_options(block):
    from .fitting import FitOptions, LOCAL_PARAMS, MODE_PARAMS
    fixed = set(block["fixed"])
    unknown = fixed - set(LOCAL_PARAMS) - set(MODE_PARAMS)
    if unknown:
        raise ConfigError(f"fit.fixed: unknown parameter(s) {', '.join(sorted(unknown))}")
    return FitOptions(method=block["method"], staged=block["staged"],
                      per_dataset_delta=block["per_dataset_delta"],
                      linear_phase=block["linear_phase"], max_nfev=block["max_nfev"],
                      free_local=tuple(p for p in LOCAL_PARAMS if p not in fixed),
                      free_modes=tuple(p for p in MODE_PARAMS if p not in fixed))


def _resolve(base: Path, p):
    p = Path(p)
    return p if p.is_absolute() else base / p


def cmd_fit_coherent(run: Run):
    from .core import WaveguideModeSet
    from .fitting import FitResult, fit_coherent, model_phase, seed_mode_frequencies
    cfg = run.cfg
    block = cfg["fit"]
    if not block["datasets"]:
        raise ConfigError("fit.datasets must list at least one {path, n_c} entry")
    base = Path(cfg.path).parent if cfg.path else Path.cwd()
    datasets = []
    for entry in block["datasets"]:
        with stage("io.load_spectrum_csv"):
            datasets.append(load_spectrum_csv(_resolve(base, entry["path"]), "coherent",
                                              n_c=float(entry["n_c"])))
    sys, wg = cfg.transducer(), cfg.waveguide()
    if block["seed_peaks"] and len(wg):
        with stage("fitting.seed_mode_frequencies"):
            peaks = seed_mode_frequencies(datasets[0], n_modes=len(wg),
                                          max_width=TWO_PI * block["peak_max_width_hz"])
        if peaks.size == len(wg):
            wg = WaveguideModeSet(peaks, wg.f_k, wg.gamma_k_i)
        else:
            warnings.warn(f"peak picking found {peaks.size} of {len(wg)} modes; "
                          "keeping configured mode frequencies")
    opts = _fit_options(block)
    with stage("fitting.fit_coherent"):
        res = fit_coherent(datasets, FitResult.seed(sys, wg, len(datasets)), opts)
    if not res.converged:
        warnings.warn("fit did not converge; parameters are the best found")
    run.env.outputs = {
        "converged": res.converged,
        "cost": quantity(res.cost, "rad^2"),
        "evaluations": quantity(res.n_iter, "count"),
        "cost_trace": quantity(np.array(res.cost_trace), "rad^2"),
        "system": {k: _hz(getattr(res.sys, k)) for k in
                   ("kappa", "kappa_i", "kappa_e", "g0", "gamma_i", "omega_m")},
        "delta": _hz(np.array(res.deltas)),
        "waveguide": {"omega_k": _hz(res.wg.omega_k), "f_k": _hz(res.wg.f_k),
                      "gamma_k_i": _hz(res.wg.gamma_k_i)},
        "uncertainty": {k: _hz(v) if not k.startswith("phase_") else quantity(v, "rad")
                        for k, v in res.uncertainties.items()},
    }
    for ds, delta in zip(datasets, res.deltas):
        model = model_phase(replace(res.sys, delta=delta), res.wg, ds.n_c, ds.omega)
        run.data(f"fit_{_label(ds.n_c)}.csv", ["frequency_hz", "phase_data_rad",
                                              "phase_model_rad"],
                 ds.omega / TWO_PI, ds.phase, model)
        run.plot(f"fit_{_label(ds.n_c)}.dat", ds.omega / TWO_PI, model, "frequency_hz",
                 "phase_model_rad")


def cmd_fit_thermal(run: Run):
    from .thermometry import (CalibrationChain, basis_labels, build_noise_basis,
                              heating_rates, normalize_psd, solve_bath_occupancies)
    cfg = run.cfg
    block = cfg["thermal_fit"]
    if block["path"] is None or block["n_c"] is None:
        raise ConfigError("thermal_fit needs path and n_c")
    base = Path(cfg.path).parent if cfg.path else Path.cwd()
    with stage("io.load_spectrum_csv"):
        spec = load_spectrum_csv(_resolve(base, block["path"]), "thermal")
    sys, wg = cfg.transducer(), cfg.waveguide()
    values = spec.values
    cal = block["calibration"]
    if cal:
        cal = dict(cal)
        if "G_R" not in cal:
            raise ConfigError("thermal_fit.calibration needs G_R")
        g_r = float(cal.pop("G_R"))
        if "omega_p_hz" in cal:
            cal["omega_p"] = TWO_PI * float(cal.pop("omega_p_hz"))
        cal = {"G_EDFA": 1.0, "A": 1.0, "R": 1.0, **cal}
        with stage("thermometry.normalize_psd"):
            chain = CalibrationChain(**{k: float(v) for k, v in cal.items()})
            values = normalize_psd(values, g_r, chain, sys.omega_c)
    drive = DriveCondition.for_transducer(sys, block["n_c"])
    with stage("thermometry.build_noise_basis"):
        H = build_noise_basis(sys, wg, drive, spec.omega)
    with stage("thermometry.solve_bath_occupancies"):
        baths = solve_bath_occupancies(H, values, nonnegative=block["nonnegative"])
    fitted = H @ baths.as_vector()
    grid = default_grid(sys, wg, n_points=8001)
    with stage("core.internal_mode_spectra"):
        occ = [occupancy_from_spectrum(internal_mode_spectra(sys, wg, drive, baths, grid, t))
               for t in ["localized"] + list(range(len(wg)))]
    labels = basis_labels(len(wg))
    out = {
        "bath_occupancies": {lab: quantity(v, "quanta")
                             for lab, v in zip(labels[:-1], baths.as_vector()[:-1])},
        "floor": quantity(baths.floor_c, "quanta/s per rad/s"),
        "n_localized": quantity(occ[0], "quanta"),
        "n_waveguide": quantity(np.array(occ[1:]), "quanta"),
        "residual_rms": quantity(float(np.sqrt(np.mean((values - fitted) ** 2))),
                                 "quanta/s per rad/s"),
    }
    if block["n_i"] is not None:
        gammas = np.concatenate([[sys.gamma_i], wg.gamma_k_i])
        noise, heat = heating_rates(baths.as_vector()[:-1], gammas, block["n_i"])
        out["gamma_noise"] = _hz(noise)
        out["gamma_heating"] = _hz(heat)
    run.env.outputs = out
    run.data("thermal_fit.csv", ["frequency_hz", "psd_data", "psd_model"],
             spec.omega / TWO_PI, values, fitted)
    run.plot("thermal_fit.dat", spec.omega / TWO_PI, fitted, "frequency_hz", "psd_model")


def cmd_eigen_report(run: Run):
    from .modal import eigen_report
    cfg = run.cfg
    sys, wg = cfg.transducer(), cfg.waveguide()
    reports = []
    for n_c in cfg.photon_numbers():
        with stage("modal.eigen_report"):
            rep = eigen_report(sys, wg, DriveCondition.for_transducer(sys, n_c))
        modes = [rep.localized] + list(rep.waveguide)
        reports.append({
            "n_c": quantity(n_c, "photons"),
            "labels": [m.label for m in modes],
            "omega_total": _hz(np.array([m.omega_total for m in modes])),
            "gamma_total": _hz(np.array([m.gamma_total for m in modes])),
            "gamma_zero": _hz(np.array([m.gamma_zero for m in modes])),
            "gamma_S": _hz(np.array([m.gamma_S for m in modes])),
            "cooperativity": quantity(np.array([m.cooperativity for m in modes]),
                                      "dimensionless"),
            "negative_cooling": rep.flagged,
        })
        if rep.flagged:
            warnings.warn(f"negative sympathetic cooling at n_c={n_c:g} for {rep.flagged}")
    run.env.outputs = {"reports": reports,
                       "note": "omega_total is relative to omega_m (rotating frame)"}
    if run.emit_plots and len(wg) and len(reports) > 1:
        n = np.array([r["n_c"]["value"] for r in reports])
        for k in range(len(wg)):
            c = [r["cooperativity"]["value"][k + 1] for r in reports]
            run.plot(f"cooperativity_wg{k}.dat", n, c, "n_c", "cooperativity")


def cmd_metrics(run: Run):
    from .modal import propagation_metrics
    m = run.cfg["metrics"]
    sigma = None if m["sigma_hz"] is None else TWO_PI * m["sigma_hz"]
    with stage("modal.propagation_metrics"):
        pm = propagation_metrics(m["v_g"], m["length"], TWO_PI * m["gamma_k_i_hz"], m["n_i"],
                                 sigma)
    run.env.outputs = pm.as_dict()


def cmd_disorder_ensemble(run: Run):
    from .disorder import DisorderChain, ensemble_stats
    d = run.cfg["disorder"]
    with stage("disorder.ensemble_stats"):
        chain = DisorderChain.from_waveguide(d["v_g"], d["a"], d["length"],
                                             TWO_PI * d["band_center_hz"],
                                             TWO_PI * d["delta_omega_hz"], seed=run.cfg.seed)
        gamma_e = None if d["gamma_e_hz"] is None else TWO_PI * d["gamma_e_hz"]
        st = ensemble_stats(chain, d["n_realizations"], gamma_e=gamma_e,
                            window_fraction=d["window_fraction"], bins=d["bins"])
    out = {
        "n_sites": quantity(chain.n_sites, "count"),
        "J": _hz(chain.J),
        "fsr_clean": _hz(chain.fsr),
        "mean_spacing": _hz(float(np.mean(st.spacings))),
        "spacing_std": _hz(st.spacing_std),
        "spacing_ratio": quantity(st.spacing_ratio, "dimensionless"),
        "sqrt_a_over_L": quantity(float(np.sqrt(chain.a / chain.length)), "dimensionless"),
        "n_spacings": quantity(int(st.spacings.size), "count"),
        "seeds": quantity([st.seeds[0], st.seeds[-1]], "seed range"),
    }
    if st.couplings.size:
        out["mean_coupling"] = _hz(float(np.mean(st.couplings)))
        out["coupling_std"] = _hz(st.coupling_std)
    run.env.outputs = out
    counts, edges = st.spacing_hist
    centres = 0.5 * (edges[1:] + edges[:-1]) / TWO_PI
    run.data("spacing_hist.csv", ["spacing_hz", "count"], centres, counts)
    run.plot("spacing_hist.dat", centres, counts, "spacing_hz", "count")
    if st.coupling_hist is not None:
        counts, edges = st.coupling_hist
        centres = 0.5 * (edges[1:] + edges[:-1]) / TWO_PI
        run.data("coupling_hist.csv", ["coupling_hz", "count"], centres, counts)
        run.plot("coupling_hist.dat", centres, counts, "coupling_hz", "count")


def cmd_dephasing(run: Run):
    from .disorder import dephasing_fidelity, l3db_from_sigma
    d = run.cfg["dephasing"]
    sigma = TWO_PI * d["sigma_hz"]
    t = np.linspace(0.0, d["t_max"], d["n_points"])
    with stage("disorder.dephasing_fidelity"):
        fid = dephasing_fidelity(t, sigma)
        l3 = l3db_from_sigma(sigma, d["v_g"])
    run.env.outputs = {"sigma": quantity(d["sigma_hz"], "Hz"),
                       "t_half": quantity(np.sqrt(2 * np.log(2)) / sigma, "s"),
                       "L3dB_delta": quantity(l3, "m")}
    run.data("fidelity.csv", ["time_s", "fidelity"], t, fid)
    run.plot("fidelity.dat", t, fid, "time_s", "fidelity")


HANDLERS = {
    "simulate-coherent": cmd_simulate_coherent,
    "simulate-thermal": cmd_simulate_thermal,
    "fit-coherent": cmd_fit_coherent,
    "fit-thermal": cmd_fit_thermal,
    "eigen-report": cmd_eigen_report,
    "metrics": cmd_metrics,
    "disorder-ensemble": cmd_disorder_ensemble,
    "dephasing": cmd_dephasing,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phononwire", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="YAML or JSON run configuration")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--emit-plots", action="store_true", help="write two-column plot files")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--threads", type=int, help="BLAS threads (env PHONONWIRE_THREADS)")
    p.add_argument("--set", action="append", default=[], metavar="BLOCK.KEY=VALUE",
                   help="override a scalar config field")
    p.add_argument("--verbose", "-v", action="store_true")
    return p


def _thread_limit(n):
    if n is None:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        log.debug("threadpoolctl not installed; --threads ignored")
        return contextlib.nullcontext()
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads
    if threads is None and os.environ.get("PHONONWIRE_THREADS"):
        threads = int(os.environ["PHONONWIRE_THREADS"])
    env = ResultEnvelope(args.command, "", str(args.config) if args.config else None,
                         args.seed if args.seed is not None else 0)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        print(f"error: {args.command}: cannot create output directory: {err}", file=sys.stderr)
        return 2
    try:
        if args.config and args.config.is_file():
            env.config_text = args.config.read_bytes().decode("utf-8", errors="replace")
        cfg = load_config(args.config) if args.config else parse_config_text("")
        for item in args.set:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects BLOCK.KEY=VALUE, got {item!r}")
            apply_override(cfg, key, value)
        if args.seed is not None:
            cfg.seed = args.seed
        env.config_text, env.seed, env.overrides = cfg.text, cfg.seed, dict(cfg.overrides)
        with warnings.catch_warnings(record=True) as caught, _thread_limit(threads):
            warnings.simplefilter("always")
            try:
                HANDLERS[args.command](Run(cfg, args.out, args.emit_plots, env))
            finally:
                env.warnings = [str(w.message) for w in caught]
        for w in env.warnings:
            log.warning(w)
        env.finish()
        path = env.write(args.out / "result.json")
        if args.verbose:
            print(f"wrote {path}", file=sys.stderr)
        return 0
    except (ConfigError, CommandError, ModelError) as err:
        print(f"error: {args.command}: {err}", file=sys.stderr)
        env.status, env.error = "error", str(err)
        env.finish()
        env.write(args.out / "result.json")
        return 2

if __name__ == "__main__":
    sys.exit(main())
