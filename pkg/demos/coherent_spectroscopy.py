"""Coherent (pump-probe) spectroscopy of a localized transducer coupled to a phononic wire.

We synthesize the reflected-probe phase at five drive powers, add 5 mrad of
phase noise and fit the coupled-mode model back to it.  Narrow dispersive
features in the phase mark the standing-wave modes of the wire; their widths
grow with drive as the transducer cools them sympathetically.
"""

from dataclasses import replace

import numpy as np

from phononwire import core, fitting

TWO_PI = core.TWO_PI
MHz, kHz = TWO_PI * 1e6, TWO_PI * 1e3

# Fitted device parameters; the drive sits at the mean fitted detuning.
sys = core.LocalizedTransducer.from_total(
    kappa=1e3 * MHz, kappa_e=200 * MHz, g0=690 * kHz, gamma_i=122 * kHz,
    omega_m=4393 * MHz, omega_c=TWO_PI * 192.2e12, delta=4217 * MHz)

# Five waveguide modes roughly one free spectral range apart.
offsets = np.array([-3.3, -1.6, 0.63, 2.2, 3.9]) * MHz
wg = core.WaveguideModeSet(sys.omega_m + offsets,
                           np.array([280, 340, 310, 250, 370]) * kHz,
                           np.array([21, 24, 22, 19, 23]) * kHz)

# Input powers to intracavity photon numbers.
powers = np.array([43, 80, 130, 190, 254]) * 1e-6
n_cs = core.intracavity_photons(powers, sys)
print("photon numbers:", np.round(n_cs).astype(int))

# A coarse broadband sweep pins the cavity; a dense window resolves the modes.
omega = np.unique(np.concatenate([TWO_PI * np.linspace(3.0e9, 5.8e9, 240),
                                  sys.omega_m + np.linspace(-6, 6, 1500) * MHz]))
rng = np.random.default_rng(1)
data = [fitting.CoherentDataset(n, omega, fitting.model_phase(sys, wg, n, omega)
                                + 5e-3 * rng.standard_normal(omega.size)) for n in n_cs]

# Start from deliberately wrong values, as one would from a rough by-eye guess.
seed_sys = replace(sys, gamma_i=1.15 * sys.gamma_i, g0=0.93 * sys.g0,
                   kappa_e=0.9 * sys.kappa_e, delta=sys.delta + 15 * MHz,
                   omega_m=sys.omega_m + 50 * kHz)
seed_wg = core.WaveguideModeSet(wg.omega_k + 40 * kHz, np.full(5, 300 * kHz),
                                np.full(5, 25 * kHz))
res = fitting.fit_coherent(data, fitting.FitResult.seed(seed_sys, seed_wg, len(data)))

print(f"converged: {res.converged}, cost {res.cost_trace[0]:.3g} -> {res.cost:.3g} rad^2")
print(" mode   offset (MHz)    f/2pi (kHz) true/fit    gamma_i/2pi (kHz) true/fit")
for k in range(len(wg)):
    print(f"  {k}    {(res.wg.omega_k[k] - sys.omega_m) / MHz:+7.3f}      "
          f"{wg.f_k[k] / kHz:6.1f} / {res.wg.f_k[k] / kHz:6.1f}        "
          f"{wg.gamma_k_i[k] / kHz:5.1f} / {res.wg.gamma_k_i[k] / kHz:5.1f}")
print(f"g0/2pi: {sys.g0 / kHz:.1f} true, {res.sys.g0 / kHz:.1f} fit "
      f"(+/- {res.uncertainties.get('g0', float('nan')) / kHz:.2f}) kHz")
