"""Sympathetic cooling of waveguide modes through the localized transducer.

The drive damps the localized mode at the optomechanical rate gamma_OM.  A
waveguide mode detuned by delta inherits part of that damping; we read it
from the eigenvalues of the dynamical matrix, compare it with the weak
coupling estimate and follow the cooperativity as the drive grows.
"""

import numpy as np

from phononwire import core, modal

TWO_PI = core.TWO_PI
MHz, kHz = TWO_PI * 1e6, TWO_PI * 1e3

sys = core.LocalizedTransducer.from_total(
    kappa=1e3 * MHz, kappa_e=200 * MHz, g0=690 * kHz, gamma_i=122 * kHz,
    omega_m=4393 * MHz, omega_c=TWO_PI * 192.2e12, delta=4217 * MHz)

# A comb of eleven modes, one of them 630 kHz above the localized resonance.
wg = core.WaveguideModeSet.comb(sys.omega_m, 11, 1.6 * MHz, 310 * kHz, 22 * kHz,
                                offset=0.63 * MHz)
k = 5

report = modal.eigen_report(sys, wg, core.DriveCondition.for_transducer(sys, 1100.0))
print("n_c = 1100")
print(f"  localized mode linewidth: {report.localized.gamma_total / kHz:8.1f} kHz")
for rec in report.waveguide:
    print(f"  {rec.label:>5}: offset {rec.omega_total / MHz:+6.2f} MHz, "
          f"gamma_S {rec.gamma_S / kHz:7.2f} kHz, C = {rec.cooperativity:5.2f}")

# Cooperativity of the near-resonant mode rises, peaks, then falls as the
# localized mode becomes too broad to exchange energy efficiently.
n_c = np.array([0, 200, 400, 800, 1100, 2000, 4000, 6000.0])
c = modal.cooperativity_sweep(sys, wg, n_c, k=k)
print("\ncooperativity of the +630 kHz mode versus drive")
for n, ck in zip(n_c, c):
    print(f"  n_c = {n:6.0f}   C = {ck:5.2f}")

# Occupancy with every bath at 87 quanta: undriven versus driven.
baths = core.BathOccupancies.uniform(87.0, len(wg))
w = core.default_grid(sys, wg, n_points=100001, half_width=40 * MHz)
for n in (0.0, 1100.0):
    drive = core.DriveCondition.for_transducer(sys, n)
    occ = core.occupancy_from_spectrum(
        core.internal_mode_spectra(sys, wg, drive, baths, w, k), edge_tol=1.0)
    print(f"occupancy of the +630 kHz mode at n_c = {n:6.0f}: {occ:5.1f}")
