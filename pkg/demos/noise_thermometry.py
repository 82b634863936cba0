"""Noise thermometry: bath occupancies from a thermal sideband spectrum.

Each mechanical bath contributes |G_0j(w)|^2 n_j to the optical output PSD.
With the coupled-mode parameters known, the occupancies follow from a linear
least-squares problem whose columns are those transfer functions plus a
constant detection floor.
"""

import numpy as np

from phononwire import core, thermometry

TWO_PI = core.TWO_PI
MHz, kHz = TWO_PI * 1e6, TWO_PI * 1e3

sys = core.LocalizedTransducer.from_total(
    kappa=1e3 * MHz, kappa_e=200 * MHz, g0=690 * kHz, gamma_i=122 * kHz,
    omega_m=4393 * MHz, omega_c=TWO_PI * 192.2e12, delta=4217 * MHz)
wg = core.WaveguideModeSet.comb(sys.omega_m, 8, 1.6 * MHz, 310 * kHz, 22 * kHz,
                                offset=0.3 * MHz)
drive = core.DriveCondition.for_transducer(sys, 1100.0)
omega = sys.omega_m + np.linspace(-10, 10, 4001) * MHz

# The localized mode runs hot under the drive; the waveguide baths do not.
truth = core.BathOccupancies(140.0, np.full(len(wg), 87.0), 0.4)
psd = core.thermal_output_spectrum(sys, wg, drive, truth, omega).values
rng = np.random.default_rng(3)
measured = psd + 0.01 * psd.max() * rng.standard_normal(psd.size)

H = thermometry.build_noise_basis(sys, wg, drive, omega)
est = thermometry.solve_bath_occupancies(H, measured)
labels = thermometry.basis_labels(len(wg))
print(f"noise basis: {H.shape[0]} points x {H.shape[1]} columns, "
      f"condition number {np.linalg.cond(H):.0f}")
for lab, t, e in zip(labels, truth.as_vector(), est.as_vector()):
    print(f"  {lab:>9}: true {t:7.2f}   estimate {e:7.2f}")

# Heating: the noise input above the cryostat bath, per mode.
gammas = np.concatenate([[sys.gamma_i], wg.gamma_k_i])
noise, heating = thermometry.heating_rates(est.as_vector()[:-1], gammas, 87.0)
print(f"localized heating rate: {heating[0] / TWO_PI / 1e6:.2f} MHz (quanta per second / 2pi)")
