"""Simulation, fitting and analysis of an optomechanically read-out phononic waveguide.

Frequencies and rates are angular (rad/s) inside the library; configuration
files and written outputs use Hz.
"""

__version__ = "0.1.0"

from .core import (TWO_PI, BathOccupancies, DriveCondition, GridTruncationWarning,
                   LocalizedTransducer, ModelError, SpectrumGrid, SpectrumKind,
                   WaveguideModeSet, build_dynamical_matrix, default_grid, internal_mode_spectra,
                   intracavity_photons, io_green_function, occupancy_from_spectrum,
                   reflection_coefficient, s21, thermal_output_spectrum)
from .modal import (MatchingError, ModeRecord, ModeReport, PropagationMetrics,
                    adiabatic_cooling, cooperativity, cooperativity_sweep, coupling_from_fsr,
                    eigen_report, propagation_metrics, weak_coupling_cooling)
from .disorder import (DisorderChain, EnsembleStats, chain_eigenmodes, clean_spectrum,
                       dephasing_fidelity, ensemble_stats, l3db_from_sigma, sample_chain,
                       tb_thermal_spectrum)
from .fitting import (CoherentDataset, FitOptions, FitResult, fit_coherent, fit_cost,
                      model_phase, seed_mode_frequencies)
from .thermometry import (CalibrationChain, build_noise_basis, gain_from_two_tone,
                          heating_rates, normalize_psd, phonon_occupancy_from_power,
                          solve_bath_occupancies)

__all__ = [name for name in dir() if not name.startswith("_")]
