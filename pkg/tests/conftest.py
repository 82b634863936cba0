import numpy as np
import pytest

from phononwire.core import TWO_PI, LocalizedTransducer, WaveguideModeSet

MHz = TWO_PI * 1e6
kHz = TWO_PI * 1e3

# Acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def fitted_device(**kw):
    """Transducer with the fitted device parameters (Delta is the fitted mean)."""
    p = dict(kappa=1e3 * MHz, kappa_e=200 * MHz, g0=690 * kHz, gamma_i=122 * kHz,
             omega_m=4393 * MHz, omega_c=TWO_PI * 192.2e12, delta=4217 * MHz)
    p.update(kw)
    return LocalizedTransducer.from_total(**p)


@pytest.fixture
def device():
    return fitted_device()


@pytest.fixture
def modes(device):
    off = np.array([-3.3, -1.6, 0.63, 2.2, 3.9]) * MHz
    return WaveguideModeSet(device.omega_m + off, np.array([280, 340, 310, 250, 370]) * kHz,
                            np.array([21, 24, 22, 19, 23]) * kHz)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
