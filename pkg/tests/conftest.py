import numpy as np
import pytest

from blastnull.channel import LevelSpec, calibrate_levels, geometric_channel
from blastnull.signalmodel import generate_lfm, spectrum_of

# Acceptance tests append one verdict line each; printed after the run so
# they survive output capture.
ACCEPTANCE_VERDICTS: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)

# Desk-scale reference setup shared across the suite: an 0.08 s LFM at
# 2 kHz / 200 Hz bandwidth sampled at 10 kHz, analyzed in a 1024-point
# frame, through a 3+3 path channel whose scattered group sits well
# outside the correlation main lobe of the direct one.
DESK = dict(duration=0.08, center_frequency=2000.0, bandwidth=200.0, fs=10000.0)
DESK_FFT = 1024
DESK_CHANNEL = dict(n_paths=3, delay_spread=0.01, scattered_lag=0.025)


@pytest.fixture(scope="session")
def desk_wave():
    return generate_lfm(**DESK)


@pytest.fixture(scope="session")
def desk_spectrum(desk_wave):
    return spectrum_of(desk_wave, DESK_FFT)


@pytest.fixture(scope="session")
def desk_channel(desk_spectrum):
    """(direct, scattered, sigma2) calibrated to SNR 0 dB / SDR -15 dB."""
    direct, scattered = geometric_channel(**DESK_CHANNEL)
    return calibrate_levels(desk_spectrum, direct, scattered, LevelSpec(0.0, -15.0))


@pytest.fixture(scope="session")
def small_spectrum():
    """A short wideband pulse in a 256-point frame, for cheap dense tests."""
    return spectrum_of(generate_lfm(0.02, 2000.0, 400.0, 10000.0), 256)


def random_steering_like(rng, n, m):
    """Synthetic full-rank column stack with unit-modulus rows, as a stand-in
    steering matrix for pure linear-algebra tests."""
    phases = rng.uniform(0, 2 * np.pi, size=(n, m))
    cols = np.exp(1j * phases) * (0.5 + rng.random((n, m)))
    return cols
