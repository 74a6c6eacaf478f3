import sys
import time

import numpy as np
import pytest

from combwg.bloch import SolverSettings, edge_band, fourier_for, mode_at_frequency, mode_field
from combwg.geometry import GeometryParams

# period (nm) that puts n_g = 50 of the flat band at 780 nm, from optimizer.tune_period
TUNED_PERIOD = 266.1666


def quartic_params(a: float = 1.0) -> GeometryParams:
    return GeometryParams.from_reduced(H=2.0, w=0.372, etch_fraction=0.8, a=a)


def symmetric_params(a: float = 1.0) -> GeometryParams:
    return GeometryParams.from_reduced(H=2.0, w=0.5, etch_fraction=0.25, kind="rectangular-symmetric", a=a)


@pytest.fixture(scope="session")
def settings():
    return SolverSettings()


# wall-clock seconds spent building each session band
BUILD_SECONDS: dict[str, float] = {}


def _timed(name, build):
    t = time.perf_counter()
    out = build()
    BUILD_SECONDS[name] = time.perf_counter() - t
    return out


@pytest.fixture(scope="session")
def quartic_band(settings):
    """Flat band of the asymmetric comb sampled towards the zone edge."""
    return _timed("quartic", lambda: edge_band(fourier_for(quartic_params(), settings), 1, settings))


@pytest.fixture(scope="session")
def symmetric_red_band(settings):
    """Lowest antisymmetric band of the symmetric comb (third band at k = π/a)."""
    return _timed("symmetric", lambda: edge_band(fourier_for(symmetric_params(), settings), 2, settings))


@pytest.fixture(scope="session")
def tuned_eps(settings):
    return fourier_for(quartic_params(TUNED_PERIOD), settings)


@pytest.fixture(scope="session")
def slow_mode(tuned_eps):
    return mode_at_frequency(tuned_eps, 1, TUNED_PERIOD / 780.0, k_bracket=(0.4, 0.5))


@pytest.fixture(scope="session")
def slow_field(slow_mode):
    return mode_field(slow_mode, grid=32)


@pytest.fixture(scope="session")
def trap_modes(tuned_eps):
    red = mode_at_frequency(tuned_eps, 1, TUNED_PERIOD / 837.0, k_bracket=(0.3, 0.45))
    blue = mode_at_frequency(tuned_eps, 2, TUNED_PERIOD / 719.4, k_bracket=(0.43, 0.5))
    return red, blue


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    lines = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
