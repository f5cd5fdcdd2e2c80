import numpy as np
import pytest

from nlkg_lab.grid_spectral import Grid1D, Potential, assemble_operator, spectral_decompose


def make_spectrum(L, N, m, preset="poschl_teller", **params):
    g = Grid1D(L, N)
    pot = Potential.preset(g, preset, **params)
    return spectral_decompose(assemble_operator(g, pot, m))


@pytest.fixture(scope="session")
def pt_small():
    """One bound state (omega = 0.75), coarse grid for fast checks."""
    return make_spectrum(20.0, 256, 1.25, depth=2.0)


@pytest.fixture(scope="session")
def pt_single():
    return make_spectrum(40.0, 2048, 1.25, depth=2.0)


@pytest.fixture(scope="session")
def pt_slow():
    """omega = 0.4 (first resonance at 3 omega = 1.2)."""
    return make_spectrum(40.0, 1024, np.sqrt(1.16), depth=2.0)


@pytest.fixture(scope="session")
def free_fine():
    return make_spectrum(40.0, 2048, 1.0, preset="zero")


@pytest.fixture(scope="session")
def free_small():
    return make_spectrum(20.0, 256, 1.0, preset="zero")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
