import sys

import numpy as np
import pytest

from fluxct.enhance import enhance_pipeline
from fluxct.physics import build_phantom, kramers_spectrum, water_table
from fluxct.projector import parallel_geometry, poly_projection
from fluxct.recon import inverse_radon
from fluxct.spectrum_quant import assign_weights, paper_interval_set


@pytest.fixture(scope="session")
def water():
    return water_table()


@pytest.fixture(scope="session")
def small_phantom():
    return build_phantom(64, 12.0)


@pytest.fixture(scope="session")
def poly_stack_128(water):
    """Enhanced stack from a 128^2, 180-angle polychromatic acquisition."""
    phantom = build_phantom(128, 12.0)
    geom = parallel_geometry(phantom, n_angles=180, angle_step=1.0)
    spectrum = kramers_spectrum(140.0, prefilter_water_cm=15.0)
    pam = inverse_radon(poly_projection(phantom, geom, spectrum))
    ivs = assign_weights(paper_interval_set(), spectrum)
    return phantom, spectrum, pam, enhance_pipeline(pam, ivs, water)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
