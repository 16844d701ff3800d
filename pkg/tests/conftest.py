import numpy as np
import pytest

from saliency_fusion.grid import SceneGeometry

# criterion number -> (status, detail), filled by test_acceptance
ACCEPTANCE = {}


@pytest.fixture
def small_geom():
    return SceneGeometry(160, 128, 28.0, 22.5, 25.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status} - {detail}")
