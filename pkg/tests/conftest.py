import numpy as np
import pytest

from eulerloop.splatting import FeatureMap

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def textured():
    def make(width, height, seed=0, channels=3):
        r = np.random.default_rng(seed)
        base = r.random((height, width, channels))
        ys, xs = np.mgrid[0:height, 0:width]
        ramp = (np.sin(xs / 5.0) * np.cos(ys / 7.0))[..., None]
        return FeatureMap(np.clip(0.5 * base + 0.25 + 0.25 * ramp, 0, 1))

    return make


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
