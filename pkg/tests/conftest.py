import numpy as np
import pytest
from hypothesis import strategies as st

from g2lab.homogeneous import MILNOR_PRESETS, ModelAlgebra


def random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def random_frame(rng, spread: float = 0.5) -> np.ndarray:
    """Well-conditioned frame R1 diag(exp u) R2 with det > 0."""
    d = np.exp(rng.uniform(-spread, spread, 3))
    return random_rotation(rng) @ np.diag(d) @ random_rotation(rng)


def random_gl6(rng, scale: float = 0.3) -> np.ndarray:
    g = np.eye(6) + scale * rng.normal(size=(6, 6))
    if np.linalg.det(g) < 0:
        g[0] *= -1
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=sorted(MILNOR_PRESETS))
def preset(request):
    return ModelAlgebra.preset(request.param)


seeds = st.integers(min_value=0, max_value=2**32 - 1)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
