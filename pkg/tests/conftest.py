import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from simplex_slice.core import normalize_direction

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def directions(draw, n_min=1, n_max=8):
    """Directions drawn from seeded Gaussian vectors (rejecting near-constant ones)."""
    n = draw(st.integers(n_min, n_max))
    seed = draw(st.integers(0, 2**32 - 1))
    raw = np.random.default_rng(seed).standard_normal(n + 1)
    return normalize_direction(raw)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    """Collects the one-line PASS/FAIL verdict of each acceptance criterion."""
    def log(k, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
