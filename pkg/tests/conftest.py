import numpy as np
import pytest
from hypothesis import strategies as st

from qcausal.machines import UnifilarMachine

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@st.composite
def random_machines(draw, max_states=4, max_symbols=3):
    """Strongly connected unifilar machines with strictly positive stationary weights.

    Symbol 0 of state i always leads to state i+1 (mod n), which keeps the
    chain irreducible; other edges and their weights are random.
    """
    n = draw(st.integers(1, max_states))
    k = draw(st.integers(2, max_symbols))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    emission = np.zeros((n, k))
    successor = -np.ones((n, k), dtype=np.int64)
    for i in range(n):
        used = rng.random(k) < 0.7
        used[0] = True
        w = rng.uniform(0.05, 1.0, size=k) * used
        emission[i] = w / w.sum()
        successor[i, 0] = (i + 1) % n
        for x in range(1, k):
            if used[x]:
                successor[i, x] = rng.integers(n)
    return UnifilarMachine([str(x) for x in range(k)], [f"q{i}" for i in range(n)], emission, successor)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
