import numpy as np
import pytest

from magnuslie.matpoly import MatPoly


def random_affine(rng, n=3, lo=-3, hi=3):
    """``A(t) = a + t b`` with integer ``a``, ``b`` that do not commute."""
    while True:
        a = rng.integers(lo, hi + 1, (n, n))
        b = rng.integers(lo, hi + 1, (n, n))
        if np.any(a @ b - b @ a):
            return MatPoly([a.tolist(), b.tolist()])


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
