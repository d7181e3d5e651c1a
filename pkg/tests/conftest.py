import math

import numpy as np
import pytest

from lindley_alt import dists
from lindley_alt.dists import KernelDecomposition
from lindley_alt.symfun import ExpPolyTrigFun

E = ExpPolyTrigFun.term


def osc_tail() -> ExpPolyTrigFun:
    """e^{-x}(2 + sin x + cos x)/3."""
    return E(2 / 3, 0, -1.0) + E(1 / 3, 0, -1.0, "sin", 1.0) + E(1 / 3, 0, -1.0, "cos", 1.0)


def five_pair_decomposition() -> KernelDecomposition:
    g = (
        E(2 / 3, 0, -1.0),
        E(1.0, 0, -1.0, "sin", 1.0),
        E(1 / 3, 0, -1.0, "cos", 1.0),
        E(1.0, 0, -1.0, "cos", 1.0),
        E(1.0, 0, -1.0, "sin", 1.0),
    )
    h = (
        E(1.0, 0, -1.0),
        E(1 / 3, 0, -1.0, "cos", 1.0),
        E(1.0, 0, -1.0, "sin", 1.0),
        E(1 / 3, 0, -1.0, "cos", 1.0),
        E(-1 / 3, 0, -1.0, "sin", 1.0),
    )
    return KernelDecomposition(g, h)


def _den(mu):
    return 10800 + 27000 * mu + 22353 * mu**2 + 7940 * mu**3


def reference_constants(mu: float) -> tuple[float, np.ndarray]:
    """pi0 and c_1..c_5 as rational functions of mu for the oscillating tail."""
    d = _den(mu)
    pi0 = (10800 + 16200 * mu + 9753 * mu**2 + 2542 * mu**3) / d
    c1 = (5760 * mu + 6612 * mu**2 + 2663 * mu**3) / d
    c24 = (4680 * mu + 5301 * mu**2 + 2066 * mu**3) / (3 * d)
    c3 = (2340 * mu + 2778 * mu**2 + 1176 * mu**3) / d
    return pi0, np.array([c1, c24, c3, c24, -c3 / 3])


def reference_cdf(mu: float, x):
    x = np.asarray(x, dtype=float)
    poly = (
        5 * (720 + 744 * mu + 347 * mu**2)
        + 4 * (450 + 645 * mu + 241 * mu**2) * np.cos(x)
        + 2 * mu * (255 + 286 * mu) * np.sin(x)
    )
    return 1.0 - 2 * mu * np.exp(-x) / _den(mu) * poly


@pytest.fixture
def b_osc():
    return dists.ExpPolyTrigTail(osc_tail())


@pytest.fixture
def a_mu2():
    return dists.Exponential(2.0)


@pytest.fixture
def dec5():
    return five_pair_decomposition()


P_X_POS_MU2 = 32 / 45
PI0_MU2 = 102548 / 217732

assert math.isclose(reference_constants(2.0)[0], PI0_MU2, rel_tol=1e-15)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, passed: bool, detail: str, seconds: float) -> bool:
    line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail} [{seconds:.2f} s]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
