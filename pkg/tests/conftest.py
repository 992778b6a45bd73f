import numpy as np
import pytest

from bope.core import RngSpec
from bope.synthetic import load_preset


@pytest.fixture
def p1():
    return load_preset("P1")


@pytest.fixture
def p2():
    return load_preset("P2")


@pytest.fixture
def p3():
    return load_preset("P3")


@pytest.fixture
def gen():
    return RngSpec(12345).generator()


def binomial_interval(n, p, z=4.0):
    """Normal-approximation interval for a binomial proportion (z standard errors)."""
    half = z * np.sqrt(p * (1 - p) / n)
    return p - half, p + half


_ACCEPTANCE = []


@pytest.fixture
def verdict():
    """Record one acceptance line; it is echoed now and again in the terminal summary."""

    def record(number, name, ok, detail):
        line = f"criterion {number} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
