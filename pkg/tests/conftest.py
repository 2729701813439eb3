import numpy as np
import pytest

from invgeo import FlatTorus, Sphere

_CRITERIA = {}


def record_criterion(number, title, ok, detail=""):
    """Remember one acceptance line for the terminal summary."""
    _CRITERIA[number] = (title, bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[number]
        tail = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}{tail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def torus():
    return FlatTorus(2)


@pytest.fixture
def sphere():
    return Sphere(2)
