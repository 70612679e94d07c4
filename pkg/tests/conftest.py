import math

import pytest

from warpstrings import FiberModel, WarpedMetric

G1 = "x^2+1"
G0 = "exp(x)"
DOUBLE_WELL = "(x^2-1)^2+1/2"

# criterion -> list of (check, passed, detail), filled by test_acceptance.py
_ACCEPTANCE = {}


def record_acceptance(criterion: str, check: str, passed: bool, detail: str = "") -> None:
    _ACCEPTANCE.setdefault(criterion, []).append((check, passed, detail))


@pytest.fixture
def acceptance():
    return record_acceptance


@pytest.fixture(scope="session")
def g1():
    return WarpedMetric.from_text(G1)


@pytest.fixture(scope="session")
def g0():
    return WarpedMetric.from_text(G0)


@pytest.fixture(scope="session")
def double_well():
    return WarpedMetric.from_text(DOUBLE_WELL)


@pytest.fixture(scope="session")
def flat():
    return WarpedMetric.from_text("1")


@pytest.fixture(scope="session")
def hyperbolic_fiber():
    return FiberModel.geodesic(2 * math.pi, 1, -1.0)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_ACCEPTANCE, key=lambda c: int(c.split()[0])):
        checks = _ACCEPTANCE[criterion]
        failed = [f"{c}: {d}" for c, ok, d in checks if not ok]
        mark = "FAIL" if failed else "PASS"
        note = "; ".join(failed) if failed else f"{len(checks)} checks"
        terminalreporter.write_line(f"{mark}  {criterion}  ({note})")
