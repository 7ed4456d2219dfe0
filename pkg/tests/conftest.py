import os
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from heightlab.elliptic_core import CurvePoint, WeierstrassCurve
from heightlab.exact_arith import RatFunc
from heightlab.function_field import Section
from heightlab.lab.fixtures import legendre, section_fixture

settings.register_profile("heightlab", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "heightlab"))


@pytest.fixture(scope="session")
def E37():
    return WeierstrassCurve.rational([0, 0, 1, -1, 0])


@pytest.fixture(scope="session")
def P37():
    return CurvePoint(Fraction(0), Fraction(0))


@pytest.fixture(scope="session")
def Ex3():
    """y^2 = x^3 + 1, torsion Z/6 generated by (2, 3)."""
    return WeierstrassCurve.rational([0, 0, 0, 0, 1])


@pytest.fixture(scope="session")
def L():
    return legendre()


@pytest.fixture(scope="session")
def P2(L):
    return Section(L, RatFunc.const(2), None, "P2")


@pytest.fixture(scope="session")
def P3(L):
    return Section(L, RatFunc.const(3), None, "P3")


@pytest.fixture(scope="session")
def x2():
    return section_fixture("legendre-x2")


@pytest.fixture(scope="session")
def rank2():
    return section_fixture("legendre-rank2")


# acceptance summary: one line per criterion, printed after the run -------------------

ACCEPTANCE_RESULTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        name, ok, elapsed, budget, detail = ACCEPTANCE_RESULTS[n]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(
            f"criterion {n:2d} {status}  {name}  ({elapsed:.1f} s, budget {budget:.0f} s)  {detail}")
