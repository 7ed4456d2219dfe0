import math
from fractions import Fraction

import flint
import pytest
from hypothesis import given, strategies as st

from heightlab.algebraic import (AlgebraicNumber, alg_combine, alg_sqrt, weil_height_algebraic)
from heightlab.exact_arith import IntPoly, weil_height_rational

A = AlgebraicNumber.from_rational
sqrt2 = AlgebraicNumber.root_of(IntPoly([-2, 0, 1]), 1.4)
sqrt3 = AlgebraicNumber.root_of(IntPoly([-3, 0, 1]), 1.7)


def test_combine_examples():
    assert alg_combine("add", sqrt2, -sqrt2).is_zero()
    assert alg_combine("mul", sqrt2, sqrt2) == A(2)
    s = alg_combine("add", sqrt2, sqrt3)
    assert list(s.minpoly.coeffs()) == [1, 0, -10, 0, 1]
    assert abs(complex(s) - (math.sqrt(2) + math.sqrt(3))) < 1e-12
    assert abs(complex(s) - 3.1463) < 1e-4


def test_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        alg_combine("div", sqrt2, A(0))


def test_sqrt_examples():
    assert alg_sqrt(A(4), 1.0) == A(2)
    r = alg_sqrt(A(-4), 1j)
    assert r.minpoly == IntPoly([4, 0, 1]) and r.imag > 0
    assert abs(complex(alg_sqrt(A(-4), 1j)) - 2j) < 1e-15
    r = alg_sqrt(A(2))
    assert r == sqrt2 and abs(float(r) - 1.41421356) < 1e-8
    assert alg_sqrt(A(0)).is_zero()


def test_sqrt_ambiguous_hint():
    with pytest.raises(ValueError, match="ambiguous"):
        alg_sqrt(A(4), (0, 5.0))


def test_sqrt_of_algebraic():
    a = sqrt2 + 1
    r = alg_sqrt(a, 1.5)
    assert r * r == a


def test_weil_height_examples():
    assert weil_height_algebraic(A(Fraction(3, 2))) == pytest.approx(math.log(3), abs=1e-12)
    assert weil_height_algebraic(sqrt2) == pytest.approx(0.5 * math.log(2), abs=1e-12)
    assert weil_height_algebraic(A(0)) == 0


@given(st.fractions(max_denominator=10 ** 4))
def test_height_matches_rational(q):
    assert weil_height_algebraic(A(q)) == pytest.approx(weil_height_rational(q), abs=1e-12)


quadratics = st.tuples(st.integers(-6, 6), st.integers(1, 4), st.integers(2, 30)) \
    .filter(lambda abd: math.isqrt(abd[2]) ** 2 != abd[2])


def _quad(a, b, d):
    """(a + sqrt d) / b."""
    r = AlgebraicNumber.root_of(IntPoly([-d, 0, 1]), math.sqrt(d))
    return (r + a) / b


@given(quadratics, st.sampled_from([2, 3]))
def test_height_of_powers(abd, n):
    x = _quad(*abd)
    assert weil_height_algebraic(x ** n) == pytest.approx(n * weil_height_algebraic(x), abs=1e-10)


@given(quadratics)
def test_height_reciprocal(abd):
    x = _quad(*abd)
    assert weil_height_algebraic(1 / x) == pytest.approx(weil_height_algebraic(x), abs=1e-10)


@given(quadratics, quadratics, st.sampled_from(["add", "sub", "mul", "div"]))
def test_combine_matches_ball_arithmetic(p, q, op):
    a, b = _quad(*p), _quad(*q)
    c = alg_combine(op, a, b)
    prec = 256
    with flint.ctx.workprec(prec):
        x, y = a.enclosure(prec), b.enclosure(prec)
        ref = {"add": x + y, "sub": x - y, "mul": x * y, "div": x / y}[op]
        assert ref.overlaps(c.enclosure(prec))


def test_json_roundtrip():
    s = sqrt2 + sqrt3
    assert AlgebraicNumber.from_json(s.to_json()) == s
    assert AlgebraicNumber.from_json(A(Fraction(-5, 7)).to_json()) == A(Fraction(-5, 7))


def test_reducible_minpoly_rejected():
    with pytest.raises(ValueError):
        AlgebraicNumber(IntPoly([-1, 0, 1]), flint.acb(1))
