"""Unit tests for rational interval arithmetic and enclosures."""
import math
import pytest
from fractions import Fraction

from src.interval import (Interval, IntervalError, atan2_enclosure, atan_enclosure, eval_poly,
                          pi_enclosure, sin_cos_enclosure, sqrt_enclosure)
from src.polycore import VarSet, parse_poly


def test_SGT_F_006_arithmetic():
    """Test exact interval operations and sign queries (SGT-F-006)."""
    a = Interval(1, 2)
    b = Interval(-3, 1)
    assert a + b == Interval(-2, 3)
    assert a - b == Interval(0, 5)
    assert a * b == Interval(-6, 2)
    assert b ** 2 == Interval(0, 9)
    assert (-a) ** 3 == Interval(-8, -1)
    assert a / Interval(2, 4) == Interval(Fraction(1, 4), 1)
    assert a.sign() == 1
    assert b.sign() is None
    assert Interval(0).sign() == 0
    assert a.intersect(Interval(3, 4)) is None
    assert a.hull(Interval(3, 4)) == Interval(1, 4)
    with pytest.raises(IntervalError):
        a / b
    with pytest.raises(IntervalError):
        Interval(2, 1)


def test_SGT_F_006_round_out_contains_original():
    """Test outward rounding never loses points (SGT-F-006)."""
    x = Interval(Fraction(1, 3), Fraction(2, 3))
    r = x.round_out(10)
    assert r.contains(x)
    assert r.lo.denominator <= 1024 and r.hi.denominator <= 1024
    assert x.round_out(None) is x


def test_SGT_F_006_sqrt_enclosure():
    """Test square-root enclosures (SGT-F-006)."""
    r = sqrt_enclosure(Interval(2), bits=40)
    assert r.lo ** 2 <= 2 <= r.hi ** 2
    assert r.width < Fraction(1, 2 ** 38)
    assert sqrt_enclosure(Interval(Fraction(9, 4)), bits=8) == Interval(Fraction(3, 2))
    assert sqrt_enclosure(Interval(-1, 4), clip=True).lo == 0
    with pytest.raises(IntervalError):
        sqrt_enclosure(Interval(-1, 4))


def test_SGT_F_006_pi_and_trig_enclosures():
    """Test pi, sin and cos enclosures against float values (SGT-F-006)."""
    pi = pi_enclosure(96)
    assert pi.lo < Fraction(math.pi) + Fraction(1, 10 ** 15)
    assert pi.contains(Fraction(355, 113)) is False
    assert pi.width < Fraction(1, 2 ** 90)
    for t in (Fraction(0), Fraction(1, 3), Fraction(-5, 2), Fraction(7)):
        s, c = sin_cos_enclosure(Interval(t), bits=64)
        assert abs(float(s.mid) - math.sin(t)) < 1e-15
        assert abs(float(c.mid) - math.cos(t)) < 1e-15
        assert s.width < Fraction(1, 2 ** 60)
    s, c = sin_cos_enclosure(Interval(Fraction(1, 2), Fraction(3, 4)))
    assert s.contains(Fraction(math.sin(0.6))) and c.contains(Fraction(math.cos(0.6)))


def test_SGT_F_006_atan_enclosures():
    """Test rational arctangent and angle enclosures on every branch (SGT-F-006)."""
    for q in (Fraction(0), Fraction(1, 3), Fraction(3, 4), Fraction(1), Fraction(7, 2), Fraction(-5, 9)):
        a = atan_enclosure(q)
        assert abs(float(a.mid) - math.atan(q)) < 1e-15
        assert a.width < Fraction(1, 2 ** 90)
    quarter = pi_enclosure(96) * Fraction(1, 4)
    assert atan_enclosure(1).intersect(quarter) is not None
    points = [(1, 2), (3, -1), (-2, -5), (Fraction(1, 7), -1), (0, -3), (-4, 0)]
    for y, x in points:
        angle = atan2_enclosure(y, x)
        assert abs(float(angle.mid) - math.atan2(y, x)) < 1e-15
    assert atan2_enclosure(0, -1).intersect(pi_enclosure(96)) is not None
    with pytest.raises(IntervalError):
        atan2_enclosure(0, 0)


def test_SGT_F_006_eval_poly():
    """Test natural interval extension of polynomials (SGT-F-006)."""
    xy = VarSet(('x', 'y'))
    p = parse_poly("x^2 - 2*x*y + 1/2", xy)
    value = eval_poly(p, {'x': Interval(3), 'y': Interval(1)})
    assert value == Interval(Fraction(7, 2))
    wide = eval_poly(p, {'x': Interval(0, 1), 'y': Interval(0, 1)})
    assert wide.contains(Fraction(1, 2)) and wide.contains(Fraction(-1, 2))
    with pytest.raises(IntervalError, match="'y'"):
        eval_poly(p, {'x': Interval(1)})
