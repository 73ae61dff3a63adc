"""Unit tests for certified real root isolation."""
import math
import random
import pytest
from fractions import Fraction

from src.interval import Interval
from src.polycore import MultiPoly, VarSet, parse_poly
from src.realroots import (PositiveDimensionalError, RootIsolationError, compare, count_roots,
                           isolate, isolate_mixed, period_images, reduce_on_circle, refine,
                           refine_mixed,
                           sign_at, solve_circle_system, split_on_circle, squarefree, sturm_sequence)

X = VarSet(('x',))
SC = VarSet(('sin_t', 'cos_t'))
SCT = VarSet(('sin_t', 'cos_t', 't'))


def px(text):
    return parse_poly(text, X)


def test_SGT_F_007_isolate_simple_roots():
    """Test isolating intervals of x^3 - 2x (SGT-F-007)."""
    roots = isolate(px("x^3 - 2*x"))
    assert len(roots) == 3
    assert roots[1].is_exact() and roots[1].lo == 0
    for r, expected in zip(roots, (-math.sqrt(2), 0.0, math.sqrt(2))):
        assert r.lo <= Fraction(expected) <= r.hi or abs(float(r) - expected) < 1e-12
    for a, b in zip(roots, roots[1:]):
        assert a.hi < b.lo


def test_SGT_F_007_multiplicities_and_ranges():
    """Test square-free decomposition and range restriction (SGT-F-007)."""
    p = px("(x - 1)^3*(x + 2)*(x^2 + 1)")
    factors = dict((k, f) for f, k in squarefree(p))
    assert factors[3] == px("x - 1")
    roots = isolate(p)
    assert [r.multiplicity for r in roots] == [1, 3]
    assert compare(roots[0], -2) == 0 and compare(roots[1], 1) == 0
    assert len(isolate(p, Fraction(0), Fraction(5))) == 1
    assert isolate(px("x^2 + 1")) == []
    assert isolate(px("3")) == []
    with pytest.raises(RootIsolationError):
        isolate(parse_poly("x*y", VarSet(('x', 'y'))))


def test_SGT_F_007_closed_range_endpoints():
    """Test roots exactly at the range endpoints are kept (SGT-F-007)."""
    roots = isolate(px("x^2 - 1"), Fraction(-1), Fraction(1))
    assert [(r.lo, r.hi) for r in roots] == [(-1, -1), (1, 1)]
    cubic = isolate(px("x^3 - 3*x"), Fraction(0), Fraction(2))
    assert len(cubic) == 2
    assert cubic[0].lo == 0


def test_SGT_F_007_sturm_count_matches_constructed_roots():
    """Test Sturm counts against polynomials built from known rational roots (SGT-F-007)."""
    rng = random.Random(20240601)
    for _ in range(200):
        n = rng.randint(1, 5)
        roots = set()
        while len(roots) < n:
            roots.add(Fraction(rng.randint(-40, 40), rng.randint(1, 9)))
        p = MultiPoly.const(X, 1)
        for r in roots:
            p = p * (MultiPoly.var(X, 'x') - r)
        p = p * (MultiPoly.var(X, 'x', 2) + rng.randint(1, 5))
        found = isolate(p)
        assert len(found) == n
        for r in found:
            assert sum(1 for q in roots if r.lo <= q <= r.hi) == 1
        dense = [int(c) for c in reversed(p.primitive().to_univariate('x'))]
        assert count_roots(sturm_sequence(dense), Fraction(-100), Fraction(100)) == n


def test_SGT_F_007_repeated_factors_are_disjoint():
    """Test roots of different square-free factors get disjoint intervals (SGT-F-007)."""
    p = px("(x^2 - 2)*(x^2 - 3)^2")
    roots = isolate(p)
    assert [r.multiplicity for r in roots] == [2, 1, 1, 2]
    for a, b in zip(roots, roots[1:]):
        assert a.hi < b.lo
    assert roots[0].polynomial == px("x^2 - 3") and roots[1].polynomial == px("x^2 - 2")
    for r, expected in zip(roots, (-math.sqrt(3), -math.sqrt(2), math.sqrt(2), math.sqrt(3))):
        assert abs(float(refine(r, Fraction(1, 10 ** 12))) - expected) < 1e-11
    mixed = isolate(px("(x - 1)^2*(x - 2)*(3*x - 4)"))
    assert [(r.lo, r.multiplicity) for r in mixed] == [(1, 2), (Fraction(4, 3), 1), (2, 1)]
    assert all(r.is_exact() for r in mixed)


def test_SGT_F_008_refine_compare_sign():
    """Test refinement, comparison and exact signs at algebraic numbers (SGT-F-008)."""
    sqrt2 = isolate(px("x^2 - 2"), Fraction(0))[0]
    fine = refine(sqrt2, Fraction(1, 10 ** 20))
    assert fine.width <= Fraction(1, 10 ** 20)
    assert abs(float(fine) - math.sqrt(2)) < 1e-15
    assert compare(sqrt2, Fraction(141, 100)) == 1
    assert compare(sqrt2, Fraction(142, 100)) == -1
    two = isolate(px("x - 2"))[0]
    assert compare(two, 2) == 0
    assert sign_at(px("x^4 - 4"), sqrt2) == 0
    assert sign_at(px("x - 3/2"), sqrt2) == -1
    assert sign_at(px("7"), sqrt2) == 1
    with pytest.raises(RootIsolationError):
        refine(sqrt2, Fraction(0))


def test_SGT_F_009_circle_reduction():
    """Test the canonical form modulo sin^2 + cos^2 - 1 (SGT-F-009)."""
    p = parse_poly("sin_t^3 + sin_t^2*cos_t", SC)
    a, b = split_on_circle(p, 'sin_t', 'cos_t')
    assert a == parse_poly("cos_t - cos_t^3", SC)
    assert b == parse_poly("1 - cos_t^2", SC)
    assert reduce_on_circle(p, 'sin_t', 'cos_t') == a + b * MultiPoly.var(SC, 'sin_t')


def test_SGT_F_009_circle_system_solutions():
    """Test certified points of a curve on the unit circle (SGT-F-009)."""
    roots = solve_circle_system([parse_poly("2*sin_t - 1", SC)])
    assert len(roots) == 2
    assert [round(r.t, 9) for r in roots] == [round(math.pi / 6, 9), round(5 * math.pi / 6, 9)]
    assert roots[0].sin_val.interval.contains(Fraction(1, 2))

    diag = solve_circle_system([parse_poly("sin_t - cos_t", SC)])
    assert [round(r.t, 9) for r in diag] == [round(-3 * math.pi / 4, 9), round(math.pi / 4, 9)]
    for r in diag:
        s, c = r.refine(Fraction(1, 10 ** 15)).box()
        assert s.intersect(c) is not None

    axis = solve_circle_system([parse_poly("sin_t", SC)])
    assert [r.t for r in axis] == [0.0, pytest.approx(math.pi)]
    assert axis[1].t_interval.width < Fraction(1, 10 ** 25)


def test_SGT_F_009_circle_solutions_meet_requested_width():
    """Test circle solutions are refined to the requested t width (SGT-F-009)."""
    width = Fraction(1, 10 ** 12)
    roots = solve_circle_system([parse_poly("2*sin_t - 1", SC)], width=width)
    assert [r.t_interval.width <= width for r in roots] == [True, True]
    for r, expected in zip(roots, (math.pi / 6, 5 * math.pi / 6)):
        assert abs(r.t - expected) < 1e-11
        assert compare(r.sin_val, Fraction(1, 2)) == 0
    coarse = solve_circle_system([parse_poly("2*sin_t - 1", SC)], width=Fraction(1, 10))
    assert all(r.t_interval.width <= Fraction(1, 10) for r in coarse)
    tight = solve_circle_system([parse_poly("5*sin_t - 3", SC)])
    assert [(compare(r.sin_val, Fraction(3, 5)), compare(r.cos_val, Fraction(4, 5)),
             compare(r.cos_val, Fraction(-4, 5))) for r in tight] == [(0, 0, 1), (0, -1, 0)]
    assert all(r.t_interval.width <= width for r in tight)


def test_SGT_F_009_circle_system_degenerate_inputs():
    """Test empty and positive-dimensional circle systems (SGT-F-009)."""
    assert solve_circle_system([parse_poly("cos_t - 2", SC)]) == []
    with pytest.raises(PositiveDimensionalError):
        solve_circle_system([parse_poly("sin_t^2 + cos_t^2 - 1", SC)])
    with pytest.raises(RootIsolationError):
        solve_circle_system([parse_poly("sin_t - cos_t", SCT) + MultiPoly.var(SCT, 't')])


def test_SGT_F_010_mixed_roots():
    """Test isolation of roots of functions of sin t, cos t and t (SGT-F-010)."""
    p = parse_poly("t - 4*sin_t", SCT)
    roots = isolate_mixed(p, Interval(Fraction(1, 2), 4))
    assert len(roots) == 1
    fine = refine_mixed(roots[0], p, Fraction(1, 10 ** 12))
    assert abs(fine.t - 4 * math.sin(fine.t)) < 1e-9
    assert 2.47 < fine.t < 2.48

    quad = parse_poly("t^2 - 100", SCT)
    exact = isolate_mixed(quad, Interval(0, 20))
    assert len(exact) == 1 and exact[0].t_interval == Interval(10)

    with pytest.raises(PositiveDimensionalError):
        isolate_mixed(MultiPoly.zero(SCT), Interval(0, 1))


def test_SGT_F_010_period_images():
    """Test translation of circle angles into a wider time domain (SGT-F-010)."""
    images = period_images(Interval(Fraction(1, 2), Fraction(51, 100)), Interval(0, 20))
    assert [k for k, _ in images] == [0, 1, 2, 3]
    assert all(Interval(0, 20).contains(iv) for _, iv in images)
    with pytest.raises(RootIsolationError):
        period_images(Interval(Fraction(-1, 100), Fraction(1, 100)), Interval(0, 20))
