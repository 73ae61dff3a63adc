"""Certified real root isolation: Sturm sequences, circle systems, mixed functions of t."""
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, comb, floor, isqrt
from typing import Dict, List, Optional, Sequence, Tuple
import logging

from sympy.polys.densearith import dup_exquo, dup_mul, dup_neg, dup_prem, dup_sqr, dup_sub
from sympy.polys.densebasic import dup_strip
from sympy.polys.densetools import dup_clear_denoms, dup_compose, dup_diff, dup_primitive
from sympy.polys.domains import QQ, ZZ
from sympy.polys.euclidtools import dup_gcd
from sympy.polys.polyerrors import ExactQuotientFailed

from .config import MAX_REFINEMENTS, MIXED_MIN_WIDTH_EXPONENT, PI_BITS, ROOT_WIDTH_EXPONENT
from .interval import (Interval, IntervalError, atan2_enclosure, eval_poly, pi_enclosure,
                       sin_cos_enclosure, sqrt_enclosure)
from .polycore import MultiPoly, PolynomialError, VarSet, to_qq

logger = logging.getLogger(__name__)

# Integer coefficients, highest degree first (the sympy dense layout)
Dense = List[int]

ONE_MINUS_SQUARE = [-1, 0, 1]


class RootIsolationError(Exception):
    """Raised when roots cannot be isolated or certified."""
    pass


class PositiveDimensionalError(RootIsolationError):
    """Raised when a system expected to be zero-dimensional has infinitely many solutions."""
    pass


# Dense univariate helpers over ZZ

def _ints(p) -> Dense:
    return [int(c) for c in dup_strip(list(p))]


def _to_int(coeffs: Sequence[Fraction]) -> Dense:
    """Primitive integer polynomial from rational coefficients listed lowest degree first."""
    f = dup_strip([to_qq(Fraction(c)) for c in reversed(coeffs)])
    if not f:
        return []
    _, g = dup_clear_denoms(f, QQ, ZZ, convert=True)
    return _primitive(g)


def _primitive(p, positive_lead: bool = True) -> Dense:
    p = dup_strip(list(p))
    if not p:
        return []
    _, q = dup_primitive(p, ZZ)
    if positive_lead and q[0] < 0:
        q = dup_neg(q, ZZ)
    return _ints(q)


def _deriv(p: Dense) -> Dense:
    return _ints(dup_diff(p, 1, ZZ))


def _sub(a: Dense, b: Dense) -> Dense:
    return _ints(dup_sub(a, b, ZZ))


def _prem(a: Dense, b: Dense) -> Dense:
    """Positive multiple of the remainder of a by b."""
    if b[0] < 0:
        b = dup_neg(b, ZZ)
    return _primitive(dup_prem(a, b, ZZ), positive_lead=False)


def _gcd(a: Dense, b: Dense) -> Dense:
    g = _primitive(dup_gcd(_primitive(a), _primitive(b), ZZ))
    return g if g else [1]


def _exact_div(a: Dense, b: Dense) -> Dense:
    try:
        return _ints(dup_exquo(a, b, ZZ))
    except ExactQuotientFailed:
        raise PolynomialError("Inexact univariate division")


def _sign_at(p: Dense, x: Fraction) -> int:
    """Sign of p(x) by homogenised integer Horner evaluation."""
    n, d = x.numerator, x.denominator
    v = 0
    dp = 1
    for c in p:
        v = v * n + c * dp
        dp *= d
    return (v > 0) - (v < 0)


def _eval_interval(p: Dense, x: Interval) -> Interval:
    acc = Interval(0)
    for c in p:
        acc = acc * x + Interval(c)
    return acc


def _cauchy_bound(p: Dense) -> Fraction:
    lead = abs(p[0])
    return 1 + max((Fraction(abs(c), lead) for c in p[1:]), default=Fraction(0))


def _simplest_in(x: Fraction, y: Fraction) -> Fraction:
    """Rational with the smallest denominator in the closed interval [x, y]."""
    if x <= 0 <= y:
        return Fraction(0)
    if y < 0:
        return -_simplest_in(-y, -x)
    fl = floor(x)
    if fl == x:
        return Fraction(fl)
    if fl + 1 <= y:
        return Fraction(fl + 1)
    return fl + 1 / _simplest_in(1 / (y - fl), 1 / (x - fl))


def _split_point(a: Fraction, b: Fraction) -> Fraction:
    quarter = (b - a) / 4
    return _simplest_in(a + quarter, b - quarter)


# Sturm sequences

def sturm_sequence(p: Dense) -> List[Dense]:
    """Signed remainder sequence of p and p' (positive-scaled pseudo-remainders)."""
    p = _primitive(p)
    seq = [p]
    dp = _primitive(_deriv(p))
    if not dp:
        return seq
    seq.append(dp)
    while True:
        r = _prem(seq[-2], seq[-1])
        if not r:
            return seq
        seq.append([-c for c in r])


def _variations(seq: Sequence[Dense], x: Fraction) -> int:
    changes = 0
    last = 0
    for q in seq:
        s = _sign_at(q, x)
        if s:
            if last and s != last:
                changes += 1
            last = s
    return changes


def count_roots(seq: Sequence[Dense], lo: Fraction, hi: Fraction) -> int:
    """Number of distinct real roots of seq[0] in the half-open interval (lo, hi]."""
    if lo >= hi:
        return 0
    return _variations(seq, Fraction(lo)) - _variations(seq, Fraction(hi))


def count_roots_closed(seq: Sequence[Dense], lo: Fraction, hi: Fraction) -> int:
    lo = Fraction(lo)
    extra = 1 if _sign_at(seq[0], lo) == 0 else 0
    return count_roots(seq, lo, Fraction(hi)) + extra


# Public types

@dataclass(frozen=True)
class IsolatedRoot:
    """A real algebraic number: the unique root of a square-free polynomial in [lo, hi]."""
    polynomial: MultiPoly
    lo: Fraction
    hi: Fraction
    multiplicity: int = 1
    dense: Tuple[int, ...] = field(default=(), compare=False, repr=False)

    @property
    def interval(self) -> Interval:
        return Interval(self.lo, self.hi)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def is_exact(self) -> bool:
        return self.lo == self.hi

    def __float__(self) -> float:
        return float((self.lo + self.hi) / 2)

    def _coeffs(self) -> Dense:
        if self.dense:
            return list(self.dense)
        var = self.polynomial.variables()
        return _to_int(self.polynomial.to_univariate(var[0])) if var else [1]


def _make_root(varset: VarSet, var: str, p: Dense, lo: Fraction, hi: Fraction,
               multiplicity: int) -> IsolatedRoot:
    poly = MultiPoly.from_univariate(varset, var, p[::-1])
    return IsolatedRoot(poly, Fraction(lo), Fraction(hi), multiplicity, tuple(p))


def _univariate_dense(p: MultiPoly) -> Tuple[str, Dense]:
    used = p.variables()
    if len(used) > 1:
        raise RootIsolationError(f"Expected a univariate polynomial, got variables {used}")
    if p.is_zero():
        raise RootIsolationError("Zero polynomial has no isolated roots")
    var = used[0] if used else p.varset.names[0]
    return var, _to_int(p.to_univariate(var))


def _squarefree_dense(f: Dense) -> List[Tuple[Dense, int]]:
    """Yun's square-free decomposition; factors are primitive with a positive leading coefficient."""
    f = _primitive(f)
    if not f:
        raise RootIsolationError("Zero polynomial has no square-free decomposition")
    if len(f) == 1:
        return []
    df = _deriv(f)
    a0 = _gcd(f, df)
    b = _exact_div(f, a0)
    c = _exact_div(df, a0)
    d = _sub(c, _deriv(b))
    out = []
    i = 1
    while len(b) > 1:
        a = _gcd(b, d) if d else _primitive(b)
        if len(a) > 1:
            out.append((a, i))
        b = _exact_div(b, a)
        c = _exact_div(d, a) if d else []
        d = _sub(c, _deriv(b))
        i += 1
    return out


def squarefree(p: MultiPoly) -> List[Tuple[MultiPoly, int]]:
    """
    Square-free decomposition of a nonzero univariate polynomial.

    Returns:
        List of (primitive factor, multiplicity); the product of factors raised to
        their multiplicities equals p up to a nonzero scalar
    """
    var, dense = _univariate_dense(p)
    return [(MultiPoly.from_univariate(p.varset, var, f[::-1]), k)
            for f, k in _squarefree_dense(dense)]


def _isolate_squarefree(f: Dense, lo: Fraction, hi: Fraction) -> List[Tuple[Fraction, Fraction]]:
    """Sorted, pairwise disjoint isolating intervals for the roots of square-free f in [lo, hi]."""
    if len(f) == 2:
        root = Fraction(-f[1], f[0])
        return [(root, root)] if lo <= root <= hi else []
    seq = sturm_sequence(f)
    found: List[Tuple[Fraction, Fraction]] = []
    for end in (lo, hi):
        if _sign_at(f, end) == 0 and (end, end) not in found:
            found.append((end, end))

    def open_count(a: Fraction, b: Fraction) -> int:
        return count_roots(seq, a, b) - (1 if _sign_at(f, b) == 0 else 0)

    stack = [(Fraction(lo), Fraction(hi), open_count(Fraction(lo), Fraction(hi)))]
    while stack:
        a, b, n = stack.pop()
        if n == 0:
            continue
        if n == 1:
            found.append(_tighten(f, seq, a, b, open_count))
            continue
        m = _split_point(a, b)
        if _sign_at(f, m) == 0:
            found.append((m, m))
        stack.append((a, m, open_count(a, m)))
        stack.append((m, b, open_count(m, b)))
    found.sort()
    for i in range(1, len(found)):
        if found[i - 1][1] >= found[i][0]:
            # neighbours meeting at a shared non-root split point
            found[i - 1] = _below(f, *found[i - 1])
    return found


def _tighten(f: Dense, seq, a: Fraction, b: Fraction, open_count) -> Tuple[Fraction, Fraction]:
    """Shrink (a, b) holding one root until neither endpoint is itself a root."""
    while _sign_at(f, a) == 0 or _sign_at(f, b) == 0:
        m = _split_point(a, b)
        if _sign_at(f, m) == 0:
            return m, m
        if open_count(a, m) == 1:
            b = m
        else:
            a = m
    q = _simplest_in(a, b)
    if _sign_at(f, q) == 0:
        return q, q
    return a, b


def _below(f: Dense, a: Fraction, b: Fraction) -> Tuple[Fraction, Fraction]:
    """Isolating interval for the single root of f in (a, b) with an upper end below b."""
    sa = _sign_at(f, a)
    top = b
    while b == top:
        m = _split_point(a, b)
        sm = _sign_at(f, m)
        if sm == 0:
            return m, m
        if sm == sa:
            a = m
        else:
            b = m
    return a, b


def _owner(factors: Sequence[Tuple[Dense, int]], a: Fraction, b: Fraction) -> Tuple[Dense, int]:
    """The square-free factor whose root lies in [a, b]."""
    for f, k in factors:
        if a == b:
            if _sign_at(f, a) == 0:
                return f, k
        elif _sign_at(f, a) * _sign_at(f, b) < 0:
            return f, k
    raise RootIsolationError(f"No square-free factor owns the root in [{a}, {b}]")


def isolate(p: MultiPoly, lo: Optional[Fraction] = None,
            hi: Optional[Fraction] = None) -> List[IsolatedRoot]:
    """
    Certified isolating intervals for the real roots of p in [lo, hi].

    Args:
        p: Nonzero univariate polynomial
        lo, hi: Range bounds; default to a Cauchy bound

    Returns:
        List[IsolatedRoot]: Sorted, pairwise disjoint, one root each
    """
    var, dense = _univariate_dense(p)
    return _isolate_dense(p.varset, var, dense, lo, hi)


def _isolate_dense(varset: VarSet, var: str, dense: Dense, lo, hi) -> List[IsolatedRoot]:
    if len(dense) <= 1:
        return []
    bound = _cauchy_bound(dense)
    lo = -bound if lo is None else Fraction(lo)
    hi = bound if hi is None else Fraction(hi)
    if lo > hi:
        raise RootIsolationError(f"Empty range [{lo}, {hi}]")
    factors = _squarefree_dense(dense)
    core: Dense = [1]
    for f, _ in factors:
        core = _ints(dup_mul(core, f, ZZ))
    roots = []
    for a, b in _isolate_squarefree(core, lo, hi):
        f, k = _owner(factors, a, b)
        roots.append(_make_root(varset, var, f, a, b, k))
    logger.debug(f"isolate: {len(roots)} roots of degree {len(dense) - 1} in [{lo}, {hi}]")
    return roots


def refine(r: IsolatedRoot, width: Fraction) -> IsolatedRoot:
    """Bisect the isolating interval until its width is at most `width`."""
    width = Fraction(width)
    if width <= 0:
        raise RootIsolationError("Refinement width must be positive")
    if r.is_exact() or r.width <= width:
        return r
    f = r._coeffs()
    a, b = r.lo, r.hi
    sa = _sign_at(f, a)
    if sa == 0:
        return IsolatedRoot(r.polynomial, a, a, r.multiplicity, tuple(f))
    if _sign_at(f, b) == 0:
        return IsolatedRoot(r.polynomial, b, b, r.multiplicity, tuple(f))
    while b - a > width:
        m = _split_point(a, b) if b - a > width * 4 else (a + b) / 2
        sm = _sign_at(f, m)
        if sm == 0:
            a = b = m
            break
        if sm == sa:
            a = m
        else:
            b = m
    return IsolatedRoot(r.polynomial, a, b, r.multiplicity, tuple(f))


def compare(r: IsolatedRoot, q: Fraction) -> int:
    """Sign of (root - q), exact."""
    q = Fraction(q)
    f = r._coeffs()
    while r.lo <= q <= r.hi:
        if _sign_at(f, q) == 0:
            return 0
        if r.is_exact():
            break
        r = refine(r, r.width / 2)
    return 1 if r.lo > q else -1


def sign_at(p: MultiPoly, r: IsolatedRoot, max_refinements: int = MAX_REFINEMENTS) -> int:
    """
    Exact sign of a univariate polynomial at a real algebraic number.

    Zero is decided by a gcd with the defining polynomial; otherwise the root is
    refined until the interval enclosure of p excludes zero.
    """
    if p.is_zero():
        return 0
    used = p.variables()
    if not used:
        c = p.constant_value()
        return (c > 0) - (c < 0)
    var, dense = _univariate_dense(p)
    f = r._coeffs()
    if r.is_exact():
        return _sign_at(dense, r.lo)
    g = _gcd(dense, f)
    if len(g) > 1 and count_roots_closed(sturm_sequence(g), r.lo, r.hi) > 0:
        return 0
    for _ in range(max_refinements):
        s = _eval_interval(dense, r.interval).sign()
        if s is not None:
            return s
        r = refine(r, r.width / 4)
        if r.is_exact():
            return _sign_at(dense, r.lo)
    raise RootIsolationError("Sign determination did not converge")


# Circle systems

def split_on_circle(p: MultiPoly, s: str, c: str) -> Tuple[MultiPoly, MultiPoly]:
    """Write p = A + s*B modulo s^2 + c^2 - 1, with A and B free of s."""
    i = p.varset.index(s)
    j = p.varset.index(c)
    a_terms: Dict[tuple, Fraction] = {}
    b_terms: Dict[tuple, Fraction] = {}
    for mono, coeff in p.terms.items():
        k = mono[i] // 2
        target = a_terms if mono[i] % 2 == 0 else b_terms
        # s^(2k) = (1 - c^2)^k
        for power in range(k + 1):
            m = list(mono)
            m[i] = 0
            m[j] += 2 * power
            key = tuple(m)
            target[key] = target.get(key, 0) + coeff * (-1) ** power * comb(k, power)
    return MultiPoly(p.varset, a_terms), MultiPoly(p.varset, b_terms)


def reduce_on_circle(p: MultiPoly, s: str, c: str) -> MultiPoly:
    """Canonical representative of p modulo s^2 + c^2 - 1 (degree at most 1 in s)."""
    a, b = split_on_circle(p, s, c)
    return a + b * MultiPoly.var(p.varset, s)


@dataclass(frozen=True)
class CircleRoot:
    """A certified solution (sin_t, cos_t) on the unit circle and its angle t in (-pi, pi]."""
    sin_val: IsolatedRoot
    cos_val: IsolatedRoot
    t_interval: Interval
    multiplicity: int = 1

    @property
    def t(self) -> float:
        return float(self.t_interval.mid)

    def box(self) -> Tuple[Interval, Interval]:
        return self.sin_val.interval, self.cos_val.interval

    def refine(self, width: Fraction) -> 'CircleRoot':
        sin_val = refine(self.sin_val, width)
        cos_val = refine(self.cos_val, width)
        return CircleRoot(sin_val, cos_val, _angle_interval(sin_val.interval, cos_val.interval),
                          self.multiplicity)


def _angle_interval(s: Interval, c: Interval) -> Interval:
    """Enclosure of atan2(s, c) over a box not meeting the branch cut."""
    if s.is_point() and s.lo == 0:
        if c.lo > 0:
            return Interval(0)
        if c.hi < 0:
            return pi_enclosure(PI_BITS)
    if s.contains_zero() and c.lo <= 0:
        raise RootIsolationError("Circle box meets the angle branch cut; refine further")
    corners = [atan2_enclosure(sv, cv, PI_BITS) for sv in (s.lo, s.hi) for cv in (c.lo, c.hi)]
    hull = corners[0]
    for iv in corners[1:]:
        hull = hull.hull(iv)
    return hull.round_out(PI_BITS)


def _sin_polynomial(g: Dense) -> Dense:
    """Square-free polynomial in s vanishing at +-sqrt(1 - c^2) for every root c of g."""
    low = g[::-1]
    # g(c) = E(c^2) + c*O(c^2), and c^2 = 1 - s^2 on the circle
    even = dup_strip(low[0::2][::-1])
    odd = dup_strip(low[1::2][::-1])
    e = dup_compose(even, ONE_MINUS_SQUARE, ZZ)
    o = dup_compose(odd, ONE_MINUS_SQUARE, ZZ)
    h = _sub(dup_sqr(e, ZZ), dup_mul(ONE_MINUS_SQUARE, dup_sqr(o, ZZ), ZZ))
    if not h:
        return [1, 0]
    return _squarefree_part(_primitive(h))


def _squarefree_part(p: Dense) -> Dense:
    g = _gcd(p, _deriv(p))
    if len(g) <= 1:
        return p
    return _primitive(_exact_div(p, g))


def solve_circle_system(system: Sequence[MultiPoly], s: str = 'sin_t', c: str = 'cos_t',
                        width: Fraction = Fraction(1, 10 ** ROOT_WIDTH_EXPONENT),
                        max_refinements: int = MAX_REFINEMENTS) -> List[CircleRoot]:
    """
    All real solutions of a polynomial system in (s, c) on the unit circle.

    Args:
        system: Polynomials over a VarSet containing s and c only (the circle
            relation is implied and may be included)
        width: Each solution's t enclosure is refined to at most this width

    Returns:
        List[CircleRoot]: Sorted by t in (-pi, pi]

    Raises:
        PositiveDimensionalError: If the system does not cut the circle in finitely many points
    """
    if not system:
        raise PositiveDimensionalError("Empty system: every point of the circle is a solution")
    for p in system:
        extra = [n for n in p.variables() if n not in (s, c)]
        if extra:
            raise RootIsolationError(f"Circle system involves extra variables {extra}")
    cvars = VarSet((c,))
    cc = MultiPoly.var(cvars, c)
    parts = []
    norms = []
    for p in system:
        a, b = split_on_circle(p, s, c)
        a, b = a.embed(cvars), b.embed(cvars)
        # (A + sB)(A - sB) with s^2 = 1 - c^2
        norm = a * a - (1 - cc * cc) * b * b
        if norm.is_zero():
            continue
        parts.append((a, b))
        norms.append(_to_int(norm.to_univariate(c)))
    if not norms:
        raise PositiveDimensionalError("System reduces to the circle relation alone")
    g = norms[0]
    for n in norms[1:]:
        g = _gcd(g, n)
    if len(g) <= 1:
        logger.info("Circle system has no solutions")
        return []
    c_roots = _isolate_dense(cvars, c, g, Fraction(-1), Fraction(1))
    logger.info(f"Circle system: {len(c_roots)} candidate cos values from degree {len(g) - 1}")
    svars = VarSet((s,))
    sin_polys: Dict[Tuple[int, ...], Dense] = {}
    solutions: List[CircleRoot] = []
    for root in c_roots:
        on_axis = compare(root, Fraction(1)) == 0 or compare(root, Fraction(-1)) == 0
        if on_axis:
            signs = [0]
        else:
            signs = []
            for sigma in (1, -1):
                ok = True
                for a, b in parts:
                    sa = sign_at(a, root)
                    sb = sign_at(b, root)
                    if not ((sa == 0 and sb == 0) or (sa != 0 and sb != 0 and sa == -sigma * sb)):
                        ok = False
                        break
                if ok:
                    signs.append(sigma)
        factor = tuple(root._coeffs())
        if factor not in sin_polys:
            sin_polys[factor] = _sin_polynomial(list(factor))
        for sigma in signs:
            lifted = _lift_sin(root, sigma, sin_polys[factor], svars, s, max_refinements)
            solutions.append(_narrow(lifted, Fraction(width), max_refinements))
    solutions.sort(key=lambda r: r.t_interval.lo)
    return solutions


def _narrow(root: CircleRoot, width: Fraction, max_refinements: int) -> CircleRoot:
    """Refine a circle solution until its t enclosure is at most `width` wide."""
    step = max(root.sin_val.width, root.cos_val.width, width)
    for _ in range(max_refinements):
        if root.t_interval.width <= width:
            return root
        step /= 4
        root = root.refine(step)
    raise RootIsolationError(f"Circle solution near t = {root.t:.6g} did not narrow to {float(width):.3g}")


def _exact_sqrt(q: Fraction) -> Optional[Fraction]:
    num, den = q.numerator, q.denominator
    rn, rd = isqrt(num), isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd)
    return None


def _lift_sin(cos_root: IsolatedRoot, sigma: int, h: Dense, svars: VarSet, s: str,
              max_refinements: int) -> CircleRoot:
    """
    Attach the certified sine value of sign sigma to a cosine root.

    The sine lies in sigma*sqrt(1 - [c]^2); that box isolates a root of h once h
    changes sign across it and h' is bounded away from zero on it.
    """
    if sigma == 0:
        zero = _make_root(svars, s, [1, 0], Fraction(0), Fraction(0), 1)
        exact_c = Fraction(compare(cos_root, Fraction(0)) or 1)
        cos_exact = IsolatedRoot(cos_root.polynomial, exact_c, exact_c, cos_root.multiplicity,
                                 cos_root.dense)
        return CircleRoot(zero, cos_exact, _angle_interval(Interval(0), Interval(exact_c)),
                          cos_root.multiplicity)
    root = cos_root
    if root.is_exact():
        exact = _exact_sqrt(1 - root.lo ** 2)
        if exact is not None:
            value = exact * sigma
            sin_root = _make_root(svars, s, _primitive([value.denominator, -value.numerator]),
                                  value, value, 1)
            return CircleRoot(sin_root, root, _angle_interval(Interval(value), root.interval),
                              root.multiplicity)
    dh = _deriv(h)
    bits = 80
    for _ in range(max_refinements):
        try:
            mag = sqrt_enclosure(Interval(1) - root.interval ** 2, bits=bits, clip=True)
        except IntervalError:
            root = refine(root, root.width / 4)
            continue
        s_iv = mag if sigma > 0 else -mag
        if s_iv.sign() == sigma and not _eval_interval(dh, s_iv).contains_zero():
            lo_sign = _sign_at(h, s_iv.lo)
            hi_sign = _sign_at(h, s_iv.hi)
            sin_root = None
            if lo_sign == 0:
                sin_root = _make_root(svars, s, h, s_iv.lo, s_iv.lo, 1)
            elif hi_sign == 0:
                sin_root = _make_root(svars, s, h, s_iv.hi, s_iv.hi, 1)
            elif lo_sign != hi_sign:
                q = _simplest_in(s_iv.lo, s_iv.hi)
                if _sign_at(h, q) == 0:
                    sin_root = _make_root(svars, s, h, q, q, 1)
                else:
                    sin_root = _make_root(svars, s, h, s_iv.lo, s_iv.hi, 1)
            if sin_root is not None:
                try:
                    t_iv = _angle_interval(sin_root.interval, root.interval)
                except RootIsolationError:
                    t_iv = None
                if t_iv is not None:
                    return CircleRoot(sin_root, root, t_iv, root.multiplicity)
        if root.is_exact():
            bits += 32
        else:
            root = refine(root, root.width / 4)
    raise RootIsolationError("Could not separate the sine value of a circle solution")


# Mixed functions of (sin t, cos t, t)

@dataclass(frozen=True)
class MixedRoot:
    """A certified simple root of f(sin t, cos t, t) inside t_interval."""
    t_interval: Interval
    sin_enclosure: Interval
    cos_enclosure: Interval

    @property
    def t(self) -> float:
        return float(self.t_interval.mid)

    def box(self) -> Tuple[Interval, Interval]:
        return self.sin_enclosure, self.cos_enclosure


def _mixed_value(p: MultiPoly, t_iv: Interval, s: str, c: str, t: str, bits: int) -> Interval:
    sin_iv, cos_iv = sin_cos_enclosure(t_iv, bits)
    point = {s: sin_iv, c: cos_iv}
    if t in p.varset:
        point[t] = t_iv
    return eval_poly(p, point, bits)


def time_derivative(p: MultiPoly, s: str, c: str, t: str) -> MultiPoly:
    """d/dt of p(sin t, cos t, t) as a polynomial in the same variables."""
    out = p.diff(s) * MultiPoly.var(p.varset, c) - p.diff(c) * MultiPoly.var(p.varset, s)
    if t in p.varset:
        out = out + p.diff(t)
    return out


def isolate_mixed(p: MultiPoly, domain: Interval, s: str = 'sin_t', c: str = 'cos_t',
                  t: str = 't', bits: int = 64,
                  min_width_exponent: int = MIXED_MIN_WIDTH_EXPONENT) -> List[MixedRoot]:
    """
    Certified roots of f(t) = p(sin t, cos t, t) on a rational t-domain.

    A subinterval is discarded when the enclosure of f excludes zero and kept as
    a root when f changes sign at its ends while the enclosure of f' excludes
    zero. Anything else is bisected; below the minimal width the function
    raises rather than dropping a candidate.
    """
    if p.is_zero():
        raise PositiveDimensionalError("Function vanishes identically on the domain")
    dp = time_derivative(p, s, c, t)
    min_width = Fraction(1, 10 ** min_width_exponent)
    roots: List[MixedRoot] = []

    def exact_root(x: Fraction) -> None:
        sin_iv, cos_iv = sin_cos_enclosure(Interval(x), bits)
        roots.append(MixedRoot(Interval(x), sin_iv, cos_iv))

    for end in (domain.lo, domain.hi):
        if _mixed_value(p, Interval(end), s, c, t, bits).sign() == 0:
            exact_root(end)
    stack = [domain]
    visited = 0
    while stack:
        iv = stack.pop()
        visited += 1
        slope = _mixed_value(dp, iv, s, c, t, bits)
        centre = _mixed_value(p, Interval(iv.mid), s, c, t, bits)
        value = centre + slope * (iv - iv.mid)
        if not value.contains_zero():
            continue
        left = _mixed_value(p, Interval(iv.lo), s, c, t, bits).sign()
        right = _mixed_value(p, Interval(iv.hi), s, c, t, bits).sign()
        if not slope.contains_zero():
            if left is not None and right is not None and left * right < 0:
                sin_iv, cos_iv = sin_cos_enclosure(iv, bits)
                roots.append(MixedRoot(iv, sin_iv, cos_iv))
                continue
            if left == 0 or right == 0:
                # monotone here; the only root is the endpoint, already recorded
                continue
        if iv.width < min_width:
            raise RootIsolationError(
                f"Unresolved candidate root near t = {float(iv.mid):.6g} (tangency or precision)")
        m = iv.mid
        if _mixed_value(p, Interval(m), s, c, t, bits).sign() == 0:
            exact_root(m)
        stack.append(Interval(m, iv.hi))
        stack.append(Interval(iv.lo, m))
    roots.sort(key=lambda r: r.t_interval.lo)
    logger.info(f"isolate_mixed: {len(roots)} roots over [{float(domain.lo):.4g}, "
                f"{float(domain.hi):.4g}] after {visited} subintervals")
    return roots


def refine_mixed(root: MixedRoot, p: MultiPoly, width: Fraction, s: str = 'sin_t',
                 c: str = 'cos_t', t: str = 't', bits: int = 96) -> MixedRoot:
    """Bisect a mixed root's t-interval down to `width` using certified endpoint signs."""
    iv = root.t_interval
    left = _mixed_value(p, Interval(iv.lo), s, c, t, bits).sign()
    while iv.width > width:
        m = iv.mid
        sm = _mixed_value(p, Interval(m), s, c, t, bits).sign()
        if sm is None:
            bits += 32
            if bits > 1024:
                break
            continue
        if sm == left:
            iv = Interval(m, iv.hi)
        else:
            iv = Interval(iv.lo, m)
    sin_iv, cos_iv = sin_cos_enclosure(iv, bits)
    return MixedRoot(iv, sin_iv, cos_iv)


def period_images(t_box: Interval, domain: Interval, bits: int = PI_BITS) -> List[Tuple[int, Interval]]:
    """Translates t_box + 2*pi*k meeting the domain, as (k, enclosure) pairs."""
    two_pi = pi_enclosure(bits) * 2
    k_lo = floor((domain.lo - t_box.hi) / two_pi.hi) - 1
    k_hi = ceil((domain.hi - t_box.lo) / two_pi.lo) + 1
    images = []
    for k in range(k_lo, k_hi + 1):
        shifted = t_box + two_pi * k
        if shifted.hi < domain.lo or shifted.lo > domain.hi:
            continue
        if not domain.contains(shifted):
            raise RootIsolationError(
                f"Root image near t = {float(shifted.mid):.6g} straddles the domain boundary")
        images.append((k, shifted))
    return images
