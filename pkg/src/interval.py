"""Closed intervals with rational endpoints and rigorous elementary enclosures."""
from fractions import Fraction
from functools import lru_cache
from math import floor, ceil, isqrt
from typing import Dict, Mapping, Optional, Tuple, Union
import logging

from .polycore import MultiPoly

logger = logging.getLogger(__name__)

Number = Union[int, Fraction]


class IntervalError(Exception):
    """Raised when an interval operation has no rigorous result."""
    pass


def _floor_dyadic(x: Fraction, bits: int) -> Fraction:
    scale = 1 << bits
    return Fraction(floor(x * scale), scale)


def _ceil_dyadic(x: Fraction, bits: int) -> Fraction:
    scale = 1 << bits
    return Fraction(ceil(x * scale), scale)


class Interval:
    """Closed interval [lo, hi] with exact Fraction endpoints."""
    __slots__ = ('lo', 'hi')

    def __init__(self, lo: Number, hi: Optional[Number] = None):
        lo = Fraction(lo)
        hi = lo if hi is None else Fraction(hi)
        if lo > hi:
            raise IntervalError(f"Empty interval [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def is_point(self) -> bool:
        return self.lo == self.hi

    def contains(self, x: Union[Number, 'Interval']) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    def contains_zero(self) -> bool:
        return self.lo <= 0 <= self.hi

    def sign(self) -> Optional[int]:
        """Certified sign, or None when the interval straddles zero."""
        if self.lo > 0:
            return 1
        if self.hi < 0:
            return -1
        if self.lo == self.hi == 0:
            return 0
        return None

    def hull(self, other: 'Interval') -> 'Interval':
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other: 'Interval') -> Optional['Interval']:
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else None

    def round_out(self, bits: Optional[int]) -> 'Interval':
        """Widen outward to a dyadic grid of 2**-bits."""
        if bits is None:
            return self
        return Interval(_floor_dyadic(self.lo, bits), _ceil_dyadic(self.hi, bits))

    def _coerce(self, other) -> 'Interval':
        return other if isinstance(other, Interval) else Interval(other)

    def __add__(self, other) -> 'Interval':
        other = self._coerce(other)
        return Interval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __neg__(self) -> 'Interval':
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other) -> 'Interval':
        other = self._coerce(other)
        return Interval(self.lo - other.hi, self.hi - other.lo)

    def __rsub__(self, other) -> 'Interval':
        return self._coerce(other) - self

    def __mul__(self, other) -> 'Interval':
        other = self._coerce(other)
        if other.is_point():
            c = other.lo
            return Interval(self.lo * c, self.hi * c) if c >= 0 else Interval(self.hi * c, self.lo * c)
        products = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return Interval(min(products), max(products))

    __rmul__ = __mul__

    def __truediv__(self, other) -> 'Interval':
        other = self._coerce(other)
        if other.contains_zero():
            raise IntervalError(f"Division by interval containing zero {other}")
        return self * Interval(1 / other.hi, 1 / other.lo)

    def __pow__(self, n: int) -> 'Interval':
        if n == 0:
            return Interval(1)
        if n % 2 == 1 or self.lo >= 0:
            return Interval(self.lo ** n, self.hi ** n)
        if self.hi <= 0:
            return Interval(self.hi ** n, self.lo ** n)
        return Interval(0, max(self.lo ** n, self.hi ** n))

    def __eq__(self, other) -> bool:
        return isinstance(other, Interval) and self.lo == other.lo and self.hi == other.hi

    def __hash__(self) -> int:
        return hash((self.lo, self.hi))

    def __repr__(self) -> str:
        return f"Interval({self.lo}, {self.hi})"

    def __float__(self) -> float:
        return float(self.mid)


def sqrt_enclosure(x: Interval, bits: int = 64, clip: bool = False) -> Interval:
    """Rigorous enclosure of the square root of a nonnegative interval."""
    lo = x.lo
    if lo < 0:
        if not clip or x.hi < 0:
            raise IntervalError(f"Square root of negative interval {x}")
        lo = Fraction(0)
    scale = 1 << (2 * bits)
    low = isqrt(floor(lo * scale))
    m = ceil(x.hi * scale)
    high = isqrt(m)
    if high * high < m:
        high += 1
    return Interval(Fraction(low, 1 << bits), Fraction(high, 1 << bits))


def _atan_series(x: Fraction, bits: int) -> Interval:
    """Enclosure of atan(x), 0 <= x < 1, from consecutive partial sums of the alternating series."""
    total = Fraction(0)
    k = 0
    eps = Fraction(1, 1 << (bits + 8))
    while True:
        term = x ** (2 * k + 1) / (2 * k + 1)
        nxt = total + term if k % 2 == 0 else total - term
        if term < eps:
            return Interval(min(total, nxt), max(total, nxt))
        total = nxt
        k += 1


@lru_cache(maxsize=8)
def pi_enclosure(bits: int = 96) -> Interval:
    """Rational enclosure of pi via Machin's formula."""
    a = _atan_series(Fraction(1, 5), bits)
    b = _atan_series(Fraction(1, 239), bits)
    return (16 * a - 4 * b).round_out(bits)


def atan_enclosure(q: Number, bits: int = 96) -> Interval:
    """Rigorous enclosure of atan(q) at a rational point."""
    q = Fraction(q)
    if q < 0:
        return -atan_enclosure(-q, bits)
    if q > 1:
        return (pi_enclosure(bits) * Fraction(1, 2) - atan_enclosure(1 / q, bits)).round_out(bits)
    if q > Fraction(1, 2):
        # atan(q) = pi/4 - atan((1 - q) / (1 + q))
        shifted = _atan_series((1 - q) / (1 + q), bits)
        return (pi_enclosure(bits) * Fraction(1, 4) - shifted).round_out(bits)
    return _atan_series(q, bits).round_out(bits)


def atan2_enclosure(y: Number, x: Number, bits: int = 96) -> Interval:
    """Enclosure of the angle of the point (x, y) in (-pi, pi]."""
    y, x = Fraction(y), Fraction(x)
    if x > 0:
        return atan_enclosure(y / x, bits)
    if x == 0:
        if y == 0:
            raise IntervalError("Angle of the origin is undefined")
        half_pi = pi_enclosure(bits) * Fraction(1, 2)
        return half_pi if y > 0 else -half_pi
    pi = pi_enclosure(bits)
    base = atan_enclosure(y / x, bits)
    return (base + pi if y >= 0 else base - pi).round_out(bits)


def _taylor_enclosure(m: Fraction, bits: int, cosine: bool) -> Interval:
    """Enclosure of sin(m) or cos(m) at a rational point with a Lagrange remainder."""
    eps = Fraction(1, 1 << bits)
    total = Fraction(0)
    n = 0 if cosine else 1
    term = Fraction(1) if cosine else m
    sign = 1
    while True:
        total += sign * term
        bound = abs(term) * m * m / ((n + 1) * (n + 2))
        if bound < eps:
            break
        term = term * m * m / ((n + 1) * (n + 2))
        n += 2
        sign = -sign
        total = Fraction(round(total * (1 << (bits + 16))), 1 << (bits + 16))
    slack = bound + Fraction(n + 2, 1 << (bits + 16))
    return Interval(total - slack, total + slack)


def sin_cos_enclosure(t: Interval, bits: int = 64) -> Tuple[Interval, Interval]:
    """Enclosures of sin and cos over a rational t-interval."""
    m = t.mid
    half = t.width / 2
    unit = Interval(-1, 1)
    s = (_taylor_enclosure(m, bits, cosine=False) + Interval(-half, half)).intersect(unit)
    c = (_taylor_enclosure(m, bits, cosine=True) + Interval(-half, half)).intersect(unit)
    return s.round_out(bits), c.round_out(bits)


def eval_poly(p: MultiPoly, point: Mapping[str, Interval], bits: Optional[int] = None) -> Interval:
    """Natural interval extension of p; rounding outward to `bits` when given."""
    names = p.varset.names
    powers: Dict[Tuple[int, int], Interval] = {}
    total = Interval(0)
    for mono, c in p.terms.items():
        term = Interval(c)
        for i, e in enumerate(mono):
            if e:
                key = (i, e)
                if key not in powers:
                    try:
                        value = point[names[i]]
                    except KeyError:
                        raise IntervalError(f"No enclosure for variable '{names[i]}'")
                    powers[key] = (value ** e).round_out(bits)
                term = (term * powers[key]).round_out(bits)
        total = (total + term).round_out(bits)
    return total
