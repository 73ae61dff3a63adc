"""Exact sparse multivariate polynomials over the rationals, built on sympy ring elements."""
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from tokenize import TokenError
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union
import logging
import re

from sympy import Integer, Rational, S, Symbol
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations
from sympy.polys.domains import QQ, ZZ
from sympy.polys.orderings import ProductOrder, grevlex, lex
from sympy.polys.polyerrors import ExactQuotientFailed
from sympy.polys.rings import PolyElement, PolyRing

logger = logging.getLogger(__name__)

Monomial = Tuple[int, ...]
Scalar = Union[int, Fraction]


class PolynomialError(Exception):
    """Raised when a polynomial operation is structurally invalid."""
    pass


class ParseError(PolynomialError):
    """Raised when polynomial text cannot be parsed."""
    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


@lru_cache(maxsize=None)
def _rational_ring(names: Tuple[str, ...]) -> PolyRing:
    return PolyRing(names, QQ, lex)


@lru_cache(maxsize=None)
def _integer_ring(names: Tuple[str, ...]) -> PolyRing:
    return PolyRing(names, ZZ, lex)


def to_fraction(c) -> Fraction:
    """A ground-domain coefficient (QQ or ZZ element) as a Fraction."""
    return Fraction(int(c.numerator), int(c.denominator))


def to_qq(value: Scalar):
    if isinstance(value, bool):
        raise PolynomialError(f"Coefficient {value!r} is not an exact rational")
    if isinstance(value, Fraction):
        return QQ(value.numerator, value.denominator)
    if isinstance(value, int):
        return QQ(value)
    raise PolynomialError(f"Coefficient {value!r} is not an exact rational")


@dataclass(frozen=True)
class VarSet:
    """Ordered variable names with an optional partition into elimination blocks."""
    names: Tuple[str, ...]
    blocks: Tuple[Tuple[str, ...], ...] = field(default=(), compare=False)

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise PolynomialError(f"Duplicate variable names in {self.names}")
        for name in self.names:
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
                raise PolynomialError(f"Invalid variable name '{name}'")
        if self.blocks:
            flat = [n for block in self.blocks for n in block]
            if sorted(flat) != sorted(self.names):
                raise PolynomialError("Blocks must partition the variable names")

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.names

    @property
    def ring(self) -> PolyRing:
        """QQ[names] with generators in VarSet order."""
        return _rational_ring(self.names)

    @property
    def int_ring(self) -> PolyRing:
        return _integer_ring(self.names)

    @cached_property
    def _positions(self) -> Dict[str, int]:
        return {name: i for i, name in enumerate(self.names)}

    def index(self, name: str) -> int:
        try:
            return self._positions[name]
        except KeyError:
            raise PolynomialError(f"Unknown variable '{name}' (have {', '.join(self.names)})")

    def with_blocks(self, *blocks: Sequence[str]) -> 'VarSet':
        return VarSet(self.names, tuple(tuple(b) for b in blocks))

    def extend(self, names: Iterable[str]) -> 'VarSet':
        extra = [n for n in names if n not in self.names]
        return VarSet(self.names + tuple(extra))

    def restrict(self, names: Iterable[str]) -> 'VarSet':
        keep = set(names)
        return VarSet(tuple(n for n in self.names if n in keep))


def _projection(block: Tuple[int, ...]) -> Callable[[Monomial], Monomial]:
    return lambda m: tuple(m[i] for i in block)


@dataclass(frozen=True)
class MonomialOrder:
    """Monomial order: lex, grevlex, or lex between blocks with grevlex inside.

    For the block kind, `blocks` holds exponent-vector index groups, most
    significant block first. `key` is the matching sympy order.
    """
    kind: str
    blocks: Tuple[Tuple[int, ...], ...] = ()

    def __post_init__(self):
        if self.kind not in ('lex', 'grevlex', 'block'):
            raise PolynomialError(f"Unknown monomial order '{self.kind}'")
        if self.kind == 'block' and not self.blocks:
            raise PolynomialError("Block order needs at least one block")

    @classmethod
    def lex(cls) -> 'MonomialOrder':
        return cls('lex')

    @classmethod
    def grevlex(cls) -> 'MonomialOrder':
        return cls('grevlex')

    @classmethod
    def elimination(cls, varset: VarSet, drop: Iterable[str],
                    keep_blocks: Optional[Sequence[Sequence[str]]] = None) -> 'MonomialOrder':
        """Block order with the dropped variables in the leading block.

        `keep_blocks` optionally splits the kept variables further, most
        significant first; kept variables not listed form a final block.
        """
        drop = set(drop)
        for name in drop:
            varset.index(name)
        first = tuple(i for i, n in enumerate(varset.names) if n in drop)
        blocks = [first]
        placed = set(drop)
        for group in keep_blocks or ():
            block = tuple(varset.index(n) for n in group if n not in placed)
            placed.update(group)
            blocks.append(block)
        blocks.append(tuple(i for i, n in enumerate(varset.names) if n not in placed))
        return cls('block', tuple(b for b in blocks if b))

    @classmethod
    def from_varset_blocks(cls, varset: VarSet) -> 'MonomialOrder':
        if not varset.blocks:
            return cls.grevlex()
        return cls('block', tuple(tuple(varset.index(n) for n in block) for block in varset.blocks))

    @cached_property
    def key(self):
        """Sort key; a larger key is a larger monomial."""
        if self.kind == 'lex':
            return lex
        if self.kind == 'grevlex':
            return grevlex
        return ProductOrder(*((grevlex, _projection(block)) for block in self.blocks))

    def eliminates(self, index_set: Iterable[int]) -> bool:
        """True when every monomial involving index_set outranks those that do not."""
        wanted = set(index_set)
        return self.kind == 'block' and set(self.blocks[0]) == wanted


class MultiPoly:
    """Immutable polynomial over a VarSet, wrapping an element of QQ[names]."""
    __slots__ = ('varset', 'element')

    def __init__(self, varset: VarSet, terms: Optional[Mapping[Monomial, Scalar]] = None):
        n = len(varset)
        element = varset.ring.zero
        for mono, coeff in (terms or {}).items():
            if len(mono) != n:
                raise PolynomialError(f"Monomial {mono} does not match {n} variables")
            c = to_qq(coeff)
            if c:
                element[tuple(mono)] = c
        object.__setattr__(self, 'varset', varset)
        object.__setattr__(self, 'element', element)

    def __setattr__(self, name, value):
        raise AttributeError("MultiPoly is immutable")

    @classmethod
    def wrap(cls, varset: VarSet, element: PolyElement) -> 'MultiPoly':
        """Adopt a ring element; it must not be mutated afterwards."""
        ring = varset.ring
        if element.ring is not ring:
            element = element.set_ring(ring)
        p = object.__new__(cls)
        object.__setattr__(p, 'varset', varset)
        object.__setattr__(p, 'element', element)
        return p

    def _wrap(self, element: PolyElement) -> 'MultiPoly':
        return MultiPoly.wrap(self.varset, element)

    # Constructors

    @classmethod
    def zero(cls, varset: VarSet) -> 'MultiPoly':
        return cls.wrap(varset, varset.ring.zero)

    @classmethod
    def const(cls, varset: VarSet, value: Scalar) -> 'MultiPoly':
        return cls.wrap(varset, varset.ring.ground_new(to_qq(value)))

    @classmethod
    def var(cls, varset: VarSet, name: str, power: int = 1) -> 'MultiPoly':
        gen = varset.ring.gens[varset.index(name)]
        return cls.wrap(varset, gen ** power)

    @classmethod
    def parse(cls, text: str, varset: VarSet) -> 'MultiPoly':
        return parse_poly(text, varset)

    @property
    def terms(self) -> Dict[Monomial, Fraction]:
        """Monomial to Fraction coefficient map (a fresh dict)."""
        return {m: to_fraction(c) for m, c in self.element.items()}

    # Queries

    def is_zero(self) -> bool:
        return not self.element

    def is_constant(self) -> bool:
        return self.element.is_ground

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise PolynomialError(f"{self} is not constant")
        return to_fraction(self.element.const())

    def total_degree(self) -> int:
        if not self.element:
            return -1
        return max(sum(m) for m in self.element.itermonoms())

    def degree(self, name: str) -> int:
        i = self.varset.index(name)
        if not self.element:
            return -1
        return self.element.degrees()[i]

    def variables(self) -> Tuple[str, ...]:
        if not self.element:
            return ()
        degrees = self.element.degrees()
        return tuple(n for n, d in zip(self.varset.names, degrees) if d > 0)

    def involves(self, names: Iterable[str]) -> bool:
        idx = [self.varset.index(n) for n in names]
        return any(m[i] for m in self.element.itermonoms() for i in idx)

    def leading_term(self, order: 'MonomialOrder') -> Tuple[Monomial, Fraction]:
        if not self.element:
            raise PolynomialError("Zero polynomial has no leading term")
        mono = max(self.element.itermonoms(), key=order.key)
        return mono, to_fraction(self.element[mono])

    def sorted_terms(self, order: Optional[MonomialOrder] = None) -> List[Tuple[Monomial, Fraction]]:
        order = order or MonomialOrder.grevlex()
        return [(m, to_fraction(c)) for m, c in self.element.terms(order.key)]

    # Arithmetic

    def _check(self, other: 'MultiPoly') -> None:
        if self.varset.names != other.varset.names:
            raise PolynomialError(
                f"VarSet mismatch: {self.varset.names} vs {other.varset.names}")

    def _coerce(self, other) -> PolyElement:
        if isinstance(other, MultiPoly):
            self._check(other)
            return other.element
        if isinstance(other, (int, Fraction)):
            return self.varset.ring.ground_new(to_qq(other))
        raise PolynomialError(f"Cannot combine MultiPoly with {type(other).__name__}")

    def __add__(self, other) -> 'MultiPoly':
        return self._wrap(self.element + self._coerce(other))

    __radd__ = __add__

    def __neg__(self) -> 'MultiPoly':
        return self._wrap(-self.element)

    def __sub__(self, other) -> 'MultiPoly':
        return self._wrap(self.element - self._coerce(other))

    def __rsub__(self, other) -> 'MultiPoly':
        return self._wrap(self._coerce(other) - self.element)

    def __mul__(self, other) -> 'MultiPoly':
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return self._wrap(self.element * self._coerce(other))

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> 'MultiPoly':
        if not isinstance(exponent, int) or exponent < 0:
            raise PolynomialError("Only nonnegative integer powers are supported")
        if exponent == 0:
            return MultiPoly.const(self.varset, 1)
        return self._wrap(self.element ** exponent)

    def scale(self, factor: Scalar) -> 'MultiPoly':
        return self._wrap(self.element.mul_ground(to_qq(factor)))

    def mul_term(self, mono: Monomial, coeff: Scalar) -> 'MultiPoly':
        return self._wrap(self.element.mul_term((tuple(mono), to_qq(coeff))))

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = MultiPoly.const(self.varset, other)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self.varset.names == other.varset.names and dict.__eq__(self.element, other.element)

    def __hash__(self) -> int:
        return hash((self.varset.names, frozenset(self.element.items())))

    def __repr__(self) -> str:
        return f"MultiPoly({format_poly(self)!r})"

    def __str__(self) -> str:
        return format_poly(self)

    # Calculus and evaluation

    def _gen(self, name: str) -> PolyElement:
        return self.varset.ring.gens[self.varset.index(name)]

    def diff(self, name: str) -> 'MultiPoly':
        return self._wrap(self.element.diff(self._gen(name)))

    def _subs(self, point: Mapping[str, Scalar]) -> PolyElement:
        pairs = [(self._gen(n), to_qq(v)) for n, v in point.items()]
        return self.element.subs(pairs) if pairs else self.element

    def evaluate(self, point: Mapping[str, Scalar]) -> Fraction:
        """Exact value at a point assigning every variable present."""
        used = self.variables()
        rest = self._subs({n: point[n] for n in used if n in point})
        if not rest.is_ground:
            raise PolynomialError("Point does not assign every variable in use")
        return to_fraction(rest.const())

    def specialize(self, point: Mapping[str, Scalar]) -> 'MultiPoly':
        """Substitute rationals for some variables, keeping the VarSet."""
        return self._wrap(self._subs(point))

    def embed(self, target: VarSet) -> 'MultiPoly':
        """Re-express over another VarSet containing every variable in use."""
        if target.names == self.varset.names:
            return self
        for n in self.variables():
            if n not in target:
                raise PolynomialError(f"Variable '{n}' missing from target VarSet")
        return MultiPoly.wrap(target, self.element.set_ring(target.ring))

    def substitute(self, mapping: Mapping[str, 'MultiPoly'], target: VarSet,
                   reducer: Optional[Callable[['MultiPoly'], 'MultiPoly']] = None) -> 'MultiPoly':
        """Compose: replace variables by polynomials over `target`.

        Unmapped variables must exist in `target`. `reducer`, when given, is
        applied after every product to keep intermediate results small.
        """
        reduce = reducer or (lambda q: q)
        images: List[Optional[MultiPoly]] = []
        for name in self.varset.names:
            if name in mapping:
                image = mapping[name]
                if image.varset.names != target.names:
                    image = image.embed(target)
                images.append(image)
            elif name in target:
                images.append(MultiPoly.var(target, name))
            else:
                images.append(None)
        power_cache: Dict[Tuple[int, int], MultiPoly] = {}

        def power(i: int, e: int) -> MultiPoly:
            key = (i, e)
            if key not in power_cache:
                if e == 1:
                    power_cache[key] = images[i]
                else:
                    power_cache[key] = reduce(power(i, e - 1) * images[i])
            return power_cache[key]

        total = MultiPoly.zero(target)
        for mono, c in self.sorted_terms():
            term = MultiPoly.const(target, c)
            for i, e in enumerate(mono):
                if e:
                    if images[i] is None:
                        raise PolynomialError(
                            f"No image for variable '{self.varset.names[i]}'")
                    term = reduce(term * power(i, e))
            total = total + term
        return reduce(total)

    def coefficients_in(self, name: str) -> Dict[int, 'MultiPoly']:
        """Split as sum of coeff_k * name^k; coefficients keep the VarSet."""
        i = self.varset.index(name)
        ring = self.varset.ring
        out: Dict[int, PolyElement] = {}
        for mono, c in self.element.items():
            k = mono[i]
            if k not in out:
                out[k] = ring.zero
            out[k][mono[:i] + (0,) + mono[i + 1:]] = c
        return {k: self._wrap(p) for k, p in out.items()}

    def to_univariate(self, name: str) -> List[Fraction]:
        """Dense coefficient list (lowest degree first) of a univariate polynomial."""
        others = [n for n in self.variables() if n != name]
        if others:
            raise PolynomialError(f"Polynomial is not univariate in '{name}': uses {others}")
        i = self.varset.index(name)
        deg = self.degree(name)
        coeffs = [Fraction(0)] * (deg + 1)
        for mono, c in self.element.items():
            coeffs[mono[i]] = to_fraction(c)
        return coeffs

    @classmethod
    def from_univariate(cls, varset: VarSet, name: str, coeffs: Sequence[Scalar]) -> 'MultiPoly':
        i = varset.index(name)
        terms = {}
        for k, c in enumerate(coeffs):
            if c:
                m = [0] * len(varset)
                m[i] = k
                terms[tuple(m)] = c
        return cls(varset, terms)

    # Normalisation

    def content(self) -> Fraction:
        """Positive rational c with self / c having coprime integer coefficients."""
        return to_fraction(self.element.content())

    def primitive(self, order: Optional[MonomialOrder] = None) -> 'MultiPoly':
        """Integer coefficients, content 1, positive leading coefficient."""
        if not self.element:
            return self
        order = order or MonomialOrder.grevlex()
        c = self.content()
        _, lc = self.leading_term(order)
        if lc < 0:
            c = -c
        return self._wrap(self.element.quo_ground(to_qq(c)))

    def monic(self, order: MonomialOrder) -> 'MultiPoly':
        _, lc = self.leading_term(order)
        return self._wrap(self.element.quo_ground(to_qq(lc)))


def poly_arith(a: MultiPoly, b: MultiPoly, op: str) -> MultiPoly:
    """Exact add, sub or mul of two polynomials over the same VarSet."""
    a._check(b)
    if op == 'add':
        return a + b
    if op == 'sub':
        return a - b
    if op == 'mul':
        return a * b
    raise PolynomialError(f"Unknown operation '{op}'")


def poly_diff(p: MultiPoly, name: str) -> MultiPoly:
    return p.diff(name)


def exact_divide(p: MultiPoly, q: MultiPoly) -> MultiPoly:
    """Quotient p / q; raises PolynomialError when q does not divide p."""
    p._check(q)
    if q.is_zero():
        raise PolynomialError("Division by zero polynomial")
    try:
        return p._wrap(p.element.exquo(q.element))
    except ExactQuotientFailed:
        raise PolynomialError(f"{q} does not divide {p}")


Matrix = List[List[MultiPoly]]


def determinant(m: Matrix) -> MultiPoly:
    """Exact determinant; cofactor expansion up to 2x2, fraction-free Bareiss above."""
    n = len(m)
    if n == 0 or any(len(row) != n for row in m):
        raise PolynomialError("Determinant needs a non-empty square matrix")
    varset = m[0][0].varset
    for row in m:
        for entry in row:
            entry._check(m[0][0])
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    a = [list(row) for row in m]
    sign = 1
    prev = MultiPoly.const(varset, 1)
    for k in range(n - 1):
        if a[k][k].is_zero():
            swap = next((i for i in range(k + 1, n) if not a[i][k].is_zero()), None)
            if swap is None:
                return MultiPoly.zero(varset)
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = exact_divide(a[k][k] * a[i][j] - a[i][k] * a[k][j], prev)
        prev = a[k][k]
    det = a[n - 1][n - 1]
    return det if sign > 0 else -det


# Text format

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(\*\*|[-+*/^()]))")
_PARSE_GLOBALS = {"Integer": Integer, "Rational": Rational, "Symbol": Symbol}
_TRANSFORMS = standard_transformations + (convert_xor,)


def _format_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_poly(p: MultiPoly, order: Optional[MonomialOrder] = None) -> str:
    """Render in the `x^2 - 2*rho1*x + 3/4` text format."""
    if p.is_zero():
        return "0"
    parts: List[str] = []
    for mono, c in p.sorted_terms(order):
        factors = []
        for name, e in zip(p.varset.names, mono):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        mag = abs(c)
        if not factors:
            body = _format_coeff(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = _format_coeff(mag) + "*" + "*".join(factors)
        if not parts:
            parts.append(f"-{body}" if c < 0 else body)
        else:
            parts.append(f"- {body}" if c < 0 else f"+ {body}")
    return " ".join(parts)


def _position(text: str, offset: int) -> Tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    column = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, column


def _scan(text: str, varset: VarSet) -> None:
    """Lexical pass: characters, identifiers and brackets, with positions."""
    pos = 0
    depth: List[int] = []
    last = None
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN.match(text, pos)
        if not match:
            offset = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"Unexpected character '{text[offset]}'", *_position(text, offset))
        number, ident, sym = match.groups()
        start = match.start(match.lastindex)
        if ident is not None and ident not in varset:
            raise ParseError(f"Unknown variable '{ident}'", *_position(text, start))
        if sym == '(':
            depth.append(start)
        elif sym == ')':
            if not depth:
                raise ParseError("Unbalanced ')'", *_position(text, start))
            depth.pop()
        last = (sym, start)
        pos = match.end()
    if last is None:
        raise ParseError("Empty polynomial", 1, 1)
    if depth:
        raise ParseError("Expected ')'", *_position(text, depth[-1]))
    if last[0] is not None and last[0] not in ')':
        raise ParseError("Unexpected end of input", *_position(text, len(text)))


def parse_poly(text: str, varset: VarSet) -> MultiPoly:
    """Parse the text format; raises ParseError with line and column."""
    _scan(text, varset)
    local = {name: Symbol(name) for name in varset.names}
    try:
        expr = parse_expr(text.replace("\n", " "), local_dict=local,
                          global_dict=dict(_PARSE_GLOBALS), transformations=_TRANSFORMS)
    except (SyntaxError, TokenError) as e:
        raise ParseError(f"Malformed polynomial: {e}", 1, 1)
    try:
        return MultiPoly.wrap(varset, varset.ring.from_expr(expr))
    except ValueError:
        _, den = expr.as_numer_denom()
        if den.free_symbols or den == 0 or expr.has(S.ComplexInfinity, S.NaN):
            raise ParseError("Division only by a nonzero constant", 1, 1)
        raise ParseError(f"Not a polynomial in {', '.join(varset.names)}: {expr}", 1, 1)
