"""Groebner bases (Buchberger) and elimination ideals."""
from dataclasses import dataclass
from heapq import heappop, heappush
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple
import logging

from sympy.polys.domains import ZZ
from sympy.polys.monomials import monomial_divides, monomial_lcm, monomial_ldiv, monomial_mul
from sympy.polys.rings import PolyElement

from .config import MAX_BASIS_SIZE, MAX_TOTAL_DEGREE
from .polycore import Monomial, MonomialOrder, MultiPoly, PolynomialError, VarSet

logger = logging.getLogger(__name__)


class GroebnerError(Exception):
    """Raised when a basis computation cannot be carried out."""
    pass


class BlowupError(GroebnerError):
    """Raised when a computation exceeds a configured resource ceiling."""
    def __init__(self, limit: str, value: int, ceiling: int):
        super().__init__(f"{limit} {value} exceeds ceiling {ceiling}")
        self.limit = limit
        self.value = value
        self.ceiling = ceiling


@dataclass(frozen=True)
class GroebnerBasis:
    """Reduced Groebner basis: monic generators sorted by decreasing leading monomial."""
    generators: Tuple[MultiPoly, ...]
    order: MonomialOrder
    reduced: bool = True

    @property
    def varset(self) -> VarSet:
        return self.generators[0].varset

    def is_unit(self) -> bool:
        return len(self.generators) == 1 and self.generators[0].is_constant()

    def __len__(self) -> int:
        return len(self.generators)

    def __iter__(self):
        return iter(self.generators)


class _IntPoly:
    """Primitive element of ZZ[vars] with cached leading data; internal to reduction."""
    __slots__ = ('poly', 'lm', 'lc')

    def __init__(self, poly: PolyElement, key):
        self.poly = poly
        self.lm = max(poly, key=key)
        self.lc = poly[self.lm]


def _primitive(poly: PolyElement) -> PolyElement:
    _, prim = poly.primitive()
    return prim


def _to_int_poly(p: MultiPoly) -> PolyElement:
    _, cleared = p.element.clear_denoms()
    return _primitive(cleared.set_ring(p.varset.int_ring))


def _to_multipoly(varset: VarSet, poly: PolyElement) -> MultiPoly:
    return MultiPoly.wrap(varset, poly.set_ring(varset.ring))


def _negated(key: tuple) -> tuple:
    return tuple(_negated(x) if isinstance(x, tuple) else -x for x in key)


class _Reducer:
    """Fraction-free multivariate division over ZZ with a heap of pending monomials."""
    def __init__(self, order: MonomialOrder):
        self._key = order.key
        self._keys: Dict[Monomial, tuple] = {}

    def key(self, m: Monomial) -> tuple:
        k = self._keys.get(m)
        if k is None:
            k = self._key(m)
            self._keys[m] = k
        return k

    def neg_key(self, m: Monomial) -> tuple:
        return _negated(self.key(m))

    def reduce(self, poly: PolyElement, basis: Sequence[_IntPoly],
               full: bool = True) -> PolyElement:
        """Return a primitive remainder of poly modulo basis (top-only when not full)."""
        pending = poly.copy()
        done = poly.ring.zero
        heap: List[Tuple[tuple, Monomial]] = []
        queued: Set[Monomial] = set()
        for m in pending:
            heappush(heap, (self.neg_key(m), m))
            queued.add(m)
        steps = 0
        while heap:
            _, m = heappop(heap)
            queued.discard(m)
            c = pending.get(m)
            if not c:
                continue
            divisor = next((g for g in basis if monomial_divides(g.lm, m)), None)
            if divisor is None:
                if not full:
                    break
                done[m] = pending.pop(m)
                continue
            common = ZZ.gcd(c, divisor.lc)
            a = divisor.lc // common
            b = c // common
            if a < 0:
                a, b = -a, -b
            if a != 1:
                pending = pending.mul_ground(a)
                done = done.mul_ground(a)
            shifted = divisor.poly.mul_term((monomial_ldiv(m, divisor.lm), b))
            pending = pending - shifted
            for mono in shifted:
                if mono not in queued and mono in pending:
                    heappush(heap, (self.neg_key(mono), mono))
                    queued.add(mono)
            steps += 1
            if steps % 64 == 0:
                g = ZZ.gcd(pending.content(), done.content())
                if g > 1:
                    pending = pending.quo_ground(g)
                    done = done.quo_ground(g)
        return _primitive(done + pending)


def _check_generators(gens: Sequence[MultiPoly]) -> VarSet:
    if not gens:
        raise GroebnerError("Generator list is empty")
    varset = gens[0].varset
    for g in gens:
        if g.varset.names != varset.names:
            raise PolynomialError("Generators must share one VarSet")
    return varset


def _update(basis: List[_IntPoly], pairs: Set[Tuple[int, int]], new_index: int,
            alive: List[bool]) -> Set[Tuple[int, int]]:
    """Gebauer-Moeller pair update after appending basis[new_index]."""
    f = basis[new_index].lm
    kept = set()
    for i, j in pairs:
        l_ij = monomial_lcm(basis[i].lm, basis[j].lm)
        if (not monomial_divides(f, l_ij) or l_ij == monomial_lcm(basis[i].lm, f)
                or l_ij == monomial_lcm(basis[j].lm, f)):
            kept.add((i, j))
    by_lcm: Dict[Monomial, List[int]] = {}
    for i in range(new_index):
        if alive[i]:
            by_lcm.setdefault(monomial_lcm(basis[i].lm, f), []).append(i)
    minimal: List[Monomial] = []
    for lcm in sorted(by_lcm, key=lambda m: (sum(m), m)):
        if all(not monomial_divides(other, lcm) for other in minimal):
            minimal.append(lcm)
    for lcm in minimal:
        coprime = any(monomial_mul(basis[i].lm, f) == lcm for i in by_lcm[lcm])
        if not coprime:
            kept.add((min(by_lcm[lcm]), new_index))
    for i in range(new_index):
        if alive[i] and monomial_divides(f, basis[i].lm):
            alive[i] = False
    return kept


def buchberger(gens: Sequence[MultiPoly], order: MonomialOrder,
               max_basis: int = MAX_BASIS_SIZE,
               max_degree: int = MAX_TOTAL_DEGREE) -> GroebnerBasis:
    """
    Compute the reduced Groebner basis of the ideal generated by gens.

    Args:
        gens: Nonempty generators over a common VarSet
        order: Monomial order of the basis
        max_basis: Ceiling on the intermediate basis size
        max_degree: Ceiling on the total degree of any basis element

    Returns:
        GroebnerBasis: Reduced basis, deterministic for fixed input and order

    Raises:
        BlowupError: If a resource ceiling is exceeded
    """
    varset = _check_generators(gens)
    reducer = _Reducer(order)
    inputs = [_to_int_poly(g) for g in gens if not g.is_zero()]
    if not inputs:
        return GroebnerBasis((MultiPoly.zero(varset),), order)
    inputs.sort(key=lambda p: reducer.key(max(p, key=reducer.key)))

    basis: List[_IntPoly] = []
    alive: List[bool] = []
    pairs: Set[Tuple[int, int]] = set()

    def add(poly: PolyElement) -> None:
        nonlocal pairs
        entry = _IntPoly(poly, reducer.key)
        degree = max(sum(m) for m in poly)
        if degree > max_degree:
            raise BlowupError("total degree", degree, max_degree)
        if len(basis) + 1 > max_basis:
            raise BlowupError("basis size", len(basis) + 1, max_basis)
        basis.append(entry)
        alive.append(True)
        pairs = _update(basis, pairs, len(basis) - 1, alive)

    for poly in inputs:
        current = [basis[i] for i in range(len(basis)) if alive[i]]
        reduced = reducer.reduce(poly, current, full=False)
        if reduced:
            add(reduced)

    processed = 0
    while pairs:
        i, j = min(pairs, key=lambda p: (reducer.key(monomial_lcm(basis[p[0]].lm, basis[p[1]].lm)), p))
        pairs.discard((i, j))
        spoly = _s_poly(basis[i], basis[j])
        current = [basis[k] for k in range(len(basis)) if alive[k]]
        remainder = reducer.reduce(spoly, current, full=False) if spoly else spoly
        processed += 1
        if remainder:
            add(remainder)
            if remainder.is_ground:
                break
        if processed % 100 == 0:
            logger.debug(f"buchberger: {processed} pairs, basis {len(basis)}, queue {len(pairs)}")

    generators = _interreduce([basis[k] for k in range(len(basis)) if alive[k]], reducer)
    result = [_to_multipoly(varset, poly).monic(order) for poly in generators]
    result.sort(key=lambda p: order.key(p.leading_term(order)[0]), reverse=True)
    logger.debug(f"buchberger: {processed} pairs processed, reduced basis of {len(result)}")
    return GroebnerBasis(tuple(result), order)


def _s_poly(f: _IntPoly, g: _IntPoly) -> PolyElement:
    lcm = monomial_lcm(f.lm, g.lm)
    common = ZZ.gcd(f.lc, g.lc)
    return (f.poly.mul_term((monomial_ldiv(lcm, f.lm), g.lc // common))
            - g.poly.mul_term((monomial_ldiv(lcm, g.lm), f.lc // common)))


def _interreduce(basis: List[_IntPoly], reducer: _Reducer) -> List[PolyElement]:
    """Minimalize, then fully reduce every element by the others."""
    basis = sorted(basis, key=lambda p: reducer.key(p.lm))
    minimal: List[_IntPoly] = []
    for p in basis:
        if all(not monomial_divides(q.lm, p.lm) for q in minimal):
            minimal.append(p)
    out = []
    for idx, p in enumerate(minimal):
        others = minimal[:idx] + minimal[idx + 1:]
        out.append(reducer.reduce(p.poly, others, full=True))
    return out


def normal_form(p: MultiPoly, basis: GroebnerBasis) -> MultiPoly:
    """Remainder of p modulo the basis, up to a nonzero rational scalar."""
    if p.is_zero():
        return p
    reducer = _Reducer(basis.order)
    gens = [_IntPoly(_to_int_poly(g), reducer.key) for g in basis if not g.is_zero()]
    return _to_multipoly(p.varset, reducer.reduce(_to_int_poly(p), gens, full=True))


def ideal_membership(p: MultiPoly, basis: GroebnerBasis) -> bool:
    return normal_form(p, basis).is_zero()


def s_polynomial(f: MultiPoly, g: MultiPoly, order: MonomialOrder) -> MultiPoly:
    mf, cf = f.leading_term(order)
    mg, cg = g.leading_term(order)
    lcm = monomial_lcm(mf, mg)
    return (f.mul_term(monomial_ldiv(lcm, mf), 1 / cf)
            - g.mul_term(monomial_ldiv(lcm, mg), 1 / cg))


def satisfies_buchberger_criterion(basis: GroebnerBasis) -> bool:
    """Every S-polynomial of basis pairs reduces to zero."""
    gens = [g for g in basis if not g.is_zero()]
    for i in range(len(gens)):
        for j in range(i + 1, len(gens)):
            if not normal_form(s_polynomial(gens[i], gens[j], basis.order), basis).is_zero():
                return False
    return True


def eliminate(gens: Sequence[MultiPoly], drop: Iterable[str], cache=None,
              keep_blocks: Optional[Sequence[Sequence[str]]] = None,
              max_basis: int = MAX_BASIS_SIZE,
              max_degree: int = MAX_TOTAL_DEGREE) -> List[MultiPoly]:
    """
    Generators of the elimination ideal, free of the dropped variables.

    Args:
        gens: Generators over a common VarSet
        drop: Variable names to eliminate
        cache: Optional EliminationCache consulted before computing
        keep_blocks: Optional split of the kept variables into ordered blocks

    Returns:
        List[MultiPoly]: Primitive generators over the VarSet of kept variables,
        empty when the projection is dense
    """
    varset = _check_generators(gens)
    drop = sorted(set(drop), key=varset.index)
    kept = varset.restrict(n for n in varset.names if n not in drop)
    order = MonomialOrder.elimination(varset, drop, keep_blocks)
    if cache is not None:
        hit = cache.get(gens, drop, kept, order)
        if hit is not None:
            logger.info(f"Elimination of {drop} served from cache ({len(hit)} generators)")
            return hit
    logger.info(f"Eliminating {drop} from {len(gens)} generators over {varset.names}")
    basis = buchberger(gens, order, max_basis=max_basis, max_degree=max_degree)
    kept_order = MonomialOrder.grevlex()
    result = []
    for g in basis:
        if g.is_zero() or g.involves(drop):
            continue
        result.append(g.embed(kept).primitive(kept_order))
    logger.info(f"Elimination ideal has {len(result)} generators")
    if cache is not None:
        cache.put(gens, drop, kept, result, order)
    return result
