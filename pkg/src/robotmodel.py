"""Translational parallel manipulators as polynomial constraint systems."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple
import json
import logging

from .config import (BUILTIN_MODELS, MAX_BASIS_SIZE, MAX_TOTAL_DEGREE, ORTHOGLIDE_JOINT_LIMITS,
                     ORTHOGLIDE_LEG_LENGTH, THREADS)
from .groebner import buchberger, eliminate
from .interval import Interval, eval_poly, sqrt_enclosure
from .polycore import Matrix, MonomialOrder, MultiPoly, PolynomialError, VarSet, determinant, parse_poly
from .realroots import IsolatedRoot, compare, isolate

logger = logging.getLogger(__name__)


class ModelError(Exception):
    """Raised for invalid robot models or unsupported model queries."""
    pass


class DkpError(ModelError):
    """Raised when a direct kinematic problem is not zero-dimensional."""
    pass


ORTHOGLIDE = {
    "name": "orthoglide",
    "pose_vars": ["x", "y", "z"],
    "joint_vars": ["rho1", "rho2", "rho3"],
    "parameters": {"l": str(ORTHOGLIDE_LEG_LENGTH)},
    "constraints": [
        "(x - rho1)^2 + y^2 + z^2 - l^2",
        "x^2 + (y - rho2)^2 + z^2 - l^2",
        "x^2 + y^2 + (z - rho3)^2 - l^2",
    ],
    "joint_limits": [[str(b) for b in ORTHOGLIDE_JOINT_LIMITS]] * 3,
}


@dataclass(frozen=True)
class WorkingMode:
    """Sign per leg selecting the larger (+1) or smaller (-1) IKP root."""
    signs: Tuple[int, ...]

    def __post_init__(self):
        if not self.signs or any(s not in (1, -1) for s in self.signs):
            raise ModelError(f"Working mode signs must be +1/-1, got {self.signs}")

    @classmethod
    def all(cls, legs: int) -> List['WorkingMode']:
        return [cls(signs) for signs in product((1, -1), repeat=legs)]

    @classmethod
    def parse(cls, text: str) -> 'WorkingMode':
        chars = [ch for ch in text if ch not in "(), "]
        if not chars or any(ch not in "+-" for ch in chars):
            raise ModelError(f"Invalid working mode '{text}' (expected e.g. '+,+,+')")
        return cls(tuple(1 if ch == '+' else -1 for ch in chars))

    @property
    def label(self) -> str:
        return "".join('+' if s > 0 else '-' for s in self.signs)

    def __str__(self) -> str:
        return "(" + ",".join(self.label) + ")"


@dataclass(frozen=True)
class LegQuadratic:
    """A constraint solved for its single joint: a*rho^2 + b*rho + c = 0."""
    joint: str
    a: MultiPoly
    b: MultiPoly
    c: MultiPoly

    @classmethod
    def from_poly(cls, p: MultiPoly, joint: str) -> 'LegQuadratic':
        parts = p.coefficients_in(joint)
        if not parts or max(parts) > 2 or max(parts) < 1:
            raise ModelError(f"Constraint is not of degree 1 or 2 in {joint}: {p}")
        zero = MultiPoly.zero(p.varset)
        return cls(joint, parts.get(2, zero), parts.get(1, zero), parts.get(0, zero))

    @property
    def is_linear(self) -> bool:
        return self.a.is_zero()

    @cached_property
    def disc(self) -> MultiPoly:
        return self.b * self.b - self.a * self.c * 4

    def centre_and_radicand(self) -> Tuple[MultiPoly, MultiPoly, MultiPoly]:
        """(-b, disc, 2a): the roots are (-b +- sqrt(disc)) / (2a)."""
        return -self.b, self.disc, self.a * 2

    def roots(self, point: Mapping[str, Fraction]) -> List[Tuple[int, IsolatedRoot]]:
        """Real roots at a rational point, labelled -1 (smaller) and +1 (larger)."""
        univariate = (self.a * MultiPoly.var(self.a.varset, self.joint, 2)
                      + self.b * MultiPoly.var(self.a.varset, self.joint) + self.c).specialize(point)
        if univariate.is_zero():
            raise ModelError(f"Leg {self.joint} is degenerate at {dict(point)}")
        if univariate.is_constant():
            return []
        found = isolate(univariate)
        if len(found) == 2:
            return [(-1, found[0]), (1, found[1])]
        if len(found) == 1 and found[0].multiplicity == 2:
            # both branches meet at the double root
            return [(-1, found[0]), (1, found[0])]
        return [(1, r) for r in found]

    def branch(self, point: Mapping[str, Interval], sign: int,
               bits: Optional[int] = 80) -> Optional[Interval]:
        """Enclosure of the signed root over a box, None where certainly unreal."""
        if self.is_linear:
            if sign < 0:
                return None
            return (-eval_poly(self.c, point, bits)) / eval_poly(self.b, point, bits)
        d = eval_poly(self.disc, point, bits)
        if d.hi < 0:
            return None
        a = eval_poly(self.a, point, bits)
        sa = a.sign()
        if not sa:
            raise ModelError(f"Leading coefficient of {self.joint} vanishes on the box")
        root = sqrt_enclosure(d, bits or 80, clip=True)
        b = eval_poly(self.b, point, bits)
        return ((-b + root * (sign * sa)) / (a * 2)).round_out(bits)


@dataclass(frozen=True)
class RobotModel:
    """Polynomial constraints F(rho, X) = 0 with one constraint per joint."""
    name: str
    pose_vars: Tuple[str, ...]
    joint_vars: Tuple[str, ...]
    constraints: Tuple[MultiPoly, ...]
    joint_limits: Tuple[Tuple[Fraction, Fraction], ...]
    parameters: Tuple[Tuple[str, Fraction], ...] = field(default=())

    def __post_init__(self):
        if len(self.constraints) != len(self.joint_vars):
            raise ModelError(f"Expected {len(self.joint_vars)} constraints, "
                             f"got {len(self.constraints)}")
        if len(self.joint_limits) != len(self.joint_vars):
            raise ModelError("Need one joint limit interval per joint")
        for i, p in enumerate(self.constraints):
            if p.varset.names != self.varset.names:
                raise ModelError(f"Constraint {i + 1} is not over {self.varset.names}")
            if not p.involves(self.joint_vars):
                raise ModelError(f"Constraint {i + 1} involves no joint variable")
        for lo, hi in self.joint_limits:
            if lo >= hi:
                raise ModelError(f"Empty joint limit interval ({lo}, {hi}]")
        leg = dict(self.parameters).get('l')
        if leg is not None and leg <= 0:
            raise ModelError(f"Leg length must be positive, got {leg}")

    @property
    def varset(self) -> VarSet:
        return VarSet(self.pose_vars + self.joint_vars)

    @property
    def pose_varset(self) -> VarSet:
        return VarSet(self.pose_vars)

    @property
    def leg_length(self) -> Optional[Fraction]:
        return dict(self.parameters).get('l')

    def is_decoupled(self) -> bool:
        for p, joint in zip(self.constraints, self.joint_vars):
            others = [j for j in self.joint_vars if j != joint]
            if p.involves(others) or not 1 <= p.degree(joint) <= 2:
                return False
        return True

    @cached_property
    def legs(self) -> Tuple[LegQuadratic, ...]:
        if not self.is_decoupled():
            raise ModelError(f"Model '{self.name}' does not have one quadratic per joint")
        return tuple(LegQuadratic.from_poly(p, j) for p, j in zip(self.constraints, self.joint_vars))

    def within_limits(self, index: int, root: IsolatedRoot) -> bool:
        lo, hi = self.joint_limits[index]
        return compare(root, lo) > 0 and compare(root, hi) <= 0

    def interval_within_limits(self, index: int, value: Interval) -> Optional[bool]:
        """True/False when certified, None when the enclosure meets a limit."""
        lo, hi = self.joint_limits[index]
        if value.lo > lo and value.hi <= hi:
            return True
        if value.hi <= lo or value.lo > hi:
            return False
        return None


@dataclass(frozen=True)
class SingularityLoci:
    det_a: MultiPoly
    det_b: MultiPoly
    xi: MultiPoly
    eps: MultiPoly
    mu: Tuple[MultiPoly, ...] = ()
    xi_generators: Tuple[MultiPoly, ...] = ()
    eps_generators: Tuple[MultiPoly, ...] = ()


@dataclass(frozen=True)
class IkpSolution:
    mode: WorkingMode
    rho: Tuple[IsolatedRoot, ...]
    feasible: bool


def jacobians(m: RobotModel) -> Tuple[Matrix, Matrix]:
    """A = dF/dX and B = dF/drho."""
    a = [[p.diff(v) for v in m.pose_vars] for p in m.constraints]
    b = [[p.diff(v) for v in m.joint_vars] for p in m.constraints]
    return a, b


def det_a(m: RobotModel) -> MultiPoly:
    return determinant(jacobians(m)[0])


def det_b(m: RobotModel) -> MultiPoly:
    return determinant(jacobians(m)[1])


def _hypersurface(gens: Sequence[MultiPoly], what: str) -> MultiPoly:
    if not gens:
        raise ModelError(f"Projection {what} is dense (no eliminant)")
    if len(gens) > 1:
        logger.warning(f"Projection {what} is not principal ({len(gens)} generators); "
                       f"using the lowest-degree generator")
    return min(gens, key=lambda g: (g.total_degree(), len(g.terms)))


def project_singularities(m: RobotModel, cache=None, max_basis: int = MAX_BASIS_SIZE,
                          max_degree: int = MAX_TOTAL_DEGREE,
                          with_joint_limits: bool = True) -> SingularityLoci:
    """
    Project the parallel singularity variety into the workspace and the joint space.

    Args:
        m: Robot model
        cache: Optional EliminationCache

    Returns:
        SingularityLoci: det(A), det(B), xi(X), eps(rho) and the joint-limit surfaces
    """
    da = det_a(m)
    system = list(m.constraints) + [da]
    logger.info(f"Projecting singularities of '{m.name}' (deg det(A) = {da.total_degree()})")
    xi_gens = eliminate(system, m.joint_vars, cache=cache, max_basis=max_basis, max_degree=max_degree)
    eps_gens = eliminate(system, m.pose_vars, cache=cache, max_basis=max_basis, max_degree=max_degree)
    xi = _hypersurface(xi_gens, "xi(X)")
    eps = _hypersurface(eps_gens, "eps(rho)")
    logger.info(f"deg xi = {xi.total_degree()} ({len(xi.terms)} terms), "
                f"deg eps = {eps.total_degree()} ({len(eps.terms)} terms)")
    mu = tuple(project_joint_limits(m, cache=cache)) if with_joint_limits else ()
    return SingularityLoci(da, det_b(m), xi, eps, mu, tuple(xi_gens), tuple(eps_gens))


def project_joint_limits(m: RobotModel, cache=None) -> List[MultiPoly]:
    """Workspace surfaces mu(X) of every joint boundary, joint-major, lower bound first."""
    surfaces = []
    for joint, (lo, hi) in zip(m.joint_vars, m.joint_limits):
        for bound in (lo, hi):
            boundary = MultiPoly.var(m.varset, joint) - bound
            gens = eliminate(list(m.constraints) + [boundary], m.joint_vars, cache=cache)
            surfaces.append(_hypersurface(gens, f"mu({joint} = {bound})"))
    return surfaces


def ikp(m: RobotModel, pose: Sequence[Fraction]) -> List[IkpSolution]:
    """
    All real inverse kinematic solutions at a rational pose.

    Returns:
        List[IkpSolution]: One per working mode with a real solution; empty when
        some leg cannot reach the pose
    """
    point = dict(zip(m.pose_vars, (Fraction(v) for v in pose)))
    per_leg = []
    for leg in m.legs:
        roots = leg.roots(point)
        if not roots:
            logger.debug(f"IKP: leg {leg.joint} unreachable at {pose}")
            return []
        per_leg.append(roots)
    solutions = []
    for combo in product(*per_leg):
        mode = WorkingMode(tuple(sign for sign, _ in combo))
        rho = tuple(root for _, root in combo)
        feasible = all(m.within_limits(i, r) for i, r in enumerate(rho))
        solutions.append(IkpSolution(mode, rho, feasible))
    return solutions


def branch_values(m: RobotModel, pose: Mapping[str, Interval], mode: WorkingMode,
                  bits: Optional[int] = 80) -> Tuple[Optional[Interval], ...]:
    """Joint enclosures on one working mode over a pose box (None where unreal)."""
    if len(mode.signs) != len(m.legs):
        raise ModelError(f"Mode {mode} does not match {len(m.legs)} legs")
    return tuple(leg.branch(pose, sign, bits) for leg, sign in zip(m.legs, mode.signs))


def dkp_count(m: RobotModel, rho: Sequence[Fraction]) -> int:
    """
    Number of distinct real poses with the given joint values.

    Raises:
        DkpError: If the specialised system is not zero-dimensional or not in
            shape position under lex
    """
    point = dict(zip(m.joint_vars, (Fraction(v) for v in rho)))
    pose = m.pose_varset
    system = [p.specialize(point).embed(pose) for p in m.constraints]
    system = [p for p in system if not p.is_zero()]
    if not system:
        raise DkpError(f"Every constraint vanishes at rho = {tuple(rho)}")
    order = MonomialOrder.lex()
    basis = buchberger(system, order)
    if basis.is_unit():
        return 0
    gens = [g for g in basis if not g.is_zero()]
    leads = [g.leading_term(order)[0] for g in gens]
    n = len(pose)
    for i in range(n):
        if not any(lm[i] > 0 and sum(lm) == lm[i] for lm in leads):
            raise DkpError(f"Direct kinematics at rho = {tuple(rho)} is positive-dimensional")
    last = pose.names[-1]
    shape = len(gens) == n and all(
        sum(lm) == 1 and lm[i] == 1 for i, lm in enumerate(leads[:-1]))
    univariate = [g for g in gens if g.variables() == (last,)]
    if not shape or not univariate:
        raise DkpError(f"Direct kinematics at rho = {tuple(rho)} is not in shape position")
    return len(isolate(univariate[0]))


def workspace_member(m: RobotModel, pose: Sequence[Fraction]) -> Tuple[int, int]:
    """(total real IKP solutions, solutions within the joint limits)."""
    solutions = ikp(m, pose)
    return len(solutions), sum(1 for s in solutions if s.feasible)


def boundary_sides(m: RobotModel, pose: Sequence[Fraction],
                   mu: Sequence[MultiPoly]) -> Tuple[int, ...]:
    point = dict(zip(m.pose_vars, (Fraction(v) for v in pose)))
    signs = []
    for surface in mu:
        value = surface.evaluate(point)
        signs.append((value > 0) - (value < 0))
    return tuple(signs)


def _probe_one(m: RobotModel, space: str, point: Tuple[Fraction, ...]) -> Dict[str, Any]:
    if space == 'workspace':
        total, feasible = workspace_member(m, point)
        return {"point": point, "total": total, "feasible": feasible}
    try:
        count = dkp_count(m, point)
    except DkpError as e:
        logger.debug(f"DKP probe skipped at {point}: {e}")
        count = None
    return {"point": point, "dkp": count}


def probe_grid(m: RobotModel, points: Sequence[Tuple[Fraction, ...]], space: str = 'workspace',
               threads: int = THREADS) -> List[Dict[str, Any]]:
    """Pointwise IKP (workspace) or DKP (joint space) counts; rows in input order."""
    if space not in ('workspace', 'joint'):
        raise ModelError(f"Unknown probe space '{space}'")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(lambda p: _probe_one(m, space, p), points))
    logger.info(f"Probed {len(rows)} {space} points")
    return rows


def _rational(value: Any, what: str) -> Fraction:
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError) as e:
        raise ModelError(f"{what}: '{value}' is not a rational number") from e


def model_from_dict(data: Mapping[str, Any], leg_length: Optional[Fraction] = None) -> RobotModel:
    """Build a model from its JSON form; parameters are substituted into the constraints."""
    for key in ("pose_vars", "joint_vars", "constraints", "joint_limits"):
        if key not in data:
            raise ModelError(f"Model is missing field '{key}'")
    pose_vars = tuple(data["pose_vars"])
    joint_vars = tuple(data["joint_vars"])
    params = {k: _rational(v, f"parameter {k}") for k, v in data.get("parameters", {}).items()}
    if leg_length is not None:
        if 'l' not in params:
            raise ModelError("Model has no leg length parameter 'l'")
        params['l'] = Fraction(leg_length)
    try:
        full = VarSet(pose_vars + joint_vars)
        parse_set = full.extend(params)
    except PolynomialError as e:
        raise ModelError(f"Invalid variables: {e}") from e
    constraints = []
    for i, text in enumerate(data["constraints"]):
        try:
            p = parse_poly(text, parse_set).specialize(params).embed(full)
        except PolynomialError as e:
            raise ModelError(f"constraints[{i}]: {e}") from e
        constraints.append(p)
    limits = []
    for i, pair in enumerate(data["joint_limits"]):
        if len(pair) != 2:
            raise ModelError(f"joint_limits[{i}] must be [min, max]")
        limits.append((_rational(pair[0], f"joint_limits[{i}]"), _rational(pair[1], f"joint_limits[{i}]")))
    return RobotModel(
        name=str(data.get("name", "model")),
        pose_vars=pose_vars,
        joint_vars=joint_vars,
        constraints=tuple(constraints),
        joint_limits=tuple(limits),
        parameters=tuple(sorted(params.items())),
    )


def load_model(source: str, leg_length: Optional[Fraction] = None) -> RobotModel:
    """Load a built-in model by name or a JSON model file."""
    if source in BUILTIN_MODELS:
        data = ORTHOGLIDE
    else:
        path = Path(source)
        try:
            data = json.loads(path.read_text())
        except OSError as e:
            raise ModelError(f"Cannot read model file {source}: {e}") from e
        except json.JSONDecodeError as e:
            raise ModelError(f"Malformed model file {source} (line {e.lineno}, column {e.colno}): "
                             f"{e.msg}") from e
    model = model_from_dict(data, leg_length)
    logger.info(f"Loaded model '{model.name}' with {len(model.joint_vars)} legs")
    return model
