"""Trigonometric trajectories, their algebraic form and their joint-space image."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple
import csv
import json
import logging

import numpy as np

from .config import BUILTIN_TRAJECTORIES, PI_BITS, THREADS
from .groebner import eliminate
from .interval import Interval, pi_enclosure, sin_cos_enclosure
from .polycore import MultiPoly, PolynomialError, VarSet
from .robotmodel import LegQuadratic, ModelError, RobotModel, WorkingMode

logger = logging.getLogger(__name__)

SIN = 'sin_t'
COS = 'cos_t'
TIME = 't'


class TrajectoryError(Exception):
    """Raised for invalid trajectories or incompatible trajectory/model pairs."""
    pass


@lru_cache(maxsize=None)
def _chebyshev(kind: str, n: int) -> Tuple[int, ...]:
    """Coefficients of T_n or U_n, lowest degree first."""
    if n == 0:
        return (1,)
    if n == 1:
        return (0, 1) if kind == 'T' else (0, 2)
    prev = list(_chebyshev(kind, n - 2))
    cur = list(_chebyshev(kind, n - 1))
    out = [0] + [2 * c for c in cur]
    for i, c in enumerate(prev):
        out[i] -= c
    return tuple(out)


@dataclass(frozen=True)
class Harmonic:
    k: int
    cos: Fraction = Fraction(0)
    sin: Fraction = Fraction(0)


@dataclass(frozen=True)
class TrigPoly:
    """constant + linear*t + sum(cos_k cos(kt) + sin_k sin(kt))."""
    constant: Fraction = Fraction(0)
    harmonics: Tuple[Harmonic, ...] = ()
    linear: Fraction = Fraction(0)

    def __post_init__(self):
        ks = [h.k for h in self.harmonics]
        if any(k < 1 for k in ks):
            raise TrajectoryError(f"Harmonics must be positive integers, got {ks}")
        if len(set(ks)) != len(ks):
            raise TrajectoryError(f"Duplicate harmonics {ks}")

    def to_poly(self, varset: VarSet) -> MultiPoly:
        """Exact expansion in sin_t, cos_t (and t) through Chebyshev polynomials."""
        s = MultiPoly.var(varset, SIN)
        c = MultiPoly.var(varset, COS)
        out = MultiPoly.const(varset, self.constant)
        if self.linear:
            if TIME not in varset:
                raise TrajectoryError("Linear term needs the time variable in the VarSet")
            out = out + MultiPoly.var(varset, TIME).scale(self.linear)
        for h in self.harmonics:
            if h.cos:
                out = out + _in(c, _chebyshev('T', h.k)).scale(h.cos)
            if h.sin:
                if h.k % 2:
                    sign = -1 if (h.k // 2) % 2 else 1
                    term = _in(s, _chebyshev('T', h.k)).scale(sign)
                else:
                    term = s * _in(c, _chebyshev('U', h.k - 1))
                out = out + term.scale(h.sin)
        return out

    def enclosure(self, t: Interval, bits: int = 64) -> Interval:
        total = Interval(self.constant) + t * self.linear
        for h in self.harmonics:
            sin_k, cos_k = sin_cos_enclosure(t * h.k, bits)
            total = total + cos_k * h.cos + sin_k * h.sin
        return total.round_out(bits)

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        """Float values for display curves."""
        t = np.asarray(t, dtype=float)
        out = np.full_like(t, float(self.constant)) + float(self.linear) * t
        for h in self.harmonics:
            out += float(h.cos) * np.cos(h.k * t) + float(h.sin) * np.sin(h.k * t)
        return out


def _in(x: MultiPoly, coeffs: Sequence[int]) -> MultiPoly:
    out = MultiPoly.zero(x.varset)
    power = MultiPoly.const(x.varset, 1)
    for coeff in coeffs:
        if coeff:
            out = out + power.scale(coeff)
        power = power * x
    return out


@dataclass(frozen=True)
class TimeDomain:
    """Closed t-interval [lo, hi], optionally in units of pi."""
    lo: Fraction
    hi: Fraction
    unit: Optional[str] = None

    def __post_init__(self):
        if self.unit not in (None, 'pi'):
            raise TrajectoryError(f"Unknown domain unit '{self.unit}'")
        if self.lo >= self.hi:
            raise TrajectoryError(f"Empty time domain [{self.lo}, {self.hi}]")

    def enclosure(self, bits: int = PI_BITS) -> Interval:
        """Interval containing [lo, hi] in radians."""
        if self.unit is None:
            return Interval(self.lo, self.hi)
        pi = pi_enclosure(bits)
        lo = pi * self.lo
        hi = pi * self.hi
        return Interval(lo.lo, hi.hi)

    def is_full_turn(self) -> bool:
        return self.unit == 'pi' and self.hi - self.lo == 2

    def bounds(self) -> Tuple[float, float]:
        scale = float(pi_enclosure(PI_BITS).mid) if self.unit == 'pi' else 1.0
        return float(self.lo) * scale, float(self.hi) * scale

    def samples(self, n: int) -> List[Fraction]:
        """n rational sample times covering the domain (display and feasibility probes)."""
        if n < 2:
            raise TrajectoryError("Need at least two samples")
        scale = pi_enclosure(PI_BITS).mid if self.unit == 'pi' else Fraction(1)
        step = (self.hi - self.lo) / (n - 1)
        return [(self.lo + step * i) * scale for i in range(n)]

    def describe(self) -> str:
        suffix = "*pi" if self.unit else ""
        return f"[{self.lo}{suffix}, {self.hi}{suffix}]"


@dataclass(frozen=True)
class Trajectory:
    name: str
    coords: Tuple[TrigPoly, ...]
    domain: TimeDomain
    pose_vars: Tuple[str, ...] = ('x', 'y', 'z')

    def __post_init__(self):
        if len(self.coords) != len(self.pose_vars):
            raise TrajectoryError(f"Need {len(self.pose_vars)} coordinates, got {len(self.coords)}")

    @property
    def is_mixed(self) -> bool:
        """True when t appears outside sin and cos."""
        return any(c.linear for c in self.coords)

    @property
    def trig_vars(self) -> Tuple[str, ...]:
        return (SIN, COS, TIME) if self.is_mixed else (SIN, COS)

    def pose_enclosure(self, t: Interval, bits: int = 64) -> Dict[str, Interval]:
        return {v: c.enclosure(t, bits) for v, c in zip(self.pose_vars, self.coords)}


@dataclass(frozen=True)
class JointSpaceImage:
    """Generators of the joint-space image and the per-joint quadratics among them."""
    generators: Tuple[MultiPoly, ...]
    varset: VarSet
    legs: Tuple[LegQuadratic, ...]
    branch_count: int
    joint_limits: Tuple[Tuple[Fraction, Fraction], ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class JointSample:
    t: Fraction
    rho: Tuple[Optional[Interval], ...]
    reachable: bool
    feasible: bool


def circle_relation(varset: VarSet) -> MultiPoly:
    return MultiPoly.var(varset, SIN, 2) + MultiPoly.var(varset, COS, 2) - 1


def algebraize(tr: Trajectory, varset: Optional[VarSet] = None) -> List[MultiPoly]:
    """Equations X_i - phi_i(sin_t, cos_t [, t]) and the circle relation, primitive."""
    varset = varset or VarSet(tr.pose_vars + tr.trig_vars)
    out = []
    for var, coord in zip(tr.pose_vars, tr.coords):
        eq = MultiPoly.var(varset, var) - coord.to_poly(varset)
        out.append(eq.primitive())
    out.append(circle_relation(varset))
    return out


def build_psi(m: RobotModel, tr: Trajectory) -> List[MultiPoly]:
    """Model constraints and trajectory equations over (X, rho, sin_t, cos_t [, t])."""
    if tuple(tr.pose_vars) != tuple(m.pose_vars):
        raise TrajectoryError(f"Trajectory coordinates {tr.pose_vars} do not match "
                              f"model pose variables {m.pose_vars}")
    varset = VarSet(m.pose_vars + m.joint_vars + tr.trig_vars)
    constraints = [p.embed(varset) for p in m.constraints]
    return constraints + algebraize(tr, varset)


def project_to_jointspace(psi: Sequence[MultiPoly], m: RobotModel, cache=None) -> JointSpaceImage:
    """Eliminate the pose variables from psi, keeping joints ahead of the time variables."""
    gens = eliminate(psi, m.pose_vars, cache=cache, keep_blocks=[m.joint_vars])
    if not gens:
        raise TrajectoryError("Joint-space image is dense")
    varset = gens[0].varset
    legs = []
    for joint in m.joint_vars:
        others = [j for j in m.joint_vars if j != joint]
        candidates = [g for g in gens
                      if g.involves([joint]) and not g.involves(others) and 1 <= g.degree(joint) <= 2]
        if not candidates:
            raise TrajectoryError(f"No generator solves for {joint} alone")
        best = min(candidates, key=lambda g: (g.degree(joint), len(g.terms)))
        legs.append(LegQuadratic.from_poly(best, joint))
    count = 1
    for leg in legs:
        count *= 1 if leg.is_linear else 2
    logger.info(f"Joint-space image: {len(gens)} generators, {count} branches")
    return JointSpaceImage(tuple(gens), varset, tuple(legs), count, m.joint_limits)


def _time_point(t: Interval, bits: int) -> Dict[str, Interval]:
    s, c = sin_cos_enclosure(t, bits)
    return {SIN: s, COS: c, TIME: t}


def _limits_ok(limits, index: int, value: Interval) -> bool:
    if not limits:
        return True
    lo, hi = limits[index]
    return value.lo > lo and value.hi <= hi


def joint_path_eval(img: JointSpaceImage, mode: WorkingMode, samples: Sequence[Fraction],
                    bits: int = 80) -> List[JointSample]:
    """Certified joint values on one working mode at each sample time."""
    if len(mode.signs) != len(img.legs):
        raise TrajectoryError(f"Mode {mode} does not match {len(img.legs)} legs")
    rows = []
    for t in samples:
        point = _time_point(Interval(t), bits)
        rho = []
        for leg, sign in zip(img.legs, mode.signs):
            try:
                rho.append(leg.branch(point, sign, bits))
            except ModelError as e:
                logger.debug(f"Branch {leg.joint} undefined at t = {float(t):.6g}: {e}")
                rho.append(None)
        reachable = all(v is not None for v in rho)
        feasible = reachable and all(_limits_ok(img.joint_limits, i, v) for i, v in enumerate(rho))
        rows.append(JointSample(Fraction(t), tuple(rho), reachable, feasible))
    return rows


def joint_paths(img: JointSpaceImage, modes: Sequence[WorkingMode], samples: Sequence[Fraction],
                threads: int = THREADS) -> Dict[WorkingMode, List[JointSample]]:
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(lambda mode: joint_path_eval(img, mode, samples), modes))
    return dict(zip(modes, results))


def feasible_modes(img: JointSpaceImage, tr: Trajectory, samples: int = 64,
                   threads: int = THREADS) -> List[WorkingMode]:
    """Working modes whose branch is within the joint limits at every sample."""
    modes = WorkingMode.all(len(img.legs))
    paths = joint_paths(img, modes, tr.domain.samples(samples), threads)
    feasible = [mode for mode in modes if all(row.feasible for row in paths[mode])]
    logger.info(f"Feasible modes on '{tr.name}': {[str(m) for m in feasible]}")
    return feasible


def branch_closed_form(img: JointSpaceImage, leg: int) -> Tuple[MultiPoly, MultiPoly]:
    """(centre, radicand) with rho = centre +- sqrt(radicand); needs a constant leading coefficient."""
    quad = img.legs[leg]
    if quad.is_linear or not quad.a.is_constant():
        raise TrajectoryError(f"Leg {quad.joint} has no constant leading coefficient")
    a = quad.a.constant_value()
    centre = (-quad.b).scale(1 / (2 * a))
    radicand = quad.disc.scale(1 / (4 * a * a))
    return centre, radicand


def export_polylines(rows: Sequence[JointSample], path: Path, joint_vars: Sequence[str]) -> None:
    """CSV columns t, <joints>, feasible; blank cells where a branch is unreal."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(['t', *joint_vars, 'feasible'])
        for row in rows:
            values = ['' if v is None else f"{float(v.mid):.12g}" for v in row.rho]
            writer.writerow([f"{float(row.t):.12g}", *values, int(row.feasible)])


def _harm(k: int, cos: str = "0", sin: str = "0") -> Dict[str, Any]:
    return {"k": k, "cos": cos, "sin": sin}


BUILTINS: Dict[str, Dict[str, Any]] = {
    "heart1": {
        "name": "heart1",
        "domain": {"lo": "-1", "hi": "1", "unit": "pi"},
        "coords": {
            "x": {"harmonics": [_harm(1, sin="6/7"), _harm(3, sin="-2/7")]},
            "y": {"harmonics": [_harm(1, cos="13/14"), _harm(2, cos="-5/14"),
                                _harm(3, cos="-1/10"), _harm(4, cos="-1/14")]},
            "z": {"constant": "1"},
        },
    },
    "heart2": {
        "name": "heart2",
        "domain": {"lo": "-1", "hi": "1", "unit": "pi"},
        "coords": {
            "x": {"harmonics": [_harm(1, sin="3/5"), _harm(3, sin="-1/5")]},
            "y": {"harmonics": [_harm(1, cos="13/20"), _harm(2, cos="-1/4"),
                                _harm(3, cos="-1/20"), _harm(4, cos="-1/20")]},
            "z": {"constant": "1"},
        },
    },
    "helix": {
        "name": "helix",
        "domain": {"lo": "0", "hi": "20"},
        "coords": {
            "x": {"harmonics": [_harm(1, sin="1")]},
            "y": {"harmonics": [_harm(1, cos="1")]},
            "z": {"linear": "1/20"},
        },
    },
}


def _rational(value: Any, what: str) -> Fraction:
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError) as e:
        raise TrajectoryError(f"{what}: '{value}' is not a rational number") from e


def trajectory_from_dict(data: Mapping[str, Any],
                         pose_vars: Sequence[str] = ('x', 'y', 'z')) -> Trajectory:
    for key in ("coords", "domain"):
        if key not in data:
            raise TrajectoryError(f"Trajectory is missing field '{key}'")
    coords = []
    for var in pose_vars:
        entry = data["coords"].get(var)
        if entry is None:
            raise TrajectoryError(f"Trajectory has no coordinate '{var}'")
        harmonics = []
        for i, h in enumerate(entry.get("harmonics", [])):
            try:
                k = int(h["k"])
            except (KeyError, TypeError, ValueError) as e:
                raise TrajectoryError(f"{var}.harmonics[{i}]: missing or invalid 'k'") from e
            harmonics.append(Harmonic(k, _rational(h.get("cos", 0), f"{var}.harmonics[{i}].cos"),
                                      _rational(h.get("sin", 0), f"{var}.harmonics[{i}].sin")))
        coords.append(TrigPoly(_rational(entry.get("constant", 0), f"{var}.constant"),
                               tuple(harmonics), _rational(entry.get("linear", 0), f"{var}.linear")))
    dom = data["domain"]
    domain = TimeDomain(_rational(dom.get("lo"), "domain.lo"), _rational(dom.get("hi"), "domain.hi"),
                        dom.get("unit"))
    tr = Trajectory(str(data.get("name", "trajectory")), tuple(coords), domain, tuple(pose_vars))
    if tr.is_mixed and domain.unit is not None:
        raise TrajectoryError("Trajectories linear in t need a rational (non-pi) domain")
    return tr


def load_trajectory(source: str, pose_vars: Sequence[str] = ('x', 'y', 'z')) -> Trajectory:
    """Load a built-in trajectory by name or a JSON trajectory file."""
    if source in BUILTIN_TRAJECTORIES:
        data = BUILTINS[source]
    else:
        try:
            data = json.loads(Path(source).read_text())
        except OSError as e:
            raise TrajectoryError(f"Cannot read trajectory file {source}: {e}") from e
        except json.JSONDecodeError as e:
            raise TrajectoryError(f"Malformed trajectory file {source} (line {e.lineno}, "
                                  f"column {e.colno}): {e.msg}") from e
    try:
        tr = trajectory_from_dict(data, pose_vars)
    except PolynomialError as e:
        raise TrajectoryError(str(e)) from e
    logger.info(f"Loaded trajectory '{tr.name}' on {tr.domain.describe()}")
    return tr
