"""Certified detection of parallel singularities along a trajectory."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple
import csv
import json
import logging
import time

import numpy as np
from tabulate import tabulate

from .config import (DEFAULT_DECIMALS, DEFAULT_SAMPLES, FEASIBILITY_SAMPLES, PI_BITS, REPORT_SCHEMA,
                     ROOT_WIDTH_EXPONENT, THREADS)
from .interval import Interval, IntervalError, eval_poly, pi_enclosure, sin_cos_enclosure
from .polycore import MultiPoly, VarSet
from .realroots import (CircleRoot, MixedRoot, RootIsolationError, isolate_mixed, period_images,
                        reduce_on_circle, refine_mixed, solve_circle_system)
from .robotmodel import ModelError, RobotModel, SingularityLoci, WorkingMode, project_singularities
from .trajectory import (COS, SIN, TIME, JointSpaceImage, Trajectory, build_psi, circle_relation,
                         feasible_modes, project_to_jointspace)

logger = logging.getLogger(__name__)

REAL = 'real-singularity'
SPURIOUS = 'spurious-projection'

VERDICT_FREE = 'singularity-free'
VERDICT_SINGULAR = 'singular'
VERDICT_INFEASIBLE = 'infeasible'

# Successive decimal widths tried when classifying an event.
CLASSIFY_EXPONENTS = (ROOT_WIDTH_EXPONENT, 20, 30, 45, 60)


class ScanError(Exception):
    """Raised when a candidate event cannot be classified or the trajectory cannot be scanned."""
    pass


@dataclass(frozen=True)
class SingularEvent:
    """One root of the restricted singularity curve, with its classification."""
    label: str
    t: Interval
    sin_box: Interval
    cos_box: Interval
    pose: Tuple[Interval, ...]
    rho: Tuple[Optional[Interval], ...]
    classification: str
    det_a_sign_change: bool
    vanishing_modes: Tuple[WorkingMode, ...] = ()
    feasible: bool = True
    boundary: bool = False

    @property
    def is_real(self) -> bool:
        return self.classification == REAL


@dataclass
class ScanReport:
    trajectory: str
    model: str
    domain: str
    mode: Optional[WorkingMode]
    feasible_modes: Tuple[WorkingMode, ...]
    events: List[SingularEvent]
    verdict: str
    mu_degree: int
    mode_feasible: bool
    pose_vars: Tuple[str, ...] = ('x', 'y', 'z')
    joint_vars: Tuple[str, ...] = ('rho1', 'rho2', 'rho3')
    elapsed: float = field(default=0.0, compare=False)

    @property
    def candidates(self) -> int:
        return len(self.events)

    @property
    def real_events(self) -> List[SingularEvent]:
        return [e for e in self.events if e.is_real]


@dataclass(frozen=True)
class _Candidate:
    t: Interval
    sin: Interval
    cos: Interval
    refine: Callable[[Fraction], Tuple[Interval, Interval, Interval]]


def restrict_xi(loci: SingularityLoci, tr: Trajectory) -> MultiPoly:
    """xi(phi(t)) reduced modulo the circle relation and made primitive."""
    varset = VarSet(tr.trig_vars)
    images = {v: coord.to_poly(varset) for v, coord in zip(tr.pose_vars, tr.coords)}
    mu_t = loci.xi.substitute(images, varset, lambda q: reduce_on_circle(q, SIN, COS))
    mu_t = reduce_on_circle(mu_t, SIN, COS)
    if mu_t.is_zero():
        raise ScanError(f"Trajectory '{tr.name}' lies inside the singularity surface")
    mu_t = mu_t.primitive()
    logger.info(f"Restricted singularity curve on '{tr.name}': total degree {mu_t.total_degree()}, "
                f"{len(mu_t.terms)} terms")
    return mu_t


def _endpoint_enclosures(tr: Trajectory) -> Tuple[Interval, Interval]:
    dom = tr.domain.enclosure(PI_BITS)
    if tr.domain.unit is None:
        return Interval(dom.lo), Interval(dom.hi)
    pi = pi_enclosure(PI_BITS)
    return pi * tr.domain.lo, pi * tr.domain.hi


def _circle_candidate(root: CircleRoot, shift: int) -> _Candidate:
    two_pi = pi_enclosure(PI_BITS) * 2

    def refine(width: Fraction) -> Tuple[Interval, Interval, Interval]:
        finer = root.refine(width)
        s, c = finer.box()
        return finer.t_interval + two_pi * shift, s, c

    s, c = root.box()
    return _Candidate(root.t_interval + two_pi * shift, s, c, refine)


def _mixed_candidate(root: MixedRoot, mu_t: MultiPoly) -> _Candidate:
    def refine(width: Fraction) -> Tuple[Interval, Interval, Interval]:
        finer = refine_mixed(root, mu_t, width, SIN, COS, TIME)
        return finer.t_interval, finer.sin_enclosure, finer.cos_enclosure

    return _Candidate(root.t_interval, root.sin_enclosure, root.cos_enclosure, refine)


def candidate_events(mu_t: MultiPoly, tr: Trajectory) -> List[_Candidate]:
    """Certified roots of the restricted curve over the whole time domain, sorted by t."""
    dom = tr.domain.enclosure(PI_BITS)
    if tr.is_mixed:
        domain = Interval(tr.domain.lo, tr.domain.hi)
        return [_mixed_candidate(r, mu_t) for r in isolate_mixed(mu_t, domain, SIN, COS, TIME)]
    system = [mu_t, circle_relation(mu_t.varset)]
    roots = solve_circle_system(system, SIN, COS)
    if tr.domain.is_full_turn() and tr.domain.lo == -1:
        return [_circle_candidate(r, 0) for r in roots]
    found = []
    for r in roots:
        for shift, _ in period_images(r.t_interval, dom):
            found.append(_circle_candidate(r, shift))
    found.sort(key=lambda cand: cand.t.lo)
    return found


def _trig_point(t: Interval, s: Interval, c: Interval) -> Dict[str, Interval]:
    return {SIN: s, COS: c, TIME: t}


def _pose_at(coords: Mapping[str, MultiPoly], point: Mapping[str, Interval], bits: int) -> Dict[str, Interval]:
    return {v: eval_poly(p, point, bits) for v, p in coords.items()}


def _branch_det(img: JointSpaceImage, m: RobotModel, det_a: MultiPoly, point: Mapping[str, Interval],
                pose: Mapping[str, Interval], mode: WorkingMode,
                bits: int) -> Tuple[Optional[Interval], Tuple[Optional[Interval], ...]]:
    """det(A) enclosure on one branch; None when the branch is not certainly real."""
    rho = []
    for leg, sign in zip(img.legs, mode.signs):
        try:
            rho.append(leg.branch(point, sign, bits))
        except (ModelError, IntervalError) as e:
            logger.debug(f"Branch {leg.joint} ambiguous: {e}")
            rho.append(None)
    if any(v is None for v in rho):
        return None, tuple(rho)
    values = dict(pose)
    values.update(zip(m.joint_vars, rho))
    return eval_poly(det_a, values, bits), tuple(rho)


def _fibre_is_real(img: JointSpaceImage, point: Mapping[str, Interval], bits: int) -> bool:
    """Every leg has two certified distinct real roots and a constant leading coefficient."""
    for leg in img.legs:
        if leg.is_linear or not leg.a.is_constant():
            return False
        if eval_poly(leg.disc, point, bits).lo <= 0:
            return False
    return True


def _unreal(img: JointSpaceImage, point: Mapping[str, Interval], mode: WorkingMode, bits: int) -> bool:
    for leg, sign in zip(img.legs, mode.signs):
        try:
            if leg.branch(point, sign, bits) is None:
                return True
        except (ModelError, IntervalError):
            return False
    return False


def _sign_change(img: JointSpaceImage, m: RobotModel, det_a: MultiPoly, coords: Mapping[str, MultiPoly],
                 t_box: Interval, mode: WorkingMode, bits: int = 160) -> bool:
    signs = []
    for end in (t_box.lo, t_box.hi):
        s, c = sin_cos_enclosure(Interval(end), bits)
        point = _trig_point(Interval(end), s, c)
        value, _ = _branch_det(img, m, det_a, point, _pose_at(coords, point, bits), mode, bits)
        if value is None or value.sign() is None:
            return False
        signs.append(value.sign())
    return signs[0] * signs[1] < 0


def classify_event(m: RobotModel, img: JointSpaceImage, loci: SingularityLoci, coords: Mapping[str, MultiPoly],
                   cand: _Candidate, mode: WorkingMode, label: str, boundary: bool) -> SingularEvent:
    """
    Decide whether det(A) vanishes on the tracked branch at a candidate event.

    The tracked branch is spurious once its det(A) enclosure excludes zero. It is
    real when its enclosure holds zero while every other branch over the same
    real fibre is certified nonzero. Boxes are refined until one of the two holds.
    """
    modes = WorkingMode.all(len(img.legs))
    principal = len(loci.xi_generators) <= 1
    first = None
    for exponent in CLASSIFY_EXPONENTS:
        width = Fraction(1, 10 ** exponent)
        bits = 4 * exponent + 40
        try:
            t_box, s, c = cand.refine(width)
        except RootIsolationError as e:
            raise ScanError(f"{label}: {e}") from e
        point = _trig_point(t_box, s, c)
        pose = _pose_at(coords, point, bits)
        values = {}
        rhos = {}
        for other in modes:
            values[other], rhos[other] = _branch_det(img, m, loci.det_a, point, pose, other, bits)
        if first is None:
            first = (t_box, s, c, pose, rhos[mode])
        tracked = values[mode]
        vanishing = tuple(w for w in modes if values[w] is not None and values[w].contains_zero())
        classification = None
        if tracked is None and _unreal(img, point, mode, bits):
            classification = SPURIOUS
        elif tracked is not None and not tracked.contains_zero():
            classification = SPURIOUS
        elif (tracked is not None and principal and _fibre_is_real(img, point, bits)
              and all(values[w] is not None and not values[w].contains_zero() for w in modes if w != mode)):
            classification = REAL
        if classification is None:
            logger.debug(f"{label}: ambiguous at width 1e-{exponent}, refining")
            continue
        t0, s0, c0, pose0, rho0 = first
        feasible = all(v is not None and m.interval_within_limits(i, v) for i, v in enumerate(rho0))
        change = classification == REAL and _sign_change(img, m, loci.det_a, coords, t0, mode)
        logger.info(f"{label}: t ~ {float(t0.mid):.6g} classified {classification}")
        return SingularEvent(label, t0, s0, c0, tuple(pose0[v] for v in m.pose_vars), rho0,
                             classification, change, vanishing, feasible, boundary)
    raise ScanError(f"{label}: could not classify the event near t = {float(cand.t.mid):.6g} "
                    f"after refining to 1e-{CLASSIFY_EXPONENTS[-1]}")


def scan(m: RobotModel, tr: Trajectory, mode: Optional[WorkingMode] = None,
         loci: Optional[SingularityLoci] = None, img: Optional[JointSpaceImage] = None,
         cache=None, feasibility_samples: int = FEASIBILITY_SAMPLES,
         threads: int = THREADS) -> ScanReport:
    """
    Certify whether a trajectory meets a parallel singularity on one working mode.

    Args:
        m: Robot model
        tr: Trajectory over the model's pose variables
        mode: Working mode to track; defaults to the first mode feasible on the
            whole domain
        loci: Precomputed singularity projections (computed when omitted)
        img: Precomputed joint-space image (computed when omitted)
        cache: Optional EliminationCache

    Returns:
        ScanReport: Events sorted by t and the verdict
    """
    started = time.perf_counter()
    loci = loci or project_singularities(m, cache=cache, with_joint_limits=False)
    img = img or project_to_jointspace(build_psi(m, tr), m, cache=cache)
    good = feasible_modes(img, tr, samples=feasibility_samples, threads=threads)
    if mode is None:
        mode = good[0] if good else None
        if len(good) > 1:
            logger.warning(f"{len(good)} feasible working modes on '{tr.name}' "
                           f"({', '.join(str(g) for g in good)}); tracking the first, {mode}")
    elif len(mode.signs) != len(img.legs):
        raise ScanError(f"Mode {mode} does not match {len(img.legs)} legs")
    mu_t = restrict_xi(loci, tr)
    events: List[SingularEvent] = []
    if mode is None:
        logger.warning(f"No working mode stays within the joint limits on '{tr.name}'")
    else:
        cands = candidate_events(mu_t, tr)
        logger.info(f"{len(cands)} candidate events on '{tr.name}', tracking mode {mode}")
        trig = VarSet(tr.trig_vars)
        coords = {v: coord.to_poly(trig) for v, coord in zip(tr.pose_vars, tr.coords)}
        lo_end, hi_end = _endpoint_enclosures(tr)
        for i, cand in enumerate(cands):
            boundary = cand.t.intersect(lo_end) is not None or cand.t.intersect(hi_end) is not None
            events.append(classify_event(m, img, loci, coords, cand, mode, f"S{i + 1}", boundary))
    mode_ok = mode is not None and mode in good
    if mode is None:
        verdict = VERDICT_INFEASIBLE
    elif any(e.is_real for e in events):
        verdict = VERDICT_SINGULAR
    elif not mode_ok:
        verdict = VERDICT_INFEASIBLE
    else:
        verdict = VERDICT_FREE
    elapsed = time.perf_counter() - started
    logger.info(f"Scan of '{tr.name}' on '{m.name}': {verdict} "
                f"({sum(e.is_real for e in events)} real of {len(events)} events, {elapsed:.2f}s)")
    return ScanReport(tr.name, m.name, tr.domain.describe(), mode, tuple(good), events, verdict,
                      mu_t.total_degree(), mode_ok, tuple(m.pose_vars), tuple(m.joint_vars), elapsed)


def scan_many(m: RobotModel, trajectories: Sequence[Trajectory], mode: Optional[WorkingMode] = None,
              cache=None, threads: int = THREADS) -> List[ScanReport]:
    """Scan several trajectories against one set of singularity projections."""
    loci = project_singularities(m, cache=cache, with_joint_limits=False)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(lambda tr: scan(m, tr, mode, loci=loci, cache=cache, threads=1), trajectories))


def _fmt(value: Optional[Interval], decimals: int) -> str:
    if value is None:
        return "-"
    return f"{float(value.mid):.{decimals}f}"


def event_rows(report: ScanReport, decimals: int = DEFAULT_DECIMALS) -> List[List[str]]:
    rows = []
    for e in report.events:
        rows.append([e.label, _fmt(e.t, decimals), *(_fmt(v, decimals) for v in e.pose),
                     *(_fmt(v, decimals) for v in e.rho), e.classification])
    return rows


def event_table(report: ScanReport, decimals: int = DEFAULT_DECIMALS, tablefmt: str = "grid") -> str:
    headers = ["Event", "t", *report.pose_vars, *report.joint_vars, "Classification"]
    return tabulate(event_rows(report, decimals), headers=headers, tablefmt=tablefmt)


def _exact(value: Optional[Interval]) -> Optional[List[str]]:
    if value is None:
        return None
    return [str(value.lo), str(value.hi)]


def _event_json(e: SingularEvent, report: ScanReport, decimals: int, include_exact: bool) -> Dict[str, Any]:
    def entry(value: Optional[Interval]) -> Dict[str, Any]:
        out: Dict[str, Any] = {"value": None if value is None else round(float(value.mid), decimals)}
        if include_exact:
            out["enclosure"] = _exact(value)
        return out

    data: Dict[str, Any] = {
        "label": e.label,
        "t": entry(e.t),
        "classification": e.classification,
        "det_a_sign_change": e.det_a_sign_change,
        "vanishing_modes": [str(w) for w in e.vanishing_modes],
        "feasible": e.feasible,
        "boundary": e.boundary,
    }
    for name, value in zip(report.pose_vars, e.pose):
        data[name] = entry(value)
    for name, value in zip(report.joint_vars, e.rho):
        data[name] = entry(value)
    return data


def report_json(report: ScanReport, decimals: int = DEFAULT_DECIMALS, include_exact: bool = True,
                include_timing: bool = False) -> str:
    """Deterministic JSON report (sorted keys; timing only on request)."""
    payload = {
        "schema": REPORT_SCHEMA,
        "model": report.model,
        "trajectory": report.trajectory,
        "domain": report.domain,
        "mode": None if report.mode is None else str(report.mode),
        "feasible_modes": [str(w) for w in report.feasible_modes],
        "mode_feasible": report.mode_feasible,
        "verdict": report.verdict,
        "candidates": report.candidates,
        "real_events": len(report.real_events),
        "mu_degree": report.mu_degree,
        "events": [_event_json(e, report, decimals, include_exact) for e in report.events],
        "timing": {"elapsed_seconds": round(report.elapsed, 3)} if include_timing else None,
    }
    return json.dumps(payload, sort_keys=True, indent=2)


def float_eval(p: MultiPoly, values: Mapping[str, np.ndarray]) -> np.ndarray:
    """Vectorised float evaluation of p for display curves."""
    names = p.varset.names
    arrays = [np.asarray(values[n], dtype=float) if n in values else None for n in names]
    shape = next(a.shape for a in arrays if a is not None) if any(a is not None for a in arrays) else ()
    total = np.zeros(shape)
    for mono, coeff in p.terms.items():
        term = np.full(shape, float(coeff))
        for i, e in enumerate(mono):
            if e:
                term = term * arrays[i] ** e
        total = total + term
    return total


def scan_curves(m: RobotModel, tr: Trajectory, loci: SingularityLoci, img: JointSpaceImage,
                mode: Optional[WorkingMode], samples: int = DEFAULT_SAMPLES) -> Dict[str, np.ndarray]:
    """Sampled t, xi(phi(t)) and det(A) on the tracked branch (NaN where the branch is unreal)."""
    lo, hi = tr.domain.bounds()
    ts = np.linspace(lo, hi, samples)
    values = {SIN: np.sin(ts), COS: np.cos(ts), TIME: ts}
    pose = {v: coord.evaluate(ts) for v, coord in zip(tr.pose_vars, tr.coords)}
    curves = {"t": ts, "mu": float_eval(loci.xi, pose)}
    det = np.full_like(ts, np.nan)
    if mode is not None:
        point = dict(pose)
        with np.errstate(invalid='ignore'):
            for leg, sign in zip(img.legs, mode.signs):
                a = float_eval(leg.a, values)
                b = float_eval(leg.b, values)
                disc = float_eval(leg.disc, values)
                point[leg.joint] = (-b + sign * np.sign(a) * np.sqrt(disc)) / (2 * a)
            det = float_eval(loci.det_a, point)
    curves["det_a"] = det
    return curves


def curve_export(report: ScanReport, curves: Mapping[str, np.ndarray], path: Path) -> None:
    """CSV columns t, mu, det_a, event; certified events are merged in by t."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [(float(t), f"{float(t):.12g}", f"{mu:.12g}", "" if np.isnan(d) else f"{d:.12g}", "")
            for t, mu, d in zip(curves["t"], curves["mu"], curves["det_a"])]
    for e in report.events:
        t = float(e.t.mid)
        rows.append((t, f"{t:.12g}", "0", "", e.label))
    rows.sort(key=lambda r: r[0])
    with path.open('w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(['t', 'mu', 'det_a', 'event'])
        for row in rows:
            writer.writerow(row[1:])
    logger.info(f"Wrote {len(rows)} curve rows to {path}")
