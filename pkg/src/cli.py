"""Command-line interface for singtraj."""
import argparse
import csv
import logging
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from rich.console import Console
from tabulate import tabulate

from .config import (BUILTIN_MODELS, BUILTIN_TRAJECTORIES, CACHE_DB_PATH, CACHE_ENABLED, DEFAULT_DECIMALS,
                     DEFAULT_SAMPLES, LOG_FILE, LOG_FORMAT, LOG_LEVEL, MAX_BASIS_SIZE, MAX_TOTAL_DEGREE,
                     THREADS)
from .groebner import BlowupError, GroebnerError
from .interval import IntervalError
from .logger import RunLogger, setup_logging
from .polycore import PolynomialError, format_poly
from .realroots import RootIsolationError
from .robotmodel import (ModelError, RobotModel, WorkingMode, load_model, probe_grid,
                         project_singularities)
from .singscan import (VERDICT_FREE, VERDICT_INFEASIBLE, VERDICT_SINGULAR, ScanError, curve_export,
                       event_table, report_json, scan, scan_curves)
from .storage import CacheError, EliminationCache, open_cache
from .trajectory import (TrajectoryError, branch_closed_form, build_psi, export_polylines, joint_paths,
                         load_trajectory, project_to_jointspace)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SINGULAR = 2
EXIT_INFEASIBLE = 3

VERDICT_EXIT = {
    VERDICT_FREE: EXIT_OK,
    VERDICT_SINGULAR: EXIT_SINGULAR,
    VERDICT_INFEASIBLE: EXIT_INFEASIBLE,
}

COMMANDS = ('model-info', 'project', 'verify', 'workspace-probe')

DOMAIN_ERRORS = (PolynomialError, GroebnerError, RootIsolationError, IntervalError, ModelError,
                 TrajectoryError, ScanError, CacheError)


class ConfigError(Exception):
    """Raised for invalid command-line settings."""
    pass


def _parse_grid(text: str) -> Tuple[Fraction, Fraction, int]:
    parts = text.split(':')
    if len(parts) != 3:
        raise ConfigError(f"Grid '{text}' must look like lo:hi:n")
    try:
        lo, hi, n = Fraction(parts[0]), Fraction(parts[1]), int(parts[2])
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"Grid '{text}' is not numeric") from e
    if n < 1 or lo > hi:
        raise ConfigError(f"Grid '{text}' needs lo <= hi and n >= 1")
    return lo, hi, n


@dataclass
class RunConfig:
    """Settings for one CLI invocation."""
    command: str
    model: str = 'orthoglide'
    trajectory: Optional[str] = None
    mode: Optional[WorkingMode] = None
    out: Path = Path('out')
    decimals: int = DEFAULT_DECIMALS
    samples: int = DEFAULT_SAMPLES
    max_basis: int = MAX_BASIS_SIZE
    max_degree: int = MAX_TOTAL_DEGREE
    cache: bool = CACHE_ENABLED
    cache_db: str = CACHE_DB_PATH
    log_level: str = LOG_LEVEL
    timing: bool = False
    leg_length: Optional[Fraction] = None
    grid: Tuple[Fraction, Fraction, int] = (Fraction(-2), Fraction(2), 5)
    space: str = 'workspace'
    threads: int = THREADS

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"Unknown command '{self.command}'")
        if self.decimals < 1:
            raise ConfigError("--decimals must be at least 1")
        if self.samples < 2:
            raise ConfigError("--samples must be at least 2")
        if self.max_basis < 1 or self.max_degree < 1:
            raise ConfigError("Resource ceilings must be positive")
        if self.model not in BUILTIN_MODELS and not Path(self.model).exists():
            raise ConfigError(f"Model file not found: {self.model}")
        if self.command in ('project', 'verify'):
            if not self.trajectory:
                raise ConfigError(f"'{self.command}' needs --trajectory")
            if self.trajectory not in BUILTIN_TRAJECTORIES and not Path(self.trajectory).exists():
                raise ConfigError(f"Trajectory file not found: {self.trajectory}")
        if self.space not in ('workspace', 'joint'):
            raise ConfigError(f"Unknown probe space '{self.space}'")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> 'RunConfig':
        try:
            mode = WorkingMode.parse(args.mode) if getattr(args, 'mode', None) else None
            leg = Fraction(args.leg_length) if args.leg_length else None
        except (ModelError, ValueError, ZeroDivisionError) as e:
            raise ConfigError(str(e)) from e
        grid = _parse_grid(args.grid) if getattr(args, 'grid', None) else (Fraction(-2), Fraction(2), 5)
        return cls(
            command=args.command,
            model=args.model,
            trajectory=getattr(args, 'trajectory', None),
            mode=mode,
            out=Path(args.out),
            decimals=args.decimals,
            samples=args.samples,
            max_basis=args.max_basis,
            max_degree=args.max_degree,
            cache=args.cache,
            log_level=args.log_level,
            timing=args.timing,
            leg_length=leg,
            grid=grid,
            space=getattr(args, 'space', 'workspace'),
        )


class _Parser(argparse.ArgumentParser):
    """Argument parser raising ConfigError on usage errors."""
    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog='singtraj',
        description='Certify trajectories of translational parallel robots against parallel singularities')
    common = _Parser(add_help=False)
    common.add_argument('--model', default='orthoglide', help='built-in model name or JSON model file')
    common.add_argument('--out', default='out', help='output directory')
    common.add_argument('--decimals', type=int, default=DEFAULT_DECIMALS)
    common.add_argument('--samples', type=int, default=DEFAULT_SAMPLES)
    common.add_argument('--max-basis', type=int, default=MAX_BASIS_SIZE)
    common.add_argument('--max-degree', type=int, default=MAX_TOTAL_DEGREE)
    common.add_argument('--cache', dest='cache', action='store_true', default=CACHE_ENABLED)
    common.add_argument('--no-cache', dest='cache', action='store_false')
    common.add_argument('--log-level', default=LOG_LEVEL)
    common.add_argument('--timing', action='store_true', help='include elapsed time in reports')
    common.add_argument('--leg-length', help='leg length of the built-in model (rational)')

    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('model-info', parents=[common], help='print constraints and singularity loci')
    for name, text in (('project', 'map a trajectory into the joint space'),
                       ('verify', 'scan a trajectory for parallel singularities')):
        cmd = sub.add_parser(name, parents=[common], help=text)
        cmd.add_argument('--trajectory', required=True, help='built-in trajectory name or JSON file')
        cmd.add_argument('--mode', help="working mode to track, e.g. '+,+,+'")
    probe = sub.add_parser('workspace-probe', parents=[common], help='pointwise IKP/DKP counts on a grid')
    probe.add_argument('--grid', default='-2:2:5', help='lo:hi:n applied to every axis')
    probe.add_argument('--space', choices=('workspace', 'joint'), default='workspace')
    return parser


def _print(console: Console, text: str = "") -> None:
    console.print(text, markup=False, highlight=False, soft_wrap=True)


def _file_stem(name: str) -> str:
    return Path(name).stem if name not in BUILTIN_TRAJECTORIES else name


def cmd_model_info(cfg: RunConfig, console: Console, cache: Optional[EliminationCache]) -> Tuple[int, Dict[str, Any]]:
    m = load_model(cfg.model, cfg.leg_length)
    loci = project_singularities(m, cache=cache, max_basis=cfg.max_basis, max_degree=cfg.max_degree)
    rows = [[f"F{i + 1}", format_poly(p)] for i, p in enumerate(m.constraints)]
    _print(console, f"Model: {m.name}")
    _print(console, tabulate(rows, headers=["Constraint", "Polynomial"], tablefmt="plain"))
    _print(console)
    _print(console, f"det(A) = {format_poly(loci.det_a)}")
    _print(console, f"det(B) = {format_poly(loci.det_b)}")
    _print(console, f"eps = {format_poly(loci.eps)}")
    _print(console, f"deg(xi) = {loci.xi.total_degree()} ({len(loci.xi.terms)} terms)")
    for (joint, bound), surface in zip(product(m.joint_vars, (0, 1)), loci.mu):
        lo, hi = m.joint_limits[m.joint_vars.index(joint)]
        value = lo if bound == 0 else hi
        _print(console, f"mu({joint} = {value}) = {format_poly(surface)}")
    cfg.out.mkdir(parents=True, exist_ok=True)
    xi_path = cfg.out / f"{m.name}_xi.txt"
    xi_path.write_text(format_poly(loci.xi) + "\n")
    _print(console, f"xi written to {xi_path}")
    return EXIT_OK, {"model": m.name, "xi_degree": loci.xi.total_degree()}


def cmd_project(cfg: RunConfig, console: Console, cache: Optional[EliminationCache]) -> Tuple[int, Dict[str, Any]]:
    m = load_model(cfg.model, cfg.leg_length)
    tr = load_trajectory(cfg.trajectory, m.pose_vars)
    img = project_to_jointspace(build_psi(m, tr), m, cache=cache)
    stem = _file_stem(cfg.trajectory)
    cfg.out.mkdir(parents=True, exist_ok=True)
    gens_path = cfg.out / f"{stem}_upsilon.txt"
    gens_path.write_text("".join(format_poly(g) + "\n" for g in img.generators))
    for i, leg in enumerate(img.legs):
        try:
            centre, radicand = branch_closed_form(img, i)
        except TrajectoryError as e:
            logger.info(f"No closed form for {leg.joint}: {e}")
            continue
        _print(console, f"{leg.joint} = {format_poly(centre)} +- sqrt({format_poly(radicand)})")
    modes = [cfg.mode] if cfg.mode else WorkingMode.all(len(img.legs))
    paths = joint_paths(img, modes, tr.domain.samples(cfg.samples), cfg.threads)
    rows = []
    feasible = []
    for mode in modes:
        samples = paths[mode]
        name = mode.label.replace('+', 'p').replace('-', 'm')
        export_polylines(samples, cfg.out / f"{stem}_mode_{name}.csv", m.joint_vars)
        ok = all(s.feasible for s in samples)
        if ok:
            feasible.append(str(mode))
        rows.append([str(mode), sum(s.reachable for s in samples), sum(s.feasible for s in samples),
                     "yes" if ok else "no"])
    _print(console, tabulate(rows, headers=["Mode", "Reachable", "Within limits", "Feasible"],
                             tablefmt="grid"))
    _print(console, f"{len(feasible)} of {len(modes)} modes feasible on '{tr.name}'; output in {cfg.out}")
    return EXIT_OK, {"model": m.name, "trajectory": tr.name, "feasible_modes": feasible}


def cmd_verify(cfg: RunConfig, console: Console, cache: Optional[EliminationCache]) -> Tuple[int, Dict[str, Any]]:
    m = load_model(cfg.model, cfg.leg_length)
    tr = load_trajectory(cfg.trajectory, m.pose_vars)
    loci = project_singularities(m, cache=cache, max_basis=cfg.max_basis, max_degree=cfg.max_degree,
                                 with_joint_limits=False)
    img = project_to_jointspace(build_psi(m, tr), m, cache=cache)
    report = scan(m, tr, cfg.mode, loci=loci, img=img, cache=cache, threads=cfg.threads)
    stem = _file_stem(cfg.trajectory)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / f"{stem}_report.json").write_text(
        report_json(report, cfg.decimals, include_timing=cfg.timing) + "\n")
    curve_export(report, scan_curves(m, tr, loci, img, report.mode, cfg.samples), cfg.out / f"{stem}_curve.csv")
    if report.events:
        _print(console, event_table(report, cfg.decimals))
    mode = report.mode if report.mode is not None else "none"
    _print(console, f"Trajectory '{tr.name}' on mode {mode}: {report.verdict} "
                    f"({len(report.real_events)} real of {report.candidates} candidate events)")
    details = {"model": m.name, "trajectory": tr.name, "verdict": report.verdict}
    return VERDICT_EXIT[report.verdict], details


def _grid_points(cfg: RunConfig, m: RobotModel) -> List[Tuple[Fraction, ...]]:
    lo, hi, n = cfg.grid
    axis = [lo] if n == 1 else [lo + (hi - lo) * i / (n - 1) for i in range(n)]
    dims = len(m.pose_vars) if cfg.space == 'workspace' else len(m.joint_vars)
    return list(product(axis, repeat=dims))


def cmd_workspace_probe(cfg: RunConfig, console: Console,
                        cache: Optional[EliminationCache]) -> Tuple[int, Dict[str, Any]]:
    m = load_model(cfg.model, cfg.leg_length)
    points = _grid_points(cfg, m)
    rows = probe_grid(m, points, cfg.space, cfg.threads)
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / f"probe_{cfg.space}.csv"
    names = m.pose_vars if cfg.space == 'workspace' else m.joint_vars
    counts = ['total', 'feasible'] if cfg.space == 'workspace' else ['dkp']
    with path.open('w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow([*names, *counts])
        for row in rows:
            values = ['' if row[k] is None else row[k] for k in counts]
            writer.writerow([f"{float(v):.12g}" for v in row["point"]] + values)
    key = 'feasible' if cfg.space == 'workspace' else 'dkp'
    histogram: Dict[Any, int] = {}
    for row in rows:
        histogram[row[key]] = histogram.get(row[key], 0) + 1
    table = sorted(histogram.items(), key=lambda kv: (kv[0] is None, kv[0] or 0))
    _print(console, tabulate([["-" if k is None else k, v] for k, v in table],
                             headers=[key, "points"], tablefmt="grid"))
    _print(console, f"{len(rows)} points written to {path}")
    return EXIT_OK, {"model": m.name, "space": cfg.space, "points": len(rows)}


HANDLERS = {
    'model-info': cmd_model_info,
    'project': cmd_project,
    'verify': cmd_verify,
    'workspace-probe': cmd_workspace_probe,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    console = Console()
    errors = Console(stderr=True)
    try:
        cfg = RunConfig.from_args(build_parser().parse_args(argv))
    except ConfigError as e:
        _print(errors, f"Error: {e}")
        return EXIT_ERROR
    setup_logging(LOG_FILE, LOG_FORMAT, cfg.log_level)
    cache = open_cache(cfg.cache_db, cfg.cache)
    run_logger = RunLogger(cache.db if cache is not None else None)
    started = time.perf_counter()
    details: Dict[str, Any] = {}
    try:
        code, details = HANDLERS[cfg.command](cfg, console, cache)
    except BlowupError as e:
        logger.error(f"Elimination stopped: {e}")
        _print(errors, f"Error: elimination exceeded {e.limit} ceiling {e.ceiling} "
                       f"(reached {e.value}); raise --max-basis/--max-degree")
        code = EXIT_ERROR
    except DOMAIN_ERRORS as e:
        logger.error(f"{cfg.command} failed: {e}")
        _print(errors, f"Error: {e}")
        code = EXIT_ERROR
    except OSError as e:
        logger.error(f"I/O error: {e}")
        _print(errors, f"Error: {e}")
        code = EXIT_ERROR
    details["exit_code"] = code
    details["elapsed"] = round(time.perf_counter() - started, 3)
    run_logger.log_run(cfg.command, details)
    if cache is not None:
        cache.db.disconnect()
    return code


def main() -> None:
    """Main entry point for the CLI."""
    try:
        sys.exit(run())
    except KeyboardInterrupt:
        print("\nProgram terminated by user.", file=sys.stderr)
        sys.exit(EXIT_ERROR)


if __name__ == "__main__":
    main()
