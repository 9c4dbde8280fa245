"""Command-line entry point: ``hjjunction <subcommand> --config PATH``."""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from ..junction import Grid, sample_initial
from ..junction_conditions import HypothesisError
from ..scheme import (
    CFLError,
    InvariantViolation,
    SchemeBlowup,
    SchemeConfig,
    compute_cfl,
    run,
    stability_constant,
    write_csv,
)
from ..vertex import VertexError, VertexTestFunction, certify_vertex
from .convergence import convergence_study, truncation_length, write_rows_csv
from .invariants import comparison_suite, gradient_estimate_suite, monotonicity_suite, summarize
from .problems import Config, ConfigError, build_problem, load_config

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _clean(v):
    """Replace non-finite floats so the output is strict JSON."""
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def dump_json(obj) -> str:
    return json.dumps(_clean(json.loads(json.dumps(obj, default=_json_default))), sort_keys=True, indent=2) + "\n"


@contextlib.contextmanager
def _output(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _grid_for(cfg: Config, problem) -> Grid:
    dx = cfg.grid.dx
    length = cfg.grid.length if cfg.grid.length is not None else truncation_length(problem, dx, cfg.grid.boundary_closure)
    return Grid.covering(problem.junction, dx, length)


def cmd_solve(cfg: Config, args) -> int:
    problem = build_problem(cfg)
    grid = _grid_for(cfg, problem)
    u0 = sample_initial(grid, problem.initial)
    bounds, dt_max = compute_cfl(u0, problem.hamiltonians, problem.F, cfg.grid.boundary_closure)
    dt = cfg.grid.cfl_safety * dt_max
    config = SchemeConfig(grid.dx, dt, problem.horizon, cfg.grid.cfl_safety, cfg.grid.boundary_closure)
    C0 = stability_constant(problem.initial.lipschitz, problem.hamiltonians, problem.F, problem.A)
    traj = run(u0, problem.hamiltonians, problem.F, config, bounds=bounds, record=cfg.experiment.record_every, stability_C0=C0)
    with _output(args.out) as fh:
        write_csv(fh, grid, traj.snapshots)
    total = traj.monitors.total_violations
    if total:
        print(f"monitor violations: {traj.monitors.bound_violations}", file=sys.stderr)
        if args.strict:
            return EXIT_VIOLATION
    return EXIT_OK


def cmd_cfl(cfg: Config, args) -> int:
    problem = build_problem(cfg)
    grid = _grid_for(cfg, problem)
    u0 = sample_initial(grid, problem.initial)
    bounds, dt_max = compute_cfl(u0, problem.hamiltonians, problem.F, cfg.grid.boundary_closure)
    out = {
        "bounds": bounds.as_dict(),
        "dt": cfg.grid.cfl_safety * dt_max,
        "dt_max": dt_max,
        "dx": grid.dx,
        "imax": grid.imax,
    }
    with _output(args.out) as fh:
        fh.write(dump_json(out))
    return EXIT_OK


def cmd_converge(cfg: Config, args) -> int:
    problem = build_problem(cfg)
    exp = cfg.experiment
    result = convergence_study(
        problem,
        exp.dx_list,
        exp.oracle,
        cfg.grid.cfl_safety,
        exp.refinement,
        args.threads,
        cfg.grid.boundary_closure,
    )
    with _output(args.out) as fh:
        write_rows_csv(fh, result)
    summary = {k: v for k, v in result.as_dict().items() if k != "rows"}
    summary["violations"] = sum(sum(r.violations.values()) for r in result.rows)
    # the summary goes to stderr when the table itself occupies stdout
    stream = sys.stderr if args.out in (None, "-") else sys.stdout
    stream.write(dump_json(summary))
    if args.strict and summary["violations"]:
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_certify_vertex(cfg: Config, args) -> int:
    problem = build_problem(cfg)
    v = cfg.vertex
    G = VertexTestFunction(problem.hamiltonians, v.gamma, v.A, v.K)
    report = certify_vertex(G, v.K, v.samples, args.seed)
    d = summarize(report)
    d["passed"] = report.passed
    with _output(args.out) as fh:
        fh.write(dump_json(d))
    if args.strict and not report.passed:
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_check_invariants(cfg: Config, args) -> int:
    inv = cfg.invariants
    rng = np.random.default_rng(args.seed)
    runs = gradient_estimate_suite(rng, inv.random_data, inv.steps)
    grad_violations = sum(sum(r.violations.values()) for r in runs)
    worst = monotonicity_suite(rng, inv.probes)
    failures = comparison_suite(rng, inv.random_data, inv.steps)
    out = {
        "seed": args.seed,
        "gradient_runs": len(runs),
        "gradient_violations": grad_violations,
        "max_stability_excess": max(r.max_stability_excess for r in runs),
        "monotonicity_min_delta": worst,
        "comparison_failures": failures,
    }
    ok = grad_violations == 0 and worst >= -1e-13 and failures == 0
    out["passed"] = ok
    with _output(args.out) as fh:
        fh.write(dump_json(out))
    if args.strict and not ok:
        return EXIT_VIOLATION
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "cfl": cmd_cfl,
    "converge": cmd_converge,
    "certify-vertex": cmd_certify_vertex,
    "check-invariants": cmd_check_invariants,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hjjunction", description="Finite-difference solver for Hamilton-Jacobi equations on a junction.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "run one trajectory and write it as CSV",
        "cfl": "print gradient bounds and the CFL time step as JSON",
        "converge": "grid-refinement study written as CSV, fitted order on the side",
        "certify-vertex": "certify the vertex test function and print a JSON report",
        "check-invariants": "run the randomized property suites",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", metavar="PATH", default=None)
        p.add_argument("--strict", action="store_true", help="exit 1 on any invariant violation")
        p.add_argument("--threads", type=int, default=1, metavar="N")
        p.add_argument("--seed", type=int, default=0, metavar="N")
    return parser


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, HypothesisError, VertexError, CFLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantViolation, SchemeBlowup) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
