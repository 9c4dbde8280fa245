"""Grid-refinement studies against the Hopf-Lax oracle or the fine-grid self-oracle."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .._numerics import fit_order
from ..hamiltonians import sup_abs_derivative
from ..junction import Grid, sample_initial
from ..scheme import SchemeConfig, compute_cfl, conservation_residual, run, stability_constant
from .oracles import glued_line_oracle, reference_solution
from .problems import ConfigError, ProblemSpec

EXACT_THRESHOLD = 1e-10


@dataclass
class ConvergenceRow:
    dx: float
    dt: float
    sup_error: float
    runtime: float
    steps: int
    violations: dict = field(default_factory=dict)
    conservation_residual: float = 0.0
    stability_excess: float = -math.inf


@dataclass
class ConvergenceResult:
    oracle: str
    length: float
    rows: list
    fitted_order: Optional[float]
    exact: bool
    ratio_spread: float

    def as_dict(self) -> dict:
        return {
            "oracle": self.oracle,
            "length": self.length,
            "fitted_order": "exact" if self.exact else self.fitted_order,
            "ratio_spread": self.ratio_spread,
            "rows": [asdict(r) for r in self.rows],
        }


def truncation_length(problem: ProblemSpec, dx: float, closure: str = "frozen-slope") -> float:
    """Branch length keeping the diagnostic window outside the truncation's influence."""
    probe = Grid.covering(problem.junction, dx, problem.radius + 1.0)
    bounds, _ = compute_cfl(sample_initial(probe, problem.initial), problem.hamiltonians, problem.F, closure)
    speed = max(sup_abs_derivative(H, lo, hi) for H, lo, hi in zip(problem.hamiltonians, bounds.lower, bounds.upper))
    need = max(problem.radius + problem.horizon * speed, problem.radius / 0.9)
    return 1.05 * need + dx


def _window(grid: Grid, radius: float, length: float) -> np.ndarray:
    xs = grid.coords
    return (xs <= radius + 1e-12) & (xs <= 0.9 * length + 1e-12)


def resolve_oracle(problem: ProblemSpec, oracle: str) -> str:
    if oracle == "auto":
        return "hopf-lax" if problem.glued_line else "self"
    if oracle == "hopf-lax" and not problem.glued_line:
        raise ConfigError("the Hopf-Lax oracle needs the glued-line configuration")
    return oracle


def _run_row(
    problem: ProblemSpec,
    dx: float,
    length: float,
    oracle: str,
    cfl_safety: float,
    refinement: int,
    closure: str,
) -> ConvergenceRow:
    start = time.perf_counter()
    grid = Grid.covering(problem.junction, dx, length)
    u0 = sample_initial(grid, problem.initial)
    bounds, dt_max = compute_cfl(u0, problem.hamiltonians, problem.F, closure)
    dt = cfl_safety * dt_max
    cfg = SchemeConfig(dx, dt, problem.horizon, cfl_safety, closure)
    steps = cfg.n_T
    window = _window(grid, problem.radius, length)
    reference = None
    if oracle == "self":
        reference = reference_solution(problem, grid, dt, steps, refinement, closure)
    C0 = stability_constant(problem.initial.lipschitz, problem.hamiltonians, problem.F, problem.A)
    state = {"err": 0.0, "cons": 0.0, "prev": None}

    def observe(n, t, U, W):
        ref = glued_line_oracle(problem, t, grid) if reference is None else reference[n]
        state["err"] = max(state["err"], float(np.max(np.abs(U[:, window] - ref[:, window]))))
        if state["prev"] is not None:
            U_old, W_old = state["prev"]
            state["cons"] = max(state["cons"], conservation_residual(U_old, U, -W_old, dx, dt))
        state["prev"] = (U.copy(), W.copy())

    traj = run(u0, problem.hamiltonians, problem.F, cfg, bounds=bounds, observer=observe, stability_C0=C0)
    mon = traj.monitors
    return ConvergenceRow(
        dx=dx,
        dt=dt,
        sup_error=state["err"],
        runtime=time.perf_counter() - start,
        steps=steps,
        violations=mon.bound_violations,
        conservation_residual=state["cons"],
        stability_excess=mon.max_stability_excess,
    )


def convergence_study(
    problem: ProblemSpec,
    dx_list: Sequence[float],
    oracle: str = "auto",
    cfl_safety: float = 0.9,
    refinement: int = 8,
    threads: int = 1,
    boundary_closure: str = "frozen-slope",
) -> ConvergenceResult:
    dx_list = [float(d) for d in dx_list]
    if len(dx_list) < 3:
        raise ConfigError("a convergence study needs at least 3 grids")
    if any(b >= a for a, b in zip(dx_list, dx_list[1:])):
        raise ConfigError("dx_list must be strictly decreasing")
    kind = resolve_oracle(problem, oracle)
    length = truncation_length(problem, dx_list[0], boundary_closure)
    # a common length that every grid resolves exactly
    length = dx_list[0] * math.ceil(length / dx_list[0])
    job = lambda dx: _run_row(problem, dx, length, kind, cfl_safety, refinement, boundary_closure)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(job, dx_list))
    else:
        rows = [job(dx) for dx in dx_list]
    errs = np.array([r.sup_error for r in rows])
    dxs = np.array(dx_list)
    exact = bool(np.all(errs < EXACT_THRESHOLD))
    order = None if exact or np.any(errs <= 0) else fit_order(dxs, errs)
    ratios = errs / dxs ** (1.0 / 3.0)
    spread = float(ratios.max() / ratios.min()) if np.all(ratios > 0) else math.inf
    return ConvergenceResult(kind, length, rows, order, exact, spread)


CSV_COLUMNS = ("dx", "dt", "sup_error", "runtime", "steps")


def write_rows_csv(stream, result: ConvergenceResult) -> None:
    import csv

    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in result.rows:
        w.writerow(["%.17g" % r.dx, "%.17g" % r.dt, "%.17g" % r.sup_error, "%.6f" % r.runtime, r.steps])
