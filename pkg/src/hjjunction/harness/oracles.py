"""Reference values: Hopf-Lax formula on the line and the fine-grid self-oracle."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .._numerics import golden_min
from ..hamiltonians import Hamiltonian, sup_abs_derivative
from ..junction import Grid, sample_initial
from ..scheme import CFLError, SchemeConfig, compute_cfl, run


def hopf_lax_oracle(
    u0: Callable[[np.ndarray], np.ndarray],
    H: Hamiltonian,
    t: float,
    x,
    lipschitz: float,
    breakpoints: Sequence[float] = (),
) -> np.ndarray:
    """``min_y u0(y) + t H*((x - y) / t)`` for convex ``H`` on the whole line.

    ``u0`` must be Lipschitz with constant ``lipschitz`` and affine between
    consecutive ``breakpoints``; the minimization then splits into convex
    pieces, each handled by golden section.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if t == 0:
        return np.asarray(u0(x), dtype=float)
    if t < 0:
        raise ValueError("t must be non-negative")
    speed = sup_abs_derivative(H, -lipschitz, lipschitz) if lipschitz > 0 else float(np.abs(H.derivative(0.0)))
    reach = t * speed * (1.0 + 1e-9) + 1e-12
    lo, hi = x - reach, x + reach
    bps = np.asarray(sorted(breakpoints), dtype=float)
    inner = np.clip(bps[None, :], lo[:, None], hi[:, None]) if bps.size else np.empty((x.size, 0))
    edges = np.sort(np.concatenate([lo[:, None], inner, hi[:, None]], axis=1), axis=1)
    a, b = edges[:, :-1], edges[:, 1:]
    X = np.broadcast_to(x[:, None], a.shape).ravel()

    def objective(y):
        return np.asarray(u0(y), dtype=float) + t * np.asarray(H.conjugate((X - y) / t), dtype=float)

    _, vals = golden_min(objective, a.ravel(), b.ravel())
    return vals.reshape(a.shape).min(axis=1)


def glued_line_oracle(problem, t: float, grid: Grid) -> np.ndarray:
    """Hopf-Lax values at every node of a two-branch grid, shape ``(2, imax + 1)``."""
    xs = grid.coords
    z = np.concatenate([xs, -xs])
    vals = hopf_lax_oracle(
        problem.initial.line,
        problem.line_hamiltonian,
        t,
        z,
        problem.initial.lipschitz,
        problem.initial.line_breakpoints(),
    )
    return vals.reshape(2, xs.size)


def reference_solution(
    problem,
    grid_coarse: Grid,
    dt_coarse: float,
    steps_coarse: int,
    refinement: int = 8,
    boundary_closure: str = "frozen-slope",
) -> list:
    """Fine-grid trajectory restricted to the coarse nodes at every coarse step.

    The fine grid has ``dx / refinement`` and ``dt / refinement`` so that the
    fine times land exactly on the coarse ones.
    """
    r = int(refinement)
    if r < 2:
        raise ValueError("refinement must be at least 2")
    fine = Grid(grid_coarse.junction, grid_coarse.dx / r, grid_coarse.imax * r)
    u0 = sample_initial(fine, problem.initial)
    _, dt_max = compute_cfl(u0, problem.hamiltonians, problem.F, boundary_closure)
    dt = dt_coarse / r
    if dt > dt_max * (1.0 + 1e-12):
        raise CFLError(f"fine-grid step {dt} exceeds its CFL bound {dt_max}")
    cfg = SchemeConfig(fine.dx, dt, steps_coarse * dt_coarse, boundary_closure=boundary_closure)
    out: list = []

    def keep(n, t, U, W):
        if n % r == 0:
            out.append(U[:, ::r].copy())

    run(u0, problem.hamiltonians, problem.F, cfg, steps=steps_coarse * r, observer=keep, check_cfl=False)
    return out


__all__ = ["hopf_lax_oracle", "glued_line_oracle", "reference_solution"]
