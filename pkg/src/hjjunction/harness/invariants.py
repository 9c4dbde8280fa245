"""Randomized property suites for the scheme and the junction-function modification."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..hamiltonians import asymmetric, quadratic
from ..junction import Grid, GridField, Junction
from ..junction_conditions import FluxLimitedF, ModifiedF, build_F_tilde, compute_A0, exp_sum, sup_neg_div
from ..scheme import (
    SchemeConfig,
    closure_slopes,
    compute_cfl,
    discrete_comparison_check,
    evolve,
    modified_problem,
    monotonicity_probe,
    run,
    stability_constant,
)


def random_lipschitz_field(grid: Grid, rng: np.random.Generator, L: float = 1.5) -> GridField:
    """Piecewise-linear data with random cell slopes in ``[-L, L]``."""
    slopes = rng.uniform(-L, L, (grid.num_branches, grid.imax))
    origin = rng.uniform(-1.0, 1.0)
    full = np.empty((grid.num_branches, grid.imax + 1))
    full[:, 0] = origin
    full[:, 1:] = origin + grid.dx * np.cumsum(slopes, axis=1)
    return GridField.from_full(grid, full)


def random_hamiltonians(rng: np.random.Generator, n: int) -> list:
    out = []
    for _ in range(n):
        if rng.uniform() < 0.25:
            out.append(asymmetric())
        else:
            out.append(quadratic(rng.uniform(-0.5, 0.5), rng.uniform(0.5, 2.0), rng.uniform(-0.5, 0.5)))
    return out


def random_junction_function(rng: np.random.Generator, hs: list):
    if rng.uniform() < 0.25:
        return exp_sum(len(hs), rng.uniform(0.2, 1.0))
    A0 = compute_A0(hs)
    return FluxLimitedF(hs, rng.uniform(A0 - 0.5, A0 + 2.0))


@dataclass
class GradientRun:
    n: int
    steps: int
    violations: dict
    max_gradient_excess: float
    max_stability_excess: float


def gradient_estimate_suite(rng: np.random.Generator, count: int = 20, steps: int = 1000, dx: float = 0.05, imax: int = 40) -> list:
    """Random data on ``N`` in ``{1, 2, 3}`` advanced ``steps`` times under the CFL step."""
    out = []
    for k in range(count):
        n = 1 + k % 3
        grid = Grid(Junction(n), dx, imax)
        hs = random_hamiltonians(rng, n)
        F = random_junction_function(rng, hs)
        u0 = random_lipschitz_field(grid, rng)
        bounds, dt_max = compute_cfl(u0, hs, F)
        dt = 0.9 * dt_max
        cfg = SchemeConfig(dx, dt, steps * dt)
        L0 = float(np.max(np.abs(np.diff(u0.full(), axis=1)))) / dx
        C0 = stability_constant(L0, hs, F, F.A if isinstance(F, FluxLimitedF) else None)
        tr = run(u0, hs, F, cfg, bounds=bounds, steps=steps, stability_C0=C0)
        m = tr.monitors
        out.append(GradientRun(n, steps, m.bound_violations, m.max_gradient_excess, m.max_stability_excess))
    return out


def monotonicity_suite(rng: np.random.Generator, probes: int = 1000, states: int = 10, dx: float = 0.05, imax: int = 20) -> float:
    """Smallest output change over ``probes`` single-input increases on random states."""
    worst = math.inf
    per = max(1, probes // states)
    for k in range(states):
        n = 1 + k % 3
        grid = Grid(Junction(n), dx, imax)
        hs = random_hamiltonians(rng, n)
        F = random_junction_function(rng, hs)
        u0 = random_lipschitz_field(grid, rng)
        _, dt_max = compute_cfl(u0, hs, F)
        cfg = SchemeConfig(dx, 0.9 * dt_max, 1.0)
        worst = min(worst, monotonicity_probe(u0, hs, F, cfg, rng, per, delta=1e-6))
    return worst


def comparison_suite(rng: np.random.Generator, pairs: int = 20, steps: int = 1000, dx: float = 0.05, imax: int = 40) -> int:
    """Number of random ordered pairs that lose their order within ``steps`` steps."""
    failures = 0
    for k in range(pairs):
        n = 1 + k % 3
        grid = Grid(Junction(n), dx, imax)
        hs = random_hamiltonians(rng, n)
        F = random_junction_function(rng, hs)
        U0 = random_lipschitz_field(grid, rng)
        bump = random_lipschitz_field(grid, rng, L=0.5).full()
        V0 = GridField.from_full(grid, U0.full() + (bump - bump.min()))
        dt = 0.9 * min(compute_cfl(U0, hs, F)[1], compute_cfl(V0, hs, F)[1])
        cfg = SchemeConfig(dx, dt, steps * dt)
        if not discrete_comparison_check(U0, V0, hs, F, cfg, steps):
            failures += 1
    return failures


def modified_equivalence(u0: GridField, hamiltonians: list, F, dt: float, steps: int) -> float:
    """Sup-difference between trajectories under ``(H, F)`` and ``(H~, F~)``."""
    bounds, _ = compute_cfl(u0, hamiltonians, F)
    Ht, Ft = modified_problem(hamiltonians, F, bounds, strict=not isinstance(F, FluxLimitedF))
    full = u0.full()
    g = closure_slopes(full, u0.grid.dx)
    a = evolve(full, hamiltonians, F, u0.grid.dx, dt, g, steps)
    b = evolve(full, Ht, Ft, u0.grid.dx, dt, g, steps)
    return max(float(np.max(np.abs(x - y))) for x, y in zip(a, b))


@dataclass
class ModifiedFReport:
    samples: int
    max_mismatch_on_Q0: float
    sup_div_Q0: float
    max_div_excess: float
    monotone_ok: bool
    slopes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_mismatch_on_Q0 == 0.0 and self.max_div_excess <= 1e-8 and self.monotone_ok


def richardson_neg_div(F, p: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Fourth-order central estimate of ``-(div F)(p)`` along ``(1, ..., 1)``."""
    one = np.ones(p.shape[-1])

    def central(s):
        return (F(p - s * one) - F(p + s * one)) / (2 * s)

    return (4 * central(h / 2) - central(h)) / 3


def modified_f_suite(F, lower, upper, rng: np.random.Generator, samples: int = 1000, strict: bool = True) -> ModifiedFReport:
    """Sample the three properties of ``F~`` inside and around ``Q0``."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    Ft: ModifiedF = build_F_tilde(F, lower, upper, strict=strict)
    n = len(lower)
    inside = rng.uniform(lower, upper, (samples, n))
    mismatch = float(np.max(np.abs(Ft(inside) - F(inside))))
    span = upper - lower
    outside = rng.uniform(lower - 2 * span - 1, upper + 2 * span + 1, (samples, n))
    # the estimate needs a smooth neighbourhood: drop points next to a face of Q0
    h = 1e-3
    near = np.any((np.abs(outside - lower) < 2 * h) | (np.abs(outside - upper) < 2 * h), axis=1)
    pts = np.concatenate([outside[~near], inside])
    sup_q0 = sup_neg_div(F, lower, upper)
    excess = float(np.max(richardson_neg_div(Ft, pts, h)) - sup_q0)
    mono = True
    for a in range(n):
        e = np.zeros(n)
        e[a] = 0.1
        mono &= bool(np.all(Ft(pts + e) <= Ft(pts) + 1e-12))
    return ModifiedFReport(samples, mismatch, sup_q0, excess, mono, Ft.slopes.tolist())


def summarize(obj) -> dict:
    if hasattr(obj, "__dataclass_fields__"):
        return asdict(obj)
    return obj


__all__ = [
    "modified_f_suite",
    "comparison_suite",
    "gradient_estimate_suite",
    "modified_equivalence",
    "monotonicity_suite",
    "random_lipschitz_field",
    "summarize",
]
