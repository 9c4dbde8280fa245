"""Acceptance criteria, each at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line in ``RESULTS``; the lines are
printed in the terminal summary (and by ``python3 tests/test_acceptance.py``).
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from hjjunction.hamiltonians import quadratic
from hjjunction.harness.convergence import convergence_study, truncation_length
from hjjunction.harness.invariants import (
    modified_f_suite,
    comparison_suite,
    gradient_estimate_suite,
    modified_equivalence,
    monotonicity_suite,
)
from hjjunction.harness.problems import build_problem, parse_config
from hjjunction.junction import Grid, sample_initial
from hjjunction.junction_conditions import FluxLimitedF, exp_sum, linear_sum
from hjjunction.scheme import compute_cfl
from hjjunction.vertex import VertexTestFunction, certify_vertex, growth_exponent, hessian_sup

RESULTS: dict = {}


def record(number: int, name: str, ok: bool, detail: str) -> None:
    RESULTS[number] = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} | {detail}"


GLUED_LINE = {
    "junction": {"branches": 2},
    "hamiltonians": [{"name": "quadratic"}],
    "junction_function": {"type": "flux_limited", "A": "A0"},
    "initial": {"kind": "tent", "height": 1.0, "width": 1.0},
    "experiment": {"horizon": 0.5, "radius": 2.0},
}
GLUED_DX = [0.1, 0.05, 0.025, 0.0125]

FLUX_LIMITED = {
    "junction": {"branches": 3},
    "hamiltonians": [{"name": "quadratic"}],
    "junction_function": {"type": "flux_limited", "A": 1.0},
    "initial": {"kind": "cone", "slope": 0.5},
    "experiment": {"horizon": 0.5, "radius": 2.0},
}
FLUX_DX = [0.1, 0.05, 0.025]


@pytest.fixture(scope="module")
def rate_study():
    start = time.perf_counter()
    res = convergence_study(build_problem(parse_config(GLUED_LINE)), GLUED_DX, oracle="hopf-lax")
    return res, time.perf_counter() - start


@pytest.fixture(scope="module")
def flux_study():
    start = time.perf_counter()
    res = convergence_study(build_problem(parse_config(FLUX_LIMITED)), FLUX_DX, oracle="self", refinement=8)
    return res, time.perf_counter() - start


@pytest.fixture(scope="module")
def gradient_runs():
    return gradient_estimate_suite(np.random.default_rng(2024), count=20, steps=1000)


def test_criterion_1_convergence_rate(rate_study):
    res, elapsed = rate_study
    errs = [r.sup_error for r in res.rows]
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    order = res.fitted_order
    ok = decreasing and order is not None and order >= 0.33 and res.ratio_spread <= 10 and elapsed < 30
    record(
        1,
        "glued-line rate",
        ok,
        f"errors={['%.3e' % e for e in errs]} order={order:.3f} ratio_spread={res.ratio_spread:.2f} runtime={elapsed:.1f}s",
    )
    assert decreasing
    assert order >= 0.33
    assert res.ratio_spread <= 10
    assert elapsed < 30


def test_criterion_2_flux_limited_convergence(flux_study):
    res, elapsed = flux_study
    errs = [r.sup_error for r in res.rows]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    ok = all(q >= 2.0 for q in ratios) and elapsed < 120
    record(
        2,
        "flux-limited self-oracle halving",
        ok,
        f"errors={['%.3e' % e for e in errs]} ratios={['%.3f' % q for q in ratios]} runtime={elapsed:.1f}s",
    )
    assert all(q >= 2.0 for q in ratios), f"successive error ratios {ratios} below 2"
    assert elapsed < 120


def test_criterion_3_gradient_estimates(gradient_runs):
    totals = {}
    for run in gradient_runs:
        for k, v in run.violations.items():
            totals[k] = totals.get(k, 0) + v
    grd = totals.get("gradient", 0)
    mono = totals.get("time_derivative", 0)
    ns = sorted({r.n for r in gradient_runs})
    steps = min(r.steps for r in gradient_runs)
    ok = grd == 0 and mono == 0 and len(gradient_runs) == 20 and steps >= 1000
    record(3, "discrete gradient estimates", ok, f"runs={len(gradient_runs)} N={ns} steps={steps} violations={totals}")
    assert grd == 0
    assert mono == 0
    assert steps >= 1000


def test_criterion_4_monotonicity_and_comparison():
    rng = np.random.default_rng(77)
    worst = monotonicity_suite(rng, probes=1000)
    failures = comparison_suite(rng, pairs=20, steps=1000)
    ok = worst >= -1e-13 and failures == 0
    record(4, "monotonicity and comparison", ok, f"min_delta={worst:.3e} comparison_failures={failures}/20")
    assert worst >= -1e-13
    assert failures == 0


def test_criterion_5_stability(rate_study, flux_study, gradient_runs):
    excess = [r.stability_excess for r in rate_study[0].rows]
    excess += [r.stability_excess for r in flux_study[0].rows]
    excess += [r.max_stability_excess for r in gradient_runs]
    worst = max(excess)
    ok = worst <= 1e-12
    record(5, "stability |u - u0| <= C0 t", ok, f"runs={len(excess)} max(|u-u0| - C0 t)={worst:.3e}")
    assert worst <= 1e-12


def test_criterion_6_modified_problem_equivalence():
    problem = build_problem(parse_config(FLUX_LIMITED))
    worst = 0.0
    for dx in FLUX_DX:
        length = truncation_length(problem, dx)
        grid = Grid.covering(problem.junction, dx, length)
        u0 = sample_initial(grid, problem.initial)
        _, dt_max = compute_cfl(u0, problem.hamiltonians, problem.F)
        dt = 0.9 * dt_max
        worst = max(worst, modified_equivalence(u0, problem.hamiltonians, problem.F, dt, int(problem.horizon / dt)))
    ok = worst <= 1e-12
    record(6, "modified-problem equivalence", ok, f"max sup-difference={worst:.3e}")
    assert worst <= 1e-12


def test_criterion_7_vertex_certification():
    start = time.perf_counter()
    G = VertexTestFunction([quadratic(), quadratic()], 0.1, K=5.0)
    rep = certify_vertex(G, 5.0, 10_000, seed=0)
    gammas = (0.1, 0.05, 0.025)
    hs = [quadratic(shift=1.0), quadratic()]
    sups = [hessian_sup(VertexTestFunction(hs, g), 5.0) for g in gammas]
    exponent = growth_exponent(gammas, sups)
    elapsed = time.perf_counter() - start
    checks = [
        rep.diagonal_defect <= 0.1,
        rep.compatibility_defect <= 0.1,
        rep.hessian_fd_rel_error <= 1e-5,
        exponent <= 1.1,
        elapsed < 60,
    ]
    record(
        7,
        "vertex certification",
        all(checks),
        f"diag={rep.diagonal_defect:.2e} compat={rep.compatibility_defect:.2e} fd_rel={rep.hessian_fd_rel_error:.2e} "
        f"sups={['%.2f' % s for s in sups]} exponent={exponent:.3f} runtime={elapsed:.1f}s",
    )
    assert rep.diagonal_defect <= 0.1
    assert rep.compatibility_defect <= 0.1
    assert rep.hessian_fd_rel_error <= 1e-5
    assert exponent <= 1.1
    assert elapsed < 60


def test_criterion_8_modified_junction_function():
    rng = np.random.default_rng(8)
    hs = [quadratic(), quadratic()]
    cases = [
        ("exp_sum N=2", exp_sum(2), -np.ones(2), np.ones(2), True),
        ("exp_sum N=3", exp_sum(3, 0.5), -np.ones(3), 2 * np.ones(3), True),
        ("linear_sum N=2", linear_sum(2), -np.ones(2), np.ones(2), True),
        ("flux-limited A=1", FluxLimitedF(hs, 1.0), -np.ones(2), np.ones(2), False),
    ]
    parts, ok = [], True
    for name, F, lo, hi, strict in cases:
        r = modified_f_suite(F, lo, hi, rng, samples=1000, strict=strict)
        ok &= r.max_mismatch_on_Q0 == 0.0 and r.max_div_excess <= 1e-8 and r.monotone_ok
        parts.append(f"{name}: mismatch={r.max_mismatch_on_Q0:.1e} div_excess={r.max_div_excess:.1e} monotone={r.monotone_ok}")
    record(8, "F~ properties", ok, "; ".join(parts))
    assert ok


def test_criterion_9_conservation_identity(rate_study):
    worst = max(r.conservation_residual for r in rate_study[0].rows)
    ok = worst <= 1e-13
    record(9, "conservation-law identity", ok, f"max residual={worst:.3e}")
    assert worst <= 1e-13


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
