from __future__ import annotations

import math

import numpy as np
import pytest

from hjjunction.hamiltonians import quadratic
from hjjunction.harness.convergence import convergence_study, truncation_length
from hjjunction.harness.oracles import glued_line_oracle, hopf_lax_oracle, reference_solution
from hjjunction.harness.problems import ConfigError, build_problem, parse_config
from hjjunction.junction import Grid, sample_initial
from hjjunction.scheme import compute_cfl


def config(**over):
    raw = {
        "junction": {"branches": 2},
        "hamiltonians": [{"name": "quadratic"}],
        "junction_function": {"type": "flux_limited", "A": "A0"},
        "initial": {"kind": "tent"},
        "experiment": {"horizon": 0.5, "radius": 1.0},
    }
    raw.update(over)
    return parse_config(raw)


# -- configuration -----------------------------------------------------------


def test_defaults_and_glued_line_detection():
    p = build_problem(config())
    assert p.glued_line and p.A == 0.0 and p.n == 2
    assert p.initial.lipschitz == 1.0


@pytest.mark.parametrize(
    "over",
    [
        {"junction": {"branches": 2, "colour": "red"}},
        {"junction": {"branches": 0}},
        {"hamiltonians": []},
        {"hamiltonians": [{"name": "quadratic"}] * 3},
        {"hamiltonians": [{"name": "cubic"}]},
        {"junction_function": {"type": "flux_limited", "A": "huge"}},
        {"initial": {"kind": "table", "xs": [0.0, 1.0], "values": [[0.0, 1.0], [1.0, 1.0]]}},
        {"initial": {"kind": "table", "xs": [0.0, 0.0], "values": [[0.0, 1.0], [0.0, 1.0]]}},
        {"initial": {"kind": "tent", "width": 0.0}},
        {"grid": {"dx": -0.1}},
    ],
)
def test_malformed_configs_rejected(over):
    with pytest.raises(ConfigError):
        config(**over)


def test_mirrored_pair_is_a_glued_line():
    cfg = config(hamiltonians=[{"name": "quadratic", "center": 0.5}, {"name": "quadratic", "center": 0.5, "mirror": True}])
    assert build_problem(cfg).glued_line


@pytest.mark.parametrize(
    "over",
    [
        {"junction_function": {"type": "flux_limited", "A": 1.0}},
        {"junction": {"branches": 3}},
        {"hamiltonians": [{"name": "quadratic"}, {"name": "absolute"}]},
    ],
)
def test_not_glued_line(over):
    assert not build_problem(config(**over)).glued_line


def test_table_datum_interpolates():
    cfg = config(initial={"kind": "table", "xs": [0.0, 1.0, 2.0], "values": [[0.0, 1.0, 0.0], [0.0, -1.0, -1.0]]})
    u0 = build_problem(cfg).initial
    assert u0(1, np.array([0.5, 1.5])).tolist() == [0.5, 0.5]
    assert u0.lipschitz == 1.0
    assert u0.line(np.array([-0.5])).tolist() == [-0.5]


def test_custom_junction_function():
    cfg = config(junction_function={"type": "custom", "name": "exp_sum", "weight": 0.5})
    p = build_problem(cfg)
    assert p.A is None and not p.glued_line
    assert p.F(np.zeros(2)) == pytest.approx(1.0)


# -- oracles -----------------------------------------------------------------


def test_hopf_lax_cone():
    H = quadratic()
    u = hopf_lax_oracle(np.abs, H, 1.0, np.array([1.0, 3.0, 0.0]), 1.0, [0.0])
    assert np.allclose(u, [0.25, 2.0, 0.0], atol=1e-9)


def test_hopf_lax_zero_datum():
    u = hopf_lax_oracle(np.zeros_like, quadratic(), 0.7, np.linspace(-2, 2, 9), 0.0)
    assert np.allclose(u, 0.0, atol=1e-12)


@pytest.mark.parametrize("p", [-1.5, 0.3, 2.0])
def test_hopf_lax_affine_travels(p):
    x = np.linspace(-2, 2, 9)
    u = hopf_lax_oracle(lambda y: p * y, quadratic(), 0.5, x, abs(p))
    assert np.allclose(u, p * x - 0.5 * p * p, atol=1e-9)


def test_glued_line_oracle_shape_and_origin():
    p = build_problem(config())
    g = Grid.covering(p.junction, 0.1, 2.0)
    v = glued_line_oracle(p, 0.3, g)
    assert v.shape == (2, g.imax + 1)
    assert v[0, 0] == v[1, 0]


def test_reference_restricts_on_nested_grid():
    p = build_problem(config())
    g = Grid.covering(p.junction, 0.1, 2.0)
    _, dt_max = compute_cfl(sample_initial(g, p.initial), p.hamiltonians, p.F)
    ref = reference_solution(p, g, 0.9 * dt_max, 5, refinement=8)
    assert len(ref) == 6
    assert all(r.shape == (2, g.imax + 1) for r in ref)
    assert np.array_equal(ref[0], sample_initial(g, p.initial).full())


def test_reference_close_to_hopf_lax():
    p = build_problem(config())
    g = Grid.covering(p.junction, 0.1, 2.5)
    _, dt_max = compute_cfl(sample_initial(g, p.initial), p.hamiltonians, p.F)
    dt = 0.9 * dt_max
    steps = int(0.5 / dt)
    ref = reference_solution(p, g, dt, steps, refinement=8)[-1]
    exact = glued_line_oracle(p, steps * dt, g)
    window = g.coords <= 1.0
    assert np.max(np.abs(ref[:, window] - exact[:, window])) <= (0.1 / 8) ** (1 / 3)


@pytest.mark.parametrize("dx", [0.1, 0.05])
def test_reference_origin_respects_limiter(dx):
    p = build_problem(config(junction={"branches": 3}, junction_function={"type": "flux_limited", "A": 1.0}, initial={"kind": "zero"}))
    g = Grid.covering(p.junction, dx, 1.5)
    _, dt_max = compute_cfl(sample_initial(g, p.initial), p.hamiltonians, p.F)
    dt = 0.9 * dt_max
    steps = int(0.5 / dt)
    ref = reference_solution(p, g, dt, steps, refinement=8)
    assert ref[-1][0, 0] <= -1.0 * steps * dt + 1e-12


# -- convergence -------------------------------------------------------------


def test_affine_data_reported_exact():
    p = build_problem(config(initial={"kind": "affine", "slopes": [0.5, -0.5], "offset": 0.2}))
    res = convergence_study(p, [0.1, 0.05, 0.025])
    d = res.as_dict()
    assert d["fitted_order"] == "exact"
    assert all(r.sup_error < 1e-10 for r in res.rows)


def test_study_needs_three_decreasing_grids():
    p = build_problem(config())
    with pytest.raises(ConfigError):
        convergence_study(p, [0.1, 0.05])
    with pytest.raises(ConfigError):
        convergence_study(p, [0.05, 0.1, 0.025])


def test_hopf_lax_unavailable_off_the_line():
    p = build_problem(config(junction={"branches": 3}))
    with pytest.raises(ConfigError):
        convergence_study(p, [0.1, 0.05, 0.025], oracle="hopf-lax")


def test_rows_are_deterministic_and_threads_do_not_matter():
    p = build_problem(config())
    a = convergence_study(p, [0.2, 0.1, 0.05])
    b = convergence_study(p, [0.2, 0.1, 0.05], threads=3)
    strip = lambda r: [(x.dx, x.dt, x.sup_error, x.steps) for x in r.rows]
    assert strip(a) == strip(b)
    assert [x.dx for x in a.rows] == [0.2, 0.1, 0.05]


def test_truncation_length_covers_window():
    p = build_problem(config())
    L = truncation_length(p, 0.1)
    assert L >= p.radius / 0.9
    assert L >= p.radius + p.horizon * 2.0
    assert math.isfinite(L)
