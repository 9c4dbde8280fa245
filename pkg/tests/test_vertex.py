from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hjjunction.hamiltonians import quadratic
from hjjunction.vertex import (
    VertexError,
    VertexTestFunction,
    certify_vertex,
    fd_hessian,
    growth_exponent,
    hessian_sup,
    solve_lambda,
    vertex_hessian,
    vertex_value_grad,
)

PAIR = [quadratic(), quadratic()]


def G_with(A_gamma: float, gamma: float = 0.1, hs=PAIR) -> VertexTestFunction:
    return VertexTestFunction(hs, gamma, A=A_gamma)


@pytest.mark.parametrize(
    "A, x, y, expected",
    [(0.0, 1.0, 1.0, 1.0), (0.5, 0.1, 0.1, 0.5), (0.0, 3.0, 1.0, 4.0)],
)
def test_solve_lambda_quadratic(A, x, y, expected):
    assert solve_lambda(G_with(A), x, y) == pytest.approx(expected, abs=1e-9)


def test_value_and_gradient_quadratic():
    G = G_with(0.0)
    v, gx, gy = vertex_value_grad(G, 1.0, 1, 1.0, 2, normalized=False)
    assert v == pytest.approx(1.0, abs=1e-9)
    assert gx == pytest.approx(1.0, abs=1e-9)
    assert gy == pytest.approx(1.0, abs=1e-9)


def test_origin_pair_is_zero():
    G = G_with(0.0)
    for a, b in ((1, 1), (1, 2)):
        assert vertex_value_grad(G, 0.0, a, 0.0, b)[0] == pytest.approx(0.0, abs=1e-12)


@given(x=st.floats(0.0, 5.0))
def test_diagonal_below_gamma(x):
    G = G_with(0.0)
    assert vertex_value_grad(G, x, 1, x, 1)[0] <= G.gamma


def test_hessian_quadratic_in_foliation_region():
    G = G_with(0.0)
    x = np.array([0.5, 1.0, 2.0])
    y = np.array([0.5, 2.0, 1.0])
    dxx, dyy, dxy, curved = vertex_hessian(G, x, 1, y, 2)
    assert np.all(curved)
    assert np.allclose([dxx, dyy, dxy], 0.5, atol=1e-9)


def test_hessian_vanishes_in_linear_region():
    G = G_with(1.0)
    dxx, dyy, dxy, curved = vertex_hessian(G, 0.2, 1, 0.3, 2)
    assert not curved.any()
    assert dxx.item() == dyy.item() == dxy.item() == 0.0


@pytest.mark.parametrize("hs", [PAIR, [quadratic(shift=1.0), quadratic()], [quadratic(scale=2.0), quadratic(center=0.5)]])
def test_hessian_matches_finite_differences(hs):
    G = VertexTestFunction(hs, 0.1)
    x = np.array([1.0, 2.5, 3.0])
    y = np.array([2.0, 1.0, 0.7])
    exact = np.stack(G.hessian(x, 1, y, 2)[:3])
    approx = np.stack(fd_hessian(G, x, 1, y, 2))
    assert np.max(np.abs(exact - approx) / np.abs(exact)) <= 1e-5


@given(x=st.floats(0.0, 4.0), y=st.floats(0.0, 4.0))
def test_envelope_identity(x, y):
    G = VertexTestFunction([quadratic(shift=0.3), quadratic(scale=2.0)], 0.1)
    lam = G.solve_lambda(x, y, 1, 2)
    _, gx, gy = G.value_grad(x, 1, y, 2)
    assert G.hamiltonians[0](gx) == pytest.approx(lam.item(), abs=1e-9)
    assert G.hamiltonians[1](-gy) == pytest.approx(lam.item(), abs=1e-9)


def test_lambda_continuous_across_interface():
    G = G_with(1.0)
    t = np.linspace(1.99, 2.01, 401)
    lam = G.solve_lambda(t / 2, t / 2, 1, 2)
    assert np.max(np.abs(np.diff(lam))) < 1e-3


@given(x=st.floats(0.0, 5.0), y=st.floats(0.0, 5.0), b=st.integers(1, 2))
def test_compatibility_defect_below_gamma(x, y, b):
    G = G_with(0.0)
    assert G.compatibility_defect(x, 1, y, b).item() <= G.gamma


def test_monotone_in_limiter():
    rng = np.random.default_rng(7)
    x, y = rng.uniform(0, 3, 500), rng.uniform(0, 3, 500)
    levels = np.linspace(0.0, 2.0, 11)
    cross = [G_with(A).value_grad(x, 1, y, 2)[0] for A in levels]
    assert np.all(np.diff(np.stack(cross), axis=0) >= -1e-12)
    # on one branch the smoothing band moves with the limiter; the loss stays within its dip
    same = [G_with(A).value_grad(x, 1, y, 1)[0] for A in levels]
    assert np.all(np.diff(np.stack(same), axis=0) >= -0.1 / 2)


def test_rejects_non_convex_hamiltonian():
    from hjjunction.hamiltonians import absolute

    with pytest.raises(VertexError):
        VertexTestFunction([absolute(), quadratic()], 0.1)
    with pytest.raises(VertexError):
        VertexTestFunction(PAIR, 0.0)


def test_certificate_for_quadratic_pair():
    G = VertexTestFunction(PAIR, 0.1, K=5.0)
    rep = certify_vertex(G, 5.0, 2000, seed=3)
    assert rep.passed
    assert rep.diagonal_defect <= 0.1 and rep.compatibility_defect <= 0.1
    d = json.loads(rep.to_json())
    assert list(d) == sorted(d)
    with pytest.raises(VertexError):
        certify_vertex(G, 5.0, 10)


def test_hessian_sup_independent_of_gamma_across_branches():
    # different branches only: G = (x + y)^2 / 4 there
    sups = []
    for gamma in (0.1, 0.05):
        G = VertexTestFunction(PAIR, gamma)
        t = np.linspace(0.5, 2.5, 9)
        sups.append(np.max(np.abs(np.stack(G.hessian(t, 1, t[::-1], 2)[:3]))))
    assert np.allclose(sups, 0.5)


def test_growth_exponent_for_unequal_minima():
    hs = [quadratic(shift=1.0), quadratic()]
    gammas = (0.1, 0.05, 0.025)
    sups = [hessian_sup(VertexTestFunction(hs, g), 5.0, per_axis=101) for g in gammas]
    assert sups[0] < sups[1] < sups[2]
    assert growth_exponent(gammas, sups) <= 1.1


def test_hessian_sup_quadratic_pair_does_not_grow():
    sups = [hessian_sup(VertexTestFunction(PAIR, g), 5.0) for g in (0.1, 0.05, 0.025)]
    assert np.allclose(sups, sups[0])
    assert sups[0] == pytest.approx(1.0)
