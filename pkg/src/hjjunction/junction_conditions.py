"""Junction functions: flux-limited ``F_A``, general ``F``, and the box modification ``F~``.

All junction functions take gradient vectors with the branch index in the last
axis, ``p.shape == (..., N)``, and evaluate vectorized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._numerics import BRACKET_CAP, TOL_F, bisect_threshold, fd_step
from .hamiltonians import Hamiltonian


class HypothesisError(ValueError):
    """A junction function violates the monotonicity hypothesis it is used under."""


class FluxLimitedF:
    """``F_A(p) = max(A, max_a H_a^-(p_a))``; ``A = -inf`` is allowed."""

    def __init__(self, hamiltonians: Sequence[Hamiltonian], A: float):
        self.hamiltonians = list(hamiltonians)
        self.A = float(A)
        if math.isnan(self.A) or self.A == math.inf:
            raise ValueError(f"flux limiter must be a real number or -inf, got {A!r}")

    @property
    def n(self) -> int:
        return len(self.hamiltonians)

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        out = np.full(p.shape[:-1], self.A)
        for a, H in enumerate(self.hamiltonians):
            out = np.maximum(out, H.minus(p[..., a]))
        return out

    def neg_div(self, p):
        """Rate of increase of ``F_A`` along ``-(1, ..., 1)``: the largest
        ``-H_a'(p_a^-)`` over the active terms (0 when only ``A`` is active)."""
        p = np.asarray(p, dtype=float)
        value = self(p)
        tol = 1e-12 * np.maximum(1.0, np.abs(value))
        out = np.zeros(p.shape[:-1])
        for a, H in enumerate(self.hamiltonians):
            q = p[..., a]
            h = fd_step(q)
            left = (H.minus(q - h) - H.minus(q)) / h
            if H.deriv is not None:
                left = np.where(q < H.p0, -H.derivative(q), left)
            active = H.minus(q) >= value - tol
            out = np.where(active, np.maximum(out, left), out)
        return out

    def as_general(self) -> "GeneralF":
        return GeneralF(self.__call__, self.n, name=f"F_A(A={self.A})")

    def __repr__(self):
        return f"FluxLimitedF(N={self.n}, A={self.A})"


@dataclass
class GeneralF:
    fn: Callable[[np.ndarray], np.ndarray]
    n: int
    partials: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "custom"

    def __call__(self, p):
        return self.fn(np.asarray(p, dtype=float))


@dataclass
class ModifiedF:
    """Extension of ``base`` off the box ``Q0 = prod [lower_a, upper_a]``.

    ``F~(p) = F(P(p)) - sum_a C_a (p_a - P_a(p_a))`` with ``P`` the clamp onto
    ``Q0``. On a set where only coordinate ``a`` leaves the box this is the
    one-sided linear continuation with slope ``-C_a``; elsewhere it equals the
    barycentric combination of those continuations.
    """

    base: Callable
    lower: np.ndarray
    upper: np.ndarray
    slopes: np.ndarray = field(default=None)

    @property
    def n(self) -> int:
        return len(self.lower)

    def project(self, p):
        return np.clip(p, self.lower, self.upper)

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        proj = self.project(p)
        excess = p - proj
        return self.base(proj) - np.sum(self.slopes * excess, axis=-1)

    def barycentric(self, p):
        """Return ``(lambdas, P)`` of the decomposition ``p = sum_a lambda_a P_a``."""
        p = np.asarray(p, dtype=float)
        proj = self.project(p)
        excess = p - proj
        total = np.abs(excess).sum()
        if total == 0.0:
            return np.zeros(self.n), np.tile(p, (self.n, 1))
        lam = np.abs(excess) / total
        P = np.tile(proj, (self.n, 1))
        P[np.arange(self.n), np.arange(self.n)] += np.sign(excess) * total
        return lam, P


# ---------------------------------------------------------------------------


def compute_A0(hamiltonians: Sequence[Hamiltonian]) -> float:
    return max(H.min_value for H in hamiltonians)


def flux_limited_value(F: FluxLimitedF, p) -> float:
    return F(p)


def neg_div(F, p):
    """``(-div F)(p)`` as the one-sided derivative of ``F`` along ``-(1, ..., 1)``.

    This is the rate that enters the origin update when ``U_0`` moves; at kinks
    the larger of the two one-sided rates is returned.
    """
    p = np.asarray(p, dtype=float)
    if isinstance(F, FluxLimitedF):
        return F.neg_div(p)
    if isinstance(F, GeneralF) and F.partials is not None:
        return -np.sum(F.partials(p), axis=-1)
    h = fd_step(np.max(np.abs(p), axis=-1))[..., None]
    f0 = F(p)
    back = (F(p - h) - f0) / h[..., 0]
    fwd = (f0 - F(p + h)) / h[..., 0]
    return np.maximum(back, fwd)


def neg_partial(F, p, axis: int, lower_side: bool = True):
    """Smaller of the two one-sided values of ``-dF/dp_axis``."""
    p = np.asarray(p, dtype=float)
    if isinstance(F, GeneralF) and F.partials is not None:
        return -F.partials(p)[..., axis]
    h = fd_step(p[..., axis])
    e = np.zeros(p.shape[-1])
    e[axis] = 1.0
    f0 = F(p)
    back = (F(p - h[..., None] * e) - f0) / h
    fwd = (f0 - F(p + h[..., None] * e)) / h
    return np.minimum(back, fwd) if lower_side else np.maximum(back, fwd)


def _box_grid(lower, upper, per_axis: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, per_axis) if hi > lo else np.array([lo]) for lo, hi in zip(lower, upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def sup_over_box(g, lower, upper, per_axis: int = 33, rounds: int = 3, maximize: bool = True) -> float:
    """Extremum of ``g`` over a box: dense grid plus local grid refinement."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    sgn = 1.0 if maximize else -1.0
    pts = _box_grid(lower, upper, per_axis)
    vals = sgn * np.asarray(g(pts))
    k = int(np.argmax(vals))
    best_val, best_pt = vals[k], pts[k]
    cell = (upper - lower) / max(per_axis - 1, 1)
    for _ in range(rounds):
        lo = np.maximum(lower, best_pt - cell)
        hi = np.minimum(upper, best_pt + cell)
        pts = _box_grid(lo, hi, 9)
        vals = sgn * np.asarray(g(pts))
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_pt = vals[k], pts[k]
        cell = cell / 4.0
    return float(sgn * best_val)


def sup_neg_div(F, lower, upper, per_axis: int = 33) -> float:
    return sup_over_box(lambda q: neg_div(F, q), lower, upper, per_axis=per_axis)


@dataclass
class LowerInverse:
    values: np.ndarray
    feasible: bool


def lower_inverse(F, K: float, others=None) -> LowerInverse:
    """Thresholds ``p_(K)`` with ``F(p) <= K  =>  p_a >= p_a(K)``.

    For ``F_A`` this is exactly ``pi_a^-(K)``. For a general non-increasing
    ``F`` the coordinates not being solved for are pinned at ``others``
    (default ``+1e6``); the thresholds are then sound for every ``p`` whose
    other coordinates do not exceed ``others``.
    """
    if isinstance(F, FluxLimitedF):
        floor = max(F.A, max(H.min_value for H in F.hamiltonians))
        if K < floor - TOL_F:
            return LowerInverse(np.full(F.n, np.inf), False)
        vals = np.array([H.inv_minus(K) for H in F.hamiltonians], dtype=float)
        return LowerInverse(vals, True)
    n = F.n
    pin = np.full(n, 1e6) if others is None else np.broadcast_to(np.asarray(others, dtype=float), (n,)).copy()
    vals = np.empty(n)
    for a in range(n):

        def ok(t, a=a):
            t = np.atleast_1d(t)
            pts = np.tile(pin, (t.size, 1))
            pts[:, a] = t
            return np.asarray(F(pts)) <= K

        if not ok(pin[a])[0]:
            return LowerInverse(np.full(n, np.inf), False)
        width = 1.0
        while ok(pin[a] - width)[0] and width < BRACKET_CAP:
            width *= 2.0
        if ok(pin[a] - width)[0]:
            vals[a] = -np.inf
            continue
        lo, hi = bisect_threshold(ok, np.array([pin[a] - width]), np.array([pin[a]]))
        vals[a] = hi[0]
    return LowerInverse(vals, True)


def build_F_tilde(F, lower, upper, strict: bool = True, per_axis: int = 33) -> ModifiedF:
    """Modification of ``F`` outside ``Q0`` with ``-div F~ <= sup_Q0 (-div F)``.

    ``C_a`` is the minimum of ``-dF/dp_a`` over ``Q0``. With ``strict=True``
    (strictly decreasing ``F``) a non-positive ``C_a`` is an error; with ``strict=False``
    (non-increasing ``F`` such as ``F_A``) ``C_a = 0`` is accepted.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape or np.any(lower > upper):
        raise ValueError("Q0 must be a non-empty box")
    slopes = np.empty(len(lower))
    for a in range(len(lower)):
        slopes[a] = sup_over_box(lambda q: neg_partial(F, q, a), lower, upper, per_axis=per_axis, maximize=False)
    if strict and np.any(slopes <= TOL_F):
        raise HypothesisError(f"F is not strictly decreasing on Q0: C = {slopes.tolist()}")
    if np.any(slopes < -TOL_F):
        raise HypothesisError(f"F is increasing somewhere on Q0: C = {slopes.tolist()}")
    return ModifiedF(F, lower, upper, np.maximum(slopes, 0.0))


@dataclass
class FReport:
    strict_margins: np.ndarray
    strict_ok: bool
    weak_ok: bool
    coercive_ok: bool

    @property
    def passed(self) -> bool:
        return self.strict_ok and self.coercive_ok


def validate_F(F, lower, upper, samples: int = 9) -> FReport:
    """Sampled monotonicity margins per coordinate and coercivity along ``p = -t(1,...,1)``."""
    if samples < 3:
        raise ValueError("need at least 3 samples per axis")
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = len(lower)
    pts = _box_grid(lower, upper, samples)
    step = (upper - lower) / (samples - 1)
    margins = np.empty(n)
    for a in range(n):
        e = np.zeros(n)
        e[a] = step[a]
        src = pts[pts[:, a] < upper[a] - 0.5 * step[a]]
        margins[a] = float(np.min(np.asarray(F(src)) - np.asarray(F(src + e))))
    ts = np.linspace(0.0, 1e3, 101)
    ray = np.asarray(F(-ts[:, None] * np.ones(n)))
    coercive = bool(np.all(np.diff(ray) > 0.0) and ray[-1] > ray[0] + 1.0)
    return FReport(margins, bool(np.all(margins > TOL_F)), bool(np.all(margins >= -TOL_F)), coercive)


# library of general junction functions addressable from configs


def exp_sum(n: int, weight: float = 1.0, offset: float = 0.0) -> GeneralF:
    """``sum_a weight * exp(-p_a) + offset``: strictly decreasing and coercive."""

    def fn(p):
        return weight * np.sum(np.exp(-p), axis=-1) + offset

    def partials(p):
        return -weight * np.exp(-p)

    return GeneralF(fn, n, partials, name="exp_sum")


def linear_sum(n: int, weight: float = 1.0) -> GeneralF:
    """``-weight * sum_a p_a``."""
    return GeneralF(lambda p: -weight * np.sum(p, axis=-1), n, lambda p: -weight * np.ones_like(p), name="linear_sum")


CUSTOM_F = {"exp_sum": exp_sum, "linear_sum": linear_sum}

__all__ = [
    "FluxLimitedF",
    "GeneralF",
    "ModifiedF",
    "HypothesisError",
    "LowerInverse",
    "FReport",
    "compute_A0",
    "flux_limited_value",
    "neg_div",
    "sup_neg_div",
    "lower_inverse",
    "build_F_tilde",
    "validate_F",
    "exp_sum",
    "linear_sum",
]
