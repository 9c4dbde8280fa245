"""Explicit monotone scheme on a junction, CFL selection and runtime monitors.

State arrays used internally have shape ``(N, imax + 1)`` with the shared
origin value repeated in column 0 (see :meth:`GridField.full`).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .hamiltonians import EnvelopePair, Hamiltonian, sup_abs_derivative
from .junction import DataError, Grid, GridField, sample_initial
from .junction_conditions import (
    FluxLimitedF,
    ModifiedF,
    build_F_tilde,
    lower_inverse,
    neg_div,
    sup_neg_div,
    sup_over_box,
)

CLOSURES = ("frozen-slope", "gradient-extrapolation")
GRADIENT_SLACK = 1e-9
MONOTONE_SLACK = 1e-12


class SchemeBlowup(ArithmeticError):
    """The update produced a non-finite value."""


class CFLError(ValueError):
    """The time step exceeds the CFL bound computed from the initial data."""


class InvariantViolation(AssertionError):
    """A monitored estimate failed in strict mode."""


@dataclass
class SchemeConfig:
    dx: float
    dt: float
    horizon: float
    cfl_safety: float = 0.9
    boundary_closure: str = "frozen-slope"

    def __post_init__(self):
        if not (self.dx > 0 and self.dt > 0):
            raise ValueError("dx and dt must be positive")
        if self.horizon < 0:
            raise ValueError("horizon must be non-negative")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.boundary_closure not in CLOSURES:
            raise ValueError(f"unknown boundary closure {self.boundary_closure!r}; expected one of {CLOSURES}")

    @property
    def n_T(self) -> int:
        return int(math.floor(self.horizon / self.dt * (1.0 + 1e-12)))


@dataclass
class GradientBounds:
    lower: np.ndarray
    upper: np.ndarray
    lower_origin: np.ndarray
    m0: float

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.lower_origin = np.asarray(self.lower_origin, dtype=float)
        if np.any(self.lower > self.upper) or np.any(self.lower_origin > self.upper):
            raise ValueError("gradient bounds are not ordered")

    def as_dict(self) -> dict:
        return {
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "lower_origin": self.lower_origin.tolist(),
            "m0": self.m0,
        }


@dataclass
class Monitors:
    m: list = field(default_factory=list)
    M: list = field(default_factory=list)
    cfl_margin: list = field(default_factory=list)
    W: Optional[GridField] = None
    gradient_violations: int = 0
    time_derivative_violations: int = 0
    cfl_violations: int = 0
    local_bound_violations: int = 0
    stability_violations: int = 0
    max_gradient_excess: float = 0.0
    max_stability_excess: float = -math.inf

    @property
    def bound_violations(self) -> dict:
        return {
            "gradient": self.gradient_violations,
            "time_derivative": self.time_derivative_violations,
            "cfl": self.cfl_violations,
            "local_gradient": self.local_bound_violations,
            "stability": self.stability_violations,
        }

    @property
    def total_violations(self) -> int:
        return sum(self.bound_violations.values())


@dataclass
class ModifiedHamiltonian:
    """``base`` on ``[lower, upper]``, continued linearly with slopes ``-C/2`` and ``+C/2``."""

    base: Hamiltonian
    lower: float
    upper: float
    C: float

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        inside = self.base(np.clip(p, self.lower, self.upper))
        left = self.base(np.asarray(self.lower)) - 0.5 * self.C * (p - self.lower)
        right = self.base(np.asarray(self.upper)) + 0.5 * self.C * (p - self.upper)
        return np.where(p < self.lower, left, np.where(p > self.upper, right, inside))

    def derivative(self, p):
        p = np.asarray(p, dtype=float)
        inner = self.base.derivative(np.clip(p, self.lower, self.upper))
        return np.where(p < self.lower, -0.5 * self.C, np.where(p > self.upper, 0.5 * self.C, inner))

    def as_hamiltonian(self) -> Hamiltonian:
        if not self.lower <= self.base.p0 <= self.upper:
            raise ValueError("clamp interval must contain the argmin")
        return Hamiltonian(
            fn=self.__call__,
            deriv=self.derivative,
            p0=self.base.p0,
            min_value=self.base.min_value,
            name=f"modified({self.base.name})",
        )


# ---------------------------------------------------------------------------
# single step


def numerical_hamiltonian(env: Union[EnvelopePair, Hamiltonian], p_plus, p_minus):
    """``max(H^-(p_plus), H^+(p_minus))``."""
    return np.maximum(env.minus(p_plus), env.plus(p_minus))


def closure_slopes(full: np.ndarray, dx: float) -> np.ndarray:
    """Backward slopes at the last node of every branch."""
    return (full[:, -1] - full[:, -2]) / dx


def _fluxes(full: np.ndarray, hamiltonians: Sequence[Hamiltonian], F, dx: float, ghost: np.ndarray):
    """Return ``(flux, p_plus)``, both ``(N, imax + 1)``; ``flux[:, 0]`` is ``F(p_{0,+})``."""
    n = full.shape[0]
    p_plus = np.empty_like(full)
    p_plus[:, :-1] = np.diff(full, axis=1) / dx
    p_plus[:, -1] = ghost
    flux = np.empty_like(full)
    for a in range(n):
        H = hamiltonians[a]
        flux[a, 1:] = np.maximum(H.plus(p_plus[a, :-1]), H.minus(p_plus[a, 1:]))
    flux[:, 0] = F(p_plus[:, 0])
    return flux, p_plus


def _ghost_for(full: np.ndarray, dx: float, closure: str, ghost: Optional[np.ndarray]) -> np.ndarray:
    if closure == "gradient-extrapolation" or ghost is None:
        return closure_slopes(full, dx)
    return np.asarray(ghost, dtype=float)


def _check_finite(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        a, i = np.argwhere(~np.isfinite(values))[0]
        raise SchemeBlowup(f"non-finite update at branch {a + 1}, node {i}")


def scheme_step(
    state: GridField,
    hamiltonians: Sequence[Hamiltonian],
    F,
    config: SchemeConfig,
    ghost: Optional[np.ndarray] = None,
) -> tuple[GridField, GridField]:
    """One explicit step; returns the new state and ``W = (U^{n+1} - U^n) / dt``.

    With the frozen-slope closure the slope beyond the last node is ``ghost``
    (default: the current backward slope there).
    """
    full = state.full()
    g = _ghost_for(full, config.dx, config.boundary_closure, ghost)
    flux, _ = _fluxes(full, hamiltonians, F, config.dx, g)
    new = full - config.dt * flux
    _check_finite(new)
    return GridField.from_full(state.grid, new), GridField.from_full(state.grid, -flux)


# ---------------------------------------------------------------------------
# CFL from initial data


def compute_cfl(
    u0_field: GridField,
    hamiltonians: Sequence[Hamiltonian],
    F,
    boundary_closure: str = "frozen-slope",
) -> tuple[GradientBounds, float]:
    """Gradient bounds and the largest admissible ``dt`` from one dry-run step."""
    full = u0_field.full()
    dx = u0_field.grid.dx
    flux, _ = _fluxes(full, hamiltonians, F, dx, closure_slopes(full, dx))
    m0 = float(np.min(-flux))
    if not math.isfinite(m0):
        raise DataError("initial discrete time derivative is not finite (is u0 Lipschitz?)")
    K = -m0
    lower, upper = [], []
    for H in hamiltonians:
        level = K + 1.0 if K == H.min_value else K
        lower.append(H.inv_minus(level))
        upper.append(H.inv_plus(level))
    upper = np.array(upper, dtype=float)
    lower = np.array(lower, dtype=float)
    lo0 = _origin_lower(F, K, upper)
    if np.any(lo0 == upper):
        lo0 = np.where(lo0 == upper, _origin_lower(F, K + 1.0, upper), lo0)
    bounds = GradientBounds(lower, upper, lo0, m0)
    speed = max(sup_abs_derivative(H, lo, hi) for H, lo, hi in zip(hamiltonians, lower, upper))
    speed = max(speed, sup_neg_div(F, lo0, upper))
    dt_max = math.inf if speed <= 0 else dx / speed
    return bounds, dt_max


def _origin_lower(F, K: float, upper: np.ndarray) -> np.ndarray:
    res = lower_inverse(F, K, others=upper)
    if not res.feasible:
        raise DataError(f"no gradient vector satisfies F(p) <= {K}")
    return res.values


def cfl_config(
    u0_field: GridField,
    hamiltonians: Sequence[Hamiltonian],
    F,
    horizon: float,
    cfl_safety: float = 0.9,
    boundary_closure: str = "frozen-slope",
) -> tuple[SchemeConfig, GradientBounds, float]:
    bounds, dt_max = compute_cfl(u0_field, hamiltonians, F, boundary_closure)
    dt = cfl_safety * dt_max
    cfg = SchemeConfig(u0_field.grid.dx, dt, horizon, cfl_safety, boundary_closure)
    return cfg, bounds, dt_max


def build_modified_hamiltonian(H: Hamiltonian, bounds: GradientBounds, branch: int = 0) -> ModifiedHamiltonian:
    lo, hi = float(bounds.lower[branch]), float(bounds.upper[branch])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("modified Hamiltonian needs finite bounds")
    return ModifiedHamiltonian(H, lo, hi, sup_abs_derivative(H, lo, hi))


def modified_problem(hamiltonians: Sequence[Hamiltonian], F, bounds: GradientBounds, strict: bool = False):
    """``(H~_a, F~)`` built from the gradient bounds."""
    Ht = [build_modified_hamiltonian(H, bounds, a).as_hamiltonian() for a, H in enumerate(hamiltonians)]
    Ft = build_F_tilde(F, bounds.lower_origin, bounds.upper, strict=strict)
    return Ht, Ft


def stability_constant(L0: float, hamiltonians: Sequence[Hamiltonian], F, A: Optional[float] = None) -> float:
    """``max{|A|, sup_{|p|<=L0} |H_a|, sup_{|p_a|<=L0} |F|}`` by sampling."""
    L0 = float(L0)
    if A is None and isinstance(F, FluxLimitedF):
        A = F.A
    c = abs(A) if A is not None and math.isfinite(A) else 0.0
    ps = np.linspace(-L0, L0, 2001)
    for H in hamiltonians:
        c = max(c, float(np.max(np.abs(H(ps)))))
        c = max(c, float(np.max(np.abs(H.plus(ps)))), float(np.max(np.abs(H.minus(ps)))))
    n = len(hamiltonians)
    box = np.full(n, L0)
    per_axis = 33 if n <= 3 else 9
    c = max(c, sup_over_box(lambda q: np.abs(F(q)), -box, box, per_axis=per_axis))
    return c


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Snapshot:
    n: int
    t: float
    U: np.ndarray
    W: np.ndarray
    p_plus: np.ndarray


@dataclass
class Trajectory:
    grid: Grid
    config: SchemeConfig
    bounds: Optional[GradientBounds]
    snapshots: list
    monitors: Monitors
    final: GridField

    def at(self, n: int) -> Snapshot:
        for s in self.snapshots:
            if s.n == n:
                return s
        raise KeyError(n)


Observer = Callable[[int, float, np.ndarray, np.ndarray], None]


def _interval_sup_abs_derivative(H: Hamiltonian, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ts = (0.0, 0.5, 1.0)
    return np.max([np.abs(H.derivative(a + t * (b - a))) for t in ts], axis=0)


def run(
    u0: Union[GridField, Callable],
    hamiltonians: Sequence[Hamiltonian],
    F,
    config: SchemeConfig,
    *,
    grid: Optional[Grid] = None,
    bounds: Optional[GradientBounds] = None,
    record: Union[str, int] = "final",
    observer: Optional[Observer] = None,
    stability_C0: Optional[float] = None,
    check_cfl: bool = True,
    ghost: Optional[np.ndarray] = None,
    steps: Optional[int] = None,
    strict: bool = False,
) -> Trajectory:
    """Advance ``n_T`` steps (or ``steps``) and monitor the discrete estimates.

    ``record`` is ``"final"``, ``"all"`` or a stride. ``observer(n, t, U, W)``
    sees every state before it is advanced (and the final state).
    """
    if not isinstance(u0, GridField):
        if grid is None:
            raise ValueError("a grid is required when u0 is a function")
        u0 = sample_initial(grid, u0)
    grid = u0.grid
    if abs(grid.dx - config.dx) > 1e-15 * grid.dx:
        raise ValueError("config.dx does not match the grid")
    dx, dt = config.dx, config.dt
    if bounds is None:
        bounds, dt_max = compute_cfl(u0, hamiltonians, F, config.boundary_closure)
        if check_cfl and dt > dt_max * (1.0 + 1e-12):
            raise CFLError(f"dt = {dt} exceeds the CFL bound {dt_max}")
    n_steps = config.n_T if steps is None else int(steps)
    full = u0.full()
    start = full.copy()
    g = ghost if ghost is not None else closure_slopes(full, dx)
    mon = Monitors()
    snaps: list = []
    prev_pp = None
    ratio = dt / dx

    def want(n: int) -> bool:
        if record == "all":
            return True
        if record == "final":
            return n == n_steps
        return n % int(record) == 0 or n == n_steps

    for n in range(n_steps + 1):
        gg = _ghost_for(full, dx, config.boundary_closure, g)
        flux, pp = _fluxes(full, hamiltonians, F, dx, gg)
        W = -flux
        t = n * dt
        mn, mx = float(W.min()), float(W.max())
        if mon.m:
            if mn < mon.m[-1] - MONOTONE_SLACK or mx > mon.M[-1] + MONOTONE_SLACK:
                mon.time_derivative_violations += 1
        mon.m.append(mn)
        mon.M.append(mx)
        _check_gradients(mon, pp, bounds)
        _check_local_bounds(mon, pp, hamiltonians, F, mn)
        if prev_pp is not None:
            D = _cfl_measure(prev_pp, pp, hamiltonians, F)
            mon.cfl_margin.append(D * ratio)
            if D * ratio > 1.0 + 1e-12:
                mon.cfl_violations += 1
        if stability_C0 is not None:
            excess = float(np.max(np.abs(full - start)) - stability_C0 * t)
            mon.max_stability_excess = max(mon.max_stability_excess, excess)
            if excess > 1e-12:
                mon.stability_violations += 1
        if observer is not None:
            observer(n, t, full, W)
        if want(n):
            snaps.append(Snapshot(n, t, full.copy(), W.copy(), pp.copy()))
        if n == n_steps:
            break
        new = full + dt * W
        _check_finite(new)
        new[:, 0] = new[0, 0]
        full = new
        prev_pp = pp
    mon.W = GridField.from_full(grid, W)
    if strict and mon.total_violations:
        raise InvariantViolation(f"monitor violations: {mon.bound_violations}")
    return Trajectory(grid, config, bounds, snaps, mon, GridField.from_full(grid, full))


def _check_gradients(mon: Monitors, pp: np.ndarray, bounds: GradientBounds) -> None:
    lo = np.concatenate([bounds.lower_origin[:, None], np.broadcast_to(bounds.lower[:, None], (len(bounds.lower), pp.shape[1] - 1))], axis=1)
    hi = bounds.upper[:, None]
    under = lo - pp
    over = pp - hi
    worst = float(max(under.max(), over.max()))
    mon.max_gradient_excess = max(mon.max_gradient_excess, worst)
    if worst > GRADIENT_SLACK:
        mon.gradient_violations += 1


def _check_local_bounds(mon: Monitors, pp: np.ndarray, hamiltonians, F, K: float) -> None:
    """Gradients implied by ``K <= min W`` at this step (interior and origin)."""
    bad = False
    for a, H in enumerate(hamiltonians):
        inner = pp[a, 1:-1]
        if inner.size:
            lo, hi = H.inv_minus(-K), H.inv_plus(-K)
            if np.any(inner < lo - GRADIENT_SLACK) or np.any(inner > hi + GRADIENT_SLACK):
                bad = True
    if isinstance(F, FluxLimitedF):
        res = lower_inverse(F, -K)
        if res.feasible and np.any(pp[:, 0] < res.values - GRADIENT_SLACK):
            bad = True
    if bad:
        mon.local_bound_violations += 1


def _cfl_measure(pp_old: np.ndarray, pp_new: np.ndarray, hamiltonians, F) -> float:
    d = 0.0
    for a, H in enumerate(hamiltonians):
        d = max(d, float(np.max(_interval_sup_abs_derivative(H, pp_old[a], pp_new[a]))))
    lo = np.minimum(pp_old[:, 0], pp_new[:, 0])
    hi = np.maximum(pp_old[:, 0], pp_new[:, 0])
    d = max(d, sup_over_box(lambda q: neg_div(F, q), lo, hi, per_axis=3, rounds=0))
    return d


# ---------------------------------------------------------------------------
# comparison, monotonicity, conservation form


def evolve(full: np.ndarray, hamiltonians, F, dx: float, dt: float, ghost: np.ndarray, steps: int, closure: str = "frozen-slope"):
    """Yield ``steps + 1`` states (including the start) as ``(N, imax + 1)`` arrays."""
    yield full
    for _ in range(steps):
        flux, _ = _fluxes(full, hamiltonians, F, dx, _ghost_for(full, dx, closure, ghost))
        full = full - dt * flux
        _check_finite(full)
        yield full


def discrete_comparison_check(
    U0: GridField,
    V0: GridField,
    hamiltonians,
    F,
    config: SchemeConfig,
    steps: int,
    slack: float = 1e-13,
) -> bool:
    """Advance both data with one operator and report whether ``U^n <= V^n`` persists.

    Both runs use the closure slopes of ``U0`` so that they are driven by the
    same discrete operator.
    """
    u, v = U0.full(), V0.full()
    if np.any(u > v):
        raise ValueError("U0 must lie below V0")
    g = closure_slopes(u, config.dx)
    gen_u = evolve(u, hamiltonians, F, config.dx, config.dt, g, steps, config.boundary_closure)
    gen_v = evolve(v, hamiltonians, F, config.dx, config.dt, g, steps, config.boundary_closure)
    for a, b in zip(gen_u, gen_v):
        if np.any(a > b + slack):
            return False
    return True


def monotonicity_probe(
    state: GridField,
    hamiltonians,
    F,
    config: SchemeConfig,
    rng: np.random.Generator,
    count: int = 1000,
    delta: float = 1e-3,
) -> float:
    """Smallest output change over ``count`` random single-node increases (should be >= 0)."""
    full = state.full()
    g = closure_slopes(full, config.dx)
    base, _ = _fluxes(full, hamiltonians, F, config.dx, g)
    out0 = full - config.dt * base
    worst = math.inf
    n, m = full.shape
    for _ in range(count):
        a, i = int(rng.integers(n)), int(rng.integers(m))
        bumped = full.copy()
        if i == 0:
            bumped[:, 0] += delta
        else:
            bumped[a, i] += delta
        flux, _ = _fluxes(bumped, hamiltonians, F, config.dx, g)
        out = bumped - config.dt * flux
        worst = min(worst, float(np.min(out - out0)))
    return worst


def extract_conservation_field(U: Union[GridField, np.ndarray], dx: Optional[float] = None) -> np.ndarray:
    """Staggered slopes ``V[a, i] = (U_{i+1} - U_i) / dx`` for ``i = 0..imax-1``."""
    if isinstance(U, GridField):
        dx = U.grid.dx
        U = U.full()
    return np.diff(U, axis=1) / dx


def conservation_residual(U_old: np.ndarray, U_new: np.ndarray, flux: np.ndarray, dx: float, dt: float) -> float:
    """``max |V^{n+1} - V^n + (dt/dx)(Hflux_{i+1} - Hflux_i)|`` over all cells."""
    V0 = extract_conservation_field(U_old, dx)
    V1 = extract_conservation_field(U_new, dx)
    rhs = -(dt / dx) * np.diff(flux, axis=1)
    return float(np.max(np.abs(V1 - V0 - rhs)))


def bln_flux_limiter(H: Hamiltonian, v_b: float) -> float:
    """Flux limiter equivalent to a BLN boundary value ``v_b``."""
    return float(H.plus(v_b))


# ---------------------------------------------------------------------------
# export


CSV_COLUMNS = ("t", "branch", "i", "x", "U", "W", "p_plus")


def _fmt(v: float) -> str:
    # adding 0.0 turns -0.0 into 0.0 so equal states print identically
    return "%.17g" % (float(v) + 0.0)


def write_csv(stream, grid: Grid, snapshots: Sequence[Snapshot]) -> None:
    """One row per (snapshot, branch, node); node 0 repeats the origin on every branch."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    xs = grid.coords
    for s in snapshots:
        for a in range(grid.num_branches):
            for i in range(grid.imax + 1):
                w.writerow([_fmt(s.t), a + 1, i, _fmt(xs[i]), _fmt(s.U[a, i]), _fmt(s.W[a, i]), _fmt(s.p_plus[a, i])])
