"""Quasi-convex Hamiltonians: envelopes, argmin, generalized inverses, conjugates.

A :class:`Hamiltonian` wraps a vectorized callable together with its argmin
``p0`` and minimum value ``A = H(p0)``. Built-in families carry closed forms
for the inverse envelopes and the convex conjugate; everything else falls back
to bracketing searches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ._numerics import BRACKET_CAP, TOL_F, TOL_X, bisect_threshold, fd_step, golden_min
from .junction import DataError

ArrayFn = Callable[[np.ndarray], np.ndarray]


class HamiltonianError(ValueError):
    """A Hamiltonian fails the quasi-convexity / coercivity hypotheses."""


@dataclass(frozen=True)
class EnvelopePair:
    minus: ArrayFn
    plus: ArrayFn


@dataclass(frozen=True)
class Hamiltonian:
    fn: ArrayFn
    p0: float
    min_value: float
    deriv: Optional[ArrayFn] = None
    second: Optional[ArrayFn] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    convexity_modulus: Optional[float] = None
    exact_inv_plus: Optional[ArrayFn] = field(default=None, repr=False)
    exact_inv_minus: Optional[ArrayFn] = field(default=None, repr=False)
    exact_conjugate: Optional[ArrayFn] = field(default=None, repr=False)

    def __call__(self, p):
        return self.fn(np.asarray(p, dtype=float))

    @property
    def A(self) -> float:
        return self.min_value

    def derivative(self, p):
        p = np.asarray(p, dtype=float)
        if self.deriv is not None:
            return self.deriv(p)
        h = fd_step(p)
        return (self.fn(p + h) - self.fn(p - h)) / (2.0 * h)

    def second_derivative(self, p):
        p = np.asarray(p, dtype=float)
        if self.second is not None:
            return self.second(p)
        h = 1e-4 * np.maximum(1.0, np.abs(p))
        return (self.derivative(p + h) - self.derivative(p - h)) / (2.0 * h)

    def plus(self, p):
        p = np.asarray(p, dtype=float)
        return np.where(p >= self.p0, self.fn(p), self.min_value)

    def minus(self, p):
        p = np.asarray(p, dtype=float)
        return np.where(p <= self.p0, self.fn(p), self.min_value)

    def envelopes(self) -> EnvelopePair:
        return EnvelopePair(minus=self.minus, plus=self.plus)

    def inv_plus(self, a):
        return inverse_pi(self, "+", a)

    def inv_minus(self, a):
        return inverse_pi(self, "-", a)

    def conjugate(self, q):
        return conjugate(self, q)

    def shift_argument(self, c: float) -> "Hamiltonian":
        """``p -> H(p + c)``."""
        if c == 0.0:
            return self
        f, d, s = self.fn, self.deriv, self.second
        ip, im, cj = self.exact_inv_plus, self.exact_inv_minus, self.exact_conjugate
        params = dict(self.params)
        if "center" in params:
            params["center"] = params["center"] - c
        return replace(
            self,
            fn=lambda p: f(p + c),
            deriv=None if d is None else (lambda p: d(p + c)),
            second=None if s is None else (lambda p: s(p + c)),
            p0=self.p0 - c,
            params=params,
            exact_inv_plus=None if ip is None else (lambda a: ip(a) - c),
            exact_inv_minus=None if im is None else (lambda a: im(a) - c),
            exact_conjugate=None if cj is None else (lambda q: cj(q) - c * np.asarray(q)),
        )

    def mirrored(self) -> "Hamiltonian":
        """``p -> H(-p)``; turns a left-to-right line branch into a junction branch."""
        f, d, s = self.fn, self.deriv, self.second
        ip, im, cj = self.exact_inv_plus, self.exact_inv_minus, self.exact_conjugate
        return replace(
            self,
            fn=lambda p: f(-p),
            deriv=None if d is None else (lambda p: -d(-p)),
            second=None if s is None else (lambda p: s(-p)),
            p0=-self.p0,
            name=f"mirror({self.name})",
            exact_inv_plus=None if im is None else (lambda a: -im(a)),
            exact_inv_minus=None if ip is None else (lambda a: -ip(a)),
            exact_conjugate=None if cj is None else (lambda q: cj(-np.asarray(q))),
        )

    def lifted(self, delta: float) -> "Hamiltonian":
        """``p -> H(p) + delta``."""
        f = self.fn
        ip, im, cj = self.exact_inv_plus, self.exact_inv_minus, self.exact_conjugate
        params = dict(self.params)
        params["shift"] = params.get("shift", 0.0) + delta
        return replace(
            self,
            fn=lambda p: f(p) + delta,
            min_value=self.min_value + delta,
            params=params,
            exact_inv_plus=None if ip is None else (lambda a: ip(np.asarray(a, dtype=float) - delta)),
            exact_inv_minus=None if im is None else (lambda a: im(np.asarray(a, dtype=float) - delta)),
            exact_conjugate=None if cj is None else (lambda q: cj(q) - delta),
        )


# ---------------------------------------------------------------------------
# built-in families


def quadratic(center: float = 0.0, scale: float = 1.0, shift: float = 0.0) -> Hamiltonian:
    """``scale * (p - center)**2 + shift``."""
    if scale <= 0:
        raise HamiltonianError("quadratic scale must be positive")
    c, s, k = float(center), float(scale), float(shift)

    def inv(sign):
        def f(a):
            lev = np.maximum(np.asarray(a, dtype=float), k)
            with np.errstate(invalid="ignore"):
                r = c + sign * np.sqrt((lev - k) / s)
            return np.where(np.isposinf(lev), sign * np.inf, r)

        return f

    return Hamiltonian(
        fn=lambda p: s * (p - c) ** 2 + k,
        deriv=lambda p: 2.0 * s * (p - c),
        second=lambda p: np.full_like(np.asarray(p, dtype=float), 2.0 * s),
        p0=c,
        min_value=k,
        name="quadratic",
        params={"center": c, "scale": s, "shift": k},
        convexity_modulus=2.0 * s,
        exact_inv_plus=inv(1.0),
        exact_inv_minus=inv(-1.0),
        exact_conjugate=lambda q: c * np.asarray(q) + np.asarray(q) ** 2 / (4.0 * s) - k,
    )


def absolute(center: float = 0.0, scale: float = 1.0, shift: float = 0.0) -> Hamiltonian:
    """``scale * |p - center| + shift``."""
    if scale <= 0:
        raise HamiltonianError("absolute-value scale must be positive")
    c, s, k = float(center), float(scale), float(shift)

    def inv(sign):
        def f(a):
            lev = np.maximum(np.asarray(a, dtype=float), k)
            return c + sign * (lev - k) / s

        return f

    return Hamiltonian(
        fn=lambda p: s * np.abs(p - c) + k,
        deriv=lambda p: s * np.sign(p - c),
        second=lambda p: np.zeros_like(np.asarray(p, dtype=float)),
        p0=c,
        min_value=k,
        name="absolute",
        params={"center": c, "scale": s, "shift": k},
        exact_inv_plus=inv(1.0),
        exact_inv_minus=inv(-1.0),
    )


def asymmetric() -> Hamiltonian:
    """``max(-2p, p**2)``: convex, minimum 0 at 0, kinks at ``p = -2`` and ``p = 0``."""

    def inv_minus(a):
        lev = np.maximum(np.asarray(a, dtype=float), 0.0)
        return np.where(lev <= 4.0, -lev / 2.0, -np.sqrt(lev))

    def inv_plus(a):
        lev = np.maximum(np.asarray(a, dtype=float), 0.0)
        return np.sqrt(lev)

    return Hamiltonian(
        fn=lambda p: np.maximum(-2.0 * p, p * p),
        deriv=lambda p: np.where((p < 0) & (p > -2.0), -2.0, 2.0 * p),
        p0=0.0,
        min_value=0.0,
        name="asymmetric",
        exact_inv_plus=inv_plus,
        exact_inv_minus=inv_minus,
    )


def from_callable(
    fn: ArrayFn,
    bracket: tuple[float, float] = (-1e3, 1e3),
    deriv: Optional[ArrayFn] = None,
    name: str = "custom",
) -> Hamiltonian:
    """Wrap a vectorized callable, locating its argmin by golden section."""
    p0 = argmin(fn, bracket)
    return Hamiltonian(fn=fn, deriv=deriv, p0=p0, min_value=float(fn(np.asarray(p0))), name=name)


BUILTINS = {"quadratic": quadratic, "absolute": absolute, "asymmetric": asymmetric}


# ---------------------------------------------------------------------------
# operations


@dataclass
class HamiltonianReport:
    lipschitz_ok: bool
    coercive_ok: bool
    unimodal_ok: bool
    lipschitz_estimate: float
    lipschitz_bound: float
    sign_changes: int

    @property
    def passed(self) -> bool:
        return self.lipschitz_ok and self.coercive_ok and self.unimodal_ok


def _count_sign_changes(values: np.ndarray) -> tuple[int, bool]:
    diffs = np.diff(values)
    signs = np.sign(np.where(np.abs(diffs) <= TOL_F * np.maximum(1.0, np.abs(values[1:])), 0.0, diffs))
    signs = signs[signs != 0]
    changes = int(np.count_nonzero(signs[1:] != signs[:-1]))
    # unimodal (non-increasing then non-decreasing): at most one change, from - to +
    unimodal = changes == 0 or (changes == 1 and signs[0] < 0)
    return changes, unimodal


def validate_hamiltonian(H, interval: tuple[float, float] = (-10.0, 10.0), samples: int = 2001) -> HamiltonianReport:
    """Sampled check of Lipschitz continuity, coercivity trend and quasi-convexity."""
    if samples < 3:
        raise ValueError("need at least 3 samples")
    fn = H.fn if isinstance(H, Hamiltonian) else H
    p = np.linspace(interval[0], interval[1], samples)
    vals = np.asarray(fn(p), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise DataError("Hamiltonian is not finite on the sampling interval")
    slopes = np.abs(np.diff(vals)) / np.diff(p)
    lip_est = float(slopes.max())
    if isinstance(H, Hamiltonian) and H.deriv is not None:
        bound = float(sup_abs_derivative(H, interval[0], interval[1]))
    else:
        bound = lip_est
    lip_ok = math.isfinite(lip_est) and lip_est <= bound * (1.0 + 1e-6) + TOL_F
    k = max(1, samples // 20)
    coercive_ok = bool(vals[0] > vals[k] and vals[-1] > vals[-1 - k])
    changes, unimodal = _count_sign_changes(vals)
    return HamiltonianReport(bool(lip_ok), coercive_ok, bool(unimodal), lip_est, bound, changes)


def argmin(H, bracket: tuple[float, float], samples: int = 257) -> float:
    """Minimizer of a quasi-convex function inside ``bracket`` (golden section)."""
    fn = H.fn if isinstance(H, Hamiltonian) else H
    lo, hi = map(float, bracket)
    grid = np.linspace(lo, hi, samples)
    vals = np.asarray(fn(grid), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise DataError("Hamiltonian is not finite inside the bracket")
    _, unimodal = _count_sign_changes(vals)
    if not unimodal:
        raise HamiltonianError("samples are not unimodal inside the bracket")
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, samples - 1)]
    x, _ = golden_min(lambda q: np.asarray(fn(q), dtype=float), a, b, tol=TOL_X)
    return float(x[0])


def envelopes(H: Hamiltonian) -> EnvelopePair:
    return H.envelopes()


def inverse_pi(H: Hamiltonian, sign: str, a):
    """Generalized inverses of the monotone envelopes.

    ``sign="+"``: ``sup{p : H+(p) = max(a, A)}``; ``sign="-"``: ``inf{p : H-(p) = max(a, A)}``.
    ``a = +inf`` maps to ``+inf`` / ``-inf``.
    """
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    a_arr = np.asarray(a, dtype=float)
    scalar = a_arr.ndim == 0
    exact = H.exact_inv_plus if sign == "+" else H.exact_inv_minus
    if exact is not None:
        out = np.asarray(exact(a_arr), dtype=float)
        return float(out) if scalar else out
    level = np.atleast_1d(np.maximum(a_arr, H.min_value))
    direction = 1.0 if sign == "+" else -1.0
    out = np.full(level.shape, direction * np.inf)
    finite = np.isfinite(level)
    if finite.any():
        lev = level[finite]
        above = lambda p: np.asarray(H.fn(H.p0 + direction * p), dtype=float) > lev
        width = np.ones_like(lev)
        while True:
            pending = ~above(width) & (width < BRACKET_CAP)
            if not pending.any():
                break
            width = np.where(pending, 2.0 * width, width)
        lo, hi = bisect_threshold(above, np.zeros_like(lev), width)
        res = H.p0 + direction * lo
        res = np.where(above(width), res, direction * np.inf)
        out[finite] = res
    return float(out[0]) if scalar else out.reshape(a_arr.shape)


def tilt_normalize(H: Hamiltonian) -> tuple[Hamiltonian, float]:
    """Shift the argument so that the argmin sits at 0; returns ``(H~, p0)``."""
    shift = float(H.p0)
    Ht = H.shift_argument(shift)
    return replace(Ht, p0=0.0), shift


def sup_abs_derivative(H: Hamiltonian, lo: float, hi: float, samples: int = 129) -> float:
    """``sup |H'|`` on ``[lo, hi]``: sampling, one-sided probes at the ends, local refinement."""
    if hi < lo:
        lo, hi = hi, lo
    if hi == lo:
        return float(np.max(np.abs(_one_sided_derivatives(H, np.array([lo])))))
    p = np.linspace(lo, hi, samples)
    vals = np.abs(H.derivative(p))
    k = int(np.argmax(vals))
    best = float(vals[k])
    a, b = p[max(k - 1, 0)], p[min(k + 1, samples - 1)]
    if b > a:
        _, v = golden_min(lambda q: -np.abs(H.derivative(q)), a, b, tol=1e-12)
        best = max(best, float(-v[0]))
    inner = _one_sided_derivatives(H, np.array([lo, hi]), inward=True)
    return max(best, float(np.max(np.abs(inner))))


def _one_sided_derivatives(H: Hamiltonian, p: np.ndarray, inward: bool = False) -> np.ndarray:
    h = fd_step(p)
    fwd = (H.fn(p + h) - H.fn(p)) / h
    bwd = (H.fn(p) - H.fn(p - h)) / h
    if inward:
        return np.array([fwd[0], bwd[-1]])
    return np.concatenate([fwd, bwd])


def conjugate(H: Hamiltonian, q):
    """Convex conjugate ``sup_p (p q - H(p))`` for convex ``H``.

    Solves ``H'(p) = q`` by bisection on the (non-decreasing) derivative;
    returns ``+inf`` where the slope ``q`` is never reached.
    """
    q_arr = np.asarray(q, dtype=float)
    if H.exact_conjugate is not None:
        out = np.asarray(H.exact_conjugate(q_arr), dtype=float)
        return float(out) if q_arr.ndim == 0 else out
    p = argmax_conjugate(H, q_arr)
    with np.errstate(invalid="ignore"):
        val = np.where(np.isfinite(p), np.atleast_1d(q_arr) * p - H.fn(np.where(np.isfinite(p), p, 0.0)), np.inf)
    return float(val[0]) if q_arr.ndim == 0 else val.reshape(q_arr.shape)


def argmax_conjugate(H: Hamiltonian, q) -> np.ndarray:
    """Maximizer of ``p q - H(p)`` (largest one for ``q >= 0``, smallest for ``q < 0``)."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    out = np.empty(q.shape)
    for sgn, mask in ((1.0, q >= 0), (-1.0, q < 0)):
        if not mask.any():
            continue
        qq = sgn * q[mask]
        # in the mirrored variable r = sgn * (p - p0), slope sgn * H' is non-decreasing
        slope = lambda r: sgn * H.derivative(H.p0 + sgn * r)
        beyond = lambda r: slope(r) > qq
        width = np.ones_like(qq)
        while True:
            pending = ~beyond(width) & (width < BRACKET_CAP)
            if not pending.any():
                break
            width = np.where(pending, 2.0 * width, width)
        lo, _ = bisect_threshold(beyond, np.zeros_like(qq), width)
        out[mask] = np.where(beyond(width), H.p0 + sgn * lo, sgn * np.inf)
    return out
