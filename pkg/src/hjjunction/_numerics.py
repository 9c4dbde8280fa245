"""Vectorized bracketing helpers shared by the Hamiltonian and vertex modules."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

TOL_X = 1e-10
TOL_F = 1e-9
BRACKET_CAP = 2.0**60
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def fd_step(p):
    return 1e-6 * np.maximum(1.0, np.abs(p))


def bisect_threshold(
    pred: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    max_iter: int = 200,
) -> tuple[np.ndarray, np.ndarray]:
    """Shrink ``[lo, hi]`` around the switch point of a monotone predicate.

    ``pred(lo)`` must be False and ``pred(hi)`` True (elementwise). Iterates
    until the midpoint no longer separates the endpoints, i.e. to machine
    resolution, and returns the final ``(lo, hi)`` pair.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        active = (mid > lo) & (mid < hi)
        if not active.any():
            break
        flag = np.asarray(pred(mid), dtype=bool)
        hi = np.where(active & flag, mid, hi)
        lo = np.where(active & ~flag, mid, lo)
    return lo, hi


def golden_min(
    f: Callable[[np.ndarray], np.ndarray],
    a,
    b,
    tol: float = TOL_X,
    max_iter: int = 200,
) -> tuple[np.ndarray, np.ndarray]:
    """Golden-section search for the minimum of a unimodal ``f`` on ``[a, b]``.

    Works elementwise on arrays of brackets. Returns ``(argmin, min_value)``,
    taking the best of the final probes and the two endpoints.
    """
    a = np.atleast_1d(np.array(a, dtype=float))
    b = np.atleast_1d(np.array(b, dtype=float))
    a, b = np.broadcast_arrays(a, b)
    a, b = a.copy(), b.copy()
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if np.all(b - a <= tol):
            break
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_next = np.where(left, b - INV_PHI * (b - a), d)
        d_next = np.where(left, c, a + INV_PHI * (b - a))
        probe = np.where(left, c_next, d_next)
        fp = f(probe)
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
        c, d = c_next, d_next
    xs = np.stack([a, c, d, b])
    fs = np.stack([f(a), fc, fd, f(b)])
    k = np.argmin(fs, axis=0)
    cols = np.arange(xs.shape[1])
    return xs[k, cols], fs[k, cols]


def fit_order(h, err) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    x = np.log(np.asarray(h, dtype=float))
    y = np.log(np.asarray(err, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
