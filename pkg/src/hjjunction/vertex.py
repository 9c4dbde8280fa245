"""Vertex test function for smooth uniformly convex Hamiltonians.

For ``x`` on branch ``a`` and ``y`` on branch ``b != a``::

    G(x, y) = A + sup_{lam >= A} { pi_a^+(lam) x - pi_b^-(lam) y - lam }

where the supremum is attained at the root of the foliation equation
``x / H_a'(pi_a^+(lam)) + y / |H_b'(pi_b^-(lam))| = 1`` (or at ``lam = A``
when the residual is already non-positive there). On a single branch ``G`` is
a smoothed version of ``A + (max(A, H_a))^*(x - y)``; the smoothing only acts on
``x - y`` in ``[-delta_a, 0]`` and bends the gradient linearly from
``pi_a^-(A)`` up to ``pi_a^+(A)``, so ``G(x, x) = 0`` and the compatibility
inequalities at the origin hold with no loss. ``delta_a`` keeps the negative
dip of ``G`` inside that band below ``gamma / 2``.

Branch labels are 1-based throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._numerics import BRACKET_CAP, bisect_threshold, fit_order
from .hamiltonians import Hamiltonian, argmax_conjugate, tilt_normalize
from .junction_conditions import FluxLimitedF


class VertexError(ValueError):
    pass


def _arr(v) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, dtype=float))


class VertexTestFunction:
    def __init__(self, hamiltonians: Sequence[Hamiltonian], gamma: float, A: Optional[float] = None, K: float = 5.0):
        if gamma <= 0:
            raise VertexError("gamma must be positive")
        hs, shifts = [], []
        for H in hamiltonians:
            if H.convexity_modulus is None or H.convexity_modulus <= 0:
                raise VertexError(f"{H.name}: a positive convexity modulus is required")
            Ht, s = tilt_normalize(H) if H.p0 != 0.0 else (H, 0.0)
            hs.append(Ht)
            shifts.append(s)
        self.hamiltonians = hs
        self.shifts = np.array(shifts)
        self.gamma = float(gamma)
        self.A0 = max(H.min_value for H in hs)
        base = self.A0 if A is None else float(A)
        self.A_gamma = max(base, self.A0 + self.gamma)
        self.K = float(K)
        self.flux = FluxLimitedF(hs, self.A_gamma)
        A_ = self.A_gamma
        self._b = np.array([H.inv_plus(A_) for H in hs])
        self._g = np.array([H.inv_minus(A_) for H in hs])
        width = []
        for H, b, g in zip(hs, self._b, self._g):
            cap = abs(float(H.derivative(g)))
            width.append(min(self.gamma * (b - g) / b**2, cap))
        self.smoothing_width = np.array(width)

    @property
    def n(self) -> int:
        return len(self.hamiltonians)

    # -- different branches ------------------------------------------------

    def _residual(self, lam, x, y, a: int, b: int):
        Ha, Hb = self.hamiltonians[a - 1], self.hamiltonians[b - 1]
        return x / Ha.derivative(Ha.inv_plus(lam)) + y / np.abs(Hb.derivative(Hb.inv_minus(lam))) - 1.0

    def solve_lambda(self, x, y, a: int, b: int) -> np.ndarray:
        if a == b:
            raise VertexError("solve_lambda needs two different branches")
        x, y = np.broadcast_arrays(_arr(x), _arr(y))
        if np.any(x < 0) or np.any(y < 0):
            raise VertexError("coordinates must be non-negative")
        A = self.A_gamma
        lam = np.full(x.shape, A)
        todo = self._residual(np.full(x.shape, A), x, y, a, b) > 0
        if not todo.any():
            return lam
        xs, ys = x[todo], y[todo]
        hi = np.full(xs.shape, A + 1.0)
        width = np.ones(xs.shape)
        while True:
            pending = (self._residual(hi, xs, ys, a, b) > 0) & (width < BRACKET_CAP)
            if not pending.any():
                break
            width = np.where(pending, 2.0 * width, width)
            hi = A + width
        if np.any(self._residual(hi, xs, ys, a, b) > 0):
            raise VertexError("foliation residual could not be bracketed")
        _, root = bisect_threshold(lambda l: self._residual(l, xs, ys, a, b) <= 0, np.full(xs.shape, A), hi)
        lam[todo] = root
        return lam

    # -- single branch -----------------------------------------------------

    def _phi_grad(self, q, a: int) -> np.ndarray:
        """Derivative of the smoothed ``(max(A, H_a))^*`` at ``q``."""
        H = self.hamiltonians[a - 1]
        b, g, d = self._b[a - 1], self._g[a - 1], self.smoothing_width[a - 1]
        q = _arr(q)
        out = np.empty(q.shape)
        pos = q >= 0
        slope_b = float(H.derivative(b))
        slope_g = float(H.derivative(g))
        if pos.any():
            qp = q[pos]
            far = qp > slope_b
            val = np.full(qp.shape, b)
            if far.any():
                val[far] = argmax_conjugate(H, qp[far])
            out[pos] = val
        neg = ~pos
        if neg.any():
            qn = q[neg]
            val = np.full(qn.shape, g)
            band = qn >= -d
            val[band] = b + (b - g) * qn[band] / d
            far = qn < slope_g
            if far.any():
                val[far] = argmax_conjugate(H, qn[far])
            out[neg] = val
        return out

    def _phi(self, q, a: int) -> np.ndarray:
        H = self.hamiltonians[a - 1]
        A = self.A_gamma
        b, g, d = self._b[a - 1], self._g[a - 1], self.smoothing_width[a - 1]
        q = _arr(q)
        p = self._phi_grad(q, a)
        raw = np.where(q >= 0, np.where(p == b, b * q - A, q * p - H(p)), np.where(p == g, g * q - A, q * p - H(p)))
        band = (q < 0) & (q >= -d)
        smooth = -A + b * q + (b - g) * q**2 / (2.0 * d)
        shift = -d * (b - g) / 2.0
        return np.where(q >= 0, raw, np.where(band, smooth, raw + shift))

    def _phi_second(self, q, a: int) -> np.ndarray:
        H = self.hamiltonians[a - 1]
        b, g, d = self._b[a - 1], self._g[a - 1], self.smoothing_width[a - 1]
        q = _arr(q)
        p = self._phi_grad(q, a)
        band = (q < 0) & (q >= -d)
        linear = ((q >= 0) & (p == b)) | ((q < -d) & (p == g))
        curv = 1.0 / H.second_derivative(p)
        return np.where(band, (b - g) / d, np.where(linear, 0.0, curv))

    # -- public evaluators -------------------------------------------------

    def value_grad(self, x, a: int, y, b: int, normalized: bool = True):
        x, y = np.broadcast_arrays(_arr(x), _arr(y))
        shift = self.A_gamma if normalized else 0.0
        if a == b:
            q = x - y
            gx = self._phi_grad(q, a)
            return self._phi(q, a) + shift, gx, -gx
        lam = self.solve_lambda(x, y, a, b)
        pa = self.hamiltonians[a - 1].inv_plus(lam)
        pb = self.hamiltonians[b - 1].inv_minus(lam)
        return pa * x - pb * y - lam + shift, pa, -pb

    def hessian(self, x, a: int, y, b: int):
        """``(G_xx, G_yy, G_xy, curved)``; ``curved`` is False where ``G`` is affine."""
        x, y = np.broadcast_arrays(_arr(x), _arr(y))
        if a == b:
            s = self._phi_second(x - y, a)
            return s, s, -s, s != 0
        lam = self.solve_lambda(x, y, a, b)
        Ha, Hb = self.hamiltonians[a - 1], self.hamiltonians[b - 1]
        pa, pb = Ha.inv_plus(lam), Hb.inv_minus(lam)
        h1, h2 = Ha.derivative(pa), Hb.derivative(pb)
        s1, s2 = Ha.second_derivative(pa), Hb.second_derivative(pb)
        fol = lam > self.A_gamma
        with np.errstate(divide="ignore", invalid="ignore"):
            dxx = 1.0 / (s1 * x / h1 - s2 * y * h1**2 / h2**3)
            dyy = 1.0 / (s1 * x * h2**2 / h1**3 - s2 * y / h2)
            dxy = 1.0 / (-s1 * x * h2 / h1**2 + s2 * y * h1 / h2**2)
        z = np.zeros_like(lam)
        return np.where(fol, dxx, z), np.where(fol, dyy, z), np.where(fol, dxy, z), fol

    # -- compatibility ---------------------------------------------------

    def origin_gradient_x(self, y, b: int) -> np.ndarray:
        """``grad_x G(0, y)`` for ``y`` on branch ``b``: one column per branch."""
        y = _arr(y)
        out = np.empty(y.shape + (self.n,))
        for e in range(1, self.n + 1):
            if e == b:
                out[..., e - 1] = self._phi_grad(-y, e)
            else:
                out[..., e - 1] = self.value_grad(np.zeros_like(y), e, y, b)[1]
        return out

    def origin_gradient_y(self, x, a: int) -> np.ndarray:
        """``-grad_y G(x, 0)`` for ``x`` on branch ``a``."""
        x = _arr(x)
        out = np.empty(x.shape + (self.n,))
        for e in range(1, self.n + 1):
            if e == a:
                out[..., e - 1] = self._phi_grad(x, e)
            else:
                out[..., e - 1] = -self.value_grad(x, a, np.zeros_like(x), e)[2]
        return out

    def compatibility_defect(self, x, a: int, y, b: int) -> np.ndarray:
        """``H(y, -G_y) - H(x, G_x)`` with ``F_A`` at the origin."""
        x, y = np.broadcast_arrays(_arr(x), _arr(y))
        _, gx, gy = self.value_grad(x, a, y, b)
        hx = self.hamiltonians[a - 1](gx)
        hy = self.hamiltonians[b - 1](-gy)
        xo, yo = x == 0, y == 0
        if xo.any():
            hx = np.where(xo, self.flux(self.origin_gradient_x(y, b)), hx)
        if yo.any():
            hy = np.where(yo, self.flux(self.origin_gradient_y(x, a)), hy)
        return hy - hx


# ---------------------------------------------------------------------------


def solve_lambda(G: VertexTestFunction, x, y, a: int = 1, b: int = 2):
    return G.solve_lambda(x, y, a, b)


def vertex_value_grad(G: VertexTestFunction, x, a: int, y, b: int, normalized: bool = True):
    return G.value_grad(x, a, y, b, normalized)


def vertex_hessian(G: VertexTestFunction, x, a: int, y, b: int):
    return G.hessian(x, a, y, b)


def sample_pairs(rng: np.random.Generator, n: int, K: float, count: int):
    """Random pairs with ``d(x, y) <= K``; a tenth of them sit at the origin."""
    a = rng.integers(1, n + 1, count)
    b = rng.integers(1, n + 1, count)
    x = rng.uniform(0, K, count)
    y = rng.uniform(0, K, count)
    same = a == b
    # same branch: |x - y| <= K holds already; different branches need x + y <= K
    over = ~same & (x + y > K)
    x[over], y[over] = K - x[over], K - y[over]
    k = count // 20
    x[:k] = 0.0
    y[k : 2 * k] = 0.0
    return a, x, b, y


def fd_hessian(G: VertexTestFunction, x, a: int, y, b: int, h: float = 1e-4):
    """Central second differences of ``G``."""
    f = lambda u, v: G.value_grad(u, a, v, b)[0]
    f0 = f(x, y)
    dxx = (f(x + h, y) - 2 * f0 + f(x - h, y)) / h**2
    dyy = (f(x, y + h) - 2 * f0 + f(x, y - h)) / h**2
    dxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4 * h**2)
    return dxx, dyy, dxy


@dataclass
class VertexReport:
    gamma: float
    A_gamma: float
    K: float
    sample_count: int
    hypothesis_class: str
    diagonal_defect: float
    compatibility_defect: float
    gradient_sup: float
    hessian_sup: float
    hessian_fd_rel_error: float
    superlinearity_ok: bool
    min_ratio_increase: float
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> str:
        d = asdict(self)
        d["passed"] = self.passed
        return json.dumps(d, sort_keys=True, indent=2)


def hessian_sup(G: VertexTestFunction, K: float, per_axis: int = 201) -> float:
    """Max absolute second derivative over a grid of ``J_K^2`` (all branch pairs)."""
    best = 0.0
    t = np.linspace(0.0, K, per_axis)
    X, Y = np.meshgrid(t, t, indexing="ij")
    for a in range(1, G.n + 1):
        for b in range(1, G.n + 1):
            mask = np.abs(X - Y) <= K if a == b else X + Y <= K
            xs, ys = X[mask], Y[mask]
            dxx, dyy, dxy, _ = G.hessian(xs, a, ys, b)
            best = max(best, float(np.max(np.abs(np.stack([dxx, dyy, dxy])))))
        # the smoothing band can be narrower than the grid step
        mid = -0.5 * G.smoothing_width[a - 1]
        best = max(best, float(np.max(np.abs(G._phi_second(np.array([mid]), a)))))
    return best


def certify_vertex(G: VertexTestFunction, K: Optional[float] = None, sample_count: int = 10_000, seed: int = 0) -> VertexReport:
    if sample_count < 1000:
        raise VertexError("need at least 1000 sample pairs")
    K = G.K if K is None else float(K)
    rng = np.random.default_rng(seed)
    a_s, x_s, b_s, y_s = sample_pairs(rng, G.n, K, sample_count)
    diag = -math.inf
    compat = -math.inf
    grad = 0.0
    fd_err = 0.0
    for a in range(1, G.n + 1):
        diag_pts = np.linspace(0, K, 101)
        diag = max(diag, float(np.max(G.value_grad(diag_pts, a, diag_pts, a)[0])))
        for b in range(1, G.n + 1):
            m = (a_s == a) & (b_s == b)
            if not m.any():
                continue
            x, y = x_s[m], y_s[m]
            _, gx, gy = G.value_grad(x, a, y, b)
            grad = max(grad, float(np.max(np.abs(gx))), float(np.max(np.abs(gy))))
            compat = max(compat, float(np.max(G.compatibility_defect(x, a, y, b))))
            if a != b:
                fd_err = max(fd_err, _fd_check(G, x, a, y, b))
    ratios_ok, min_inc = _superlinearity(G, K, rng)
    hs = hessian_sup(G, K)
    report = VertexReport(
        gamma=G.gamma,
        A_gamma=G.A_gamma,
        K=K,
        sample_count=sample_count,
        hypothesis_class="C2 uniformly convex, argmin 0",
        diagonal_defect=diag,
        compatibility_defect=compat,
        gradient_sup=grad,
        hessian_sup=hs,
        hessian_fd_rel_error=fd_err,
        superlinearity_ok=ratios_ok,
        min_ratio_increase=min_inc,
    )
    report.checks = {
        "diagonal": diag <= G.gamma,
        "compatibility": compat <= G.gamma,
        "hessian_fd": fd_err <= 1e-5,
        "superlinearity": ratios_ok,
    }
    return report


def _fd_check(G: VertexTestFunction, x, a: int, y, b: int, h: float = 1e-4) -> float:
    """Worst relative mismatch between closed-form and finite-difference Hessians.

    Only points whose whole stencil lies inside the foliation region (and
    inside the quarter plane) are compared.
    """
    keep = (x > 2 * h) & (y > 2 * h)
    x, y = x[keep], y[keep]
    if x.size == 0:
        return 0.0
    inside = np.ones(x.shape, dtype=bool)
    for dx_, dy_ in ((h, h), (h, -h), (-h, h), (-h, -h), (0, 0)):
        inside &= G.solve_lambda(x + dx_, y + dy_, a, b) > G.A_gamma * (1 + 1e-6) + 1e-6
    x, y = x[inside], y[inside]
    if x.size == 0:
        return 0.0
    exact = np.stack(G.hessian(x, a, y, b)[:3])
    approx = np.stack(fd_hessian(G, x, a, y, b, h))
    scale = np.maximum(np.abs(exact), 1e-3)
    return float(np.max(np.abs(exact - approx) / scale))


def _superlinearity(G: VertexTestFunction, K: float, rng: np.random.Generator, directions: int = 64):
    """``G(s x, s y) / (s d)`` over ``s = 1, 2, 4, 8`` for directions with ``d = K``.

    The ratio must never decrease and must grow overall.
    """
    ok = True
    min_inc = math.inf
    s = np.array([1.0, 2.0, 4.0, 8.0])
    for a in range(1, G.n + 1):
        for b in range(1, G.n + 1):
            theta = rng.uniform(0, 1, directions)
            if a == b:
                x = np.where(theta < 0.5, K * (1 + theta), K * theta)
                y = np.where(theta < 0.5, K * theta, K * (1 + theta))
                d = np.abs(x - y)
            else:
                x, y = K * theta, K * (1 - theta)
                d = x + y
            rows = np.stack([G.value_grad(si * x, a, si * y, b)[0] / (si * d) for si in s])
            steps = np.diff(rows, axis=0)
            ok &= bool(np.all(steps >= -1e-12) and np.all(rows[-1] > rows[0]))
            min_inc = min(min_inc, float(np.min(rows[-1] - rows[0])))
    return ok, min_inc


def growth_exponent(gammas: Sequence[float], sups: Sequence[float]) -> float:
    """Slope of ``log sup`` against ``log (1 / gamma)``."""
    return fit_order(1.0 / np.asarray(gammas, dtype=float), np.asarray(sups, dtype=float))
