"""Quadrature for integrals with inverse square-root endpoint singularities.

Every integral here has the shape

    int_{x_k}^{x_{k+1}} g(u) prod_j |u - x_j|^{-1/2} du

with g smooth. The substitution u = m + h sin(theta) turns the two endpoint
factors into d(theta) exactly. What remains can still be nearly singular when
a neighbouring point x_{k-1} or x_{k+2} sits close to the interval, so the
theta range is split into panels graded geometrically toward such an end.
Each panel carries an n-point Gauss-Legendre rule.

To keep round-off out of the near-singular factors, nodes are stored through
a = 1 + sin(theta) and b = 1 - sin(theta), each computed from the distance to
its own end of the theta range.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numba as nb
import numpy as np

GRADE_RATIO = 0.25
GRADE_START = np.pi / 4
NODE_CAP_1D = 4096
NODE_CAP_TENSOR = 64


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadResult:
    value: float
    est_error: float
    nodes_used: int


@lru_cache(maxsize=None)
def _gl(n: int):
    t, w = np.polynomial.legendre.leggauss(n)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def check_config(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < 2 or len(x) % 2:
        raise ValueError(f"need an even number >= 2 of points, got shape {x.shape}")
    if not np.all(np.isfinite(x)) or np.any(np.diff(x) <= 0):
        raise ValueError("points must be finite and strictly increasing")
    return x


def _scale(d, h):
    """Distance in theta from the end of the range to the image of a pole."""
    return np.arccosh(1.0 + d / h)


def _half_panels(s: float):
    """Panel edges on [0, pi/2], measured from one end of the theta range."""
    if not s < 1.0:
        return [0.0, np.pi / 2]
    edges = [np.pi / 2]
    phi = GRADE_START
    while True:
        edges.append(phi)
        if phi <= s:
            break
        phi *= GRADE_RATIO
    edges.append(0.0)
    return edges[::-1]


@dataclass(frozen=True)
class IntervalRule:
    """Nodes for one interval, independent of the actual point positions."""

    a: np.ndarray       # 1 + sin(theta)
    b: np.ndarray       # 1 - sin(theta)
    w: np.ndarray       # d(theta) weights
    left: np.ndarray    # True where the node is referenced to the left end

    @property
    def size(self):
        return len(self.w)


def _build_rule(sl: float, sr: float, n: int) -> IntervalRule:
    t, wt = _gl(n)
    A, B, W, L = [], [], [], []
    for side, s in (("L", sl), ("R", sr)):
        e = _half_panels(s)
        for lo, hi in zip(e[:-1], e[1:]):
            c = lo + (hi - lo) * (t + 1) / 2
            near = 2 * np.sin(c / 2) ** 2
            if side == "L":
                A.append(near)
                B.append(2 - near)
            else:
                B.append(near)
                A.append(2 - near)
            W.append(wt * (hi - lo) / 2)
            L.append(np.full(n, side == "L"))
    return IntervalRule(*(np.concatenate(v) for v in (A, B, W, L)))


@dataclass(frozen=True)
class Plan:
    """One rule per interval; reusing a plan freezes the nodes."""

    rules: tuple[IntervalRule, ...]
    n: int


def make_plan(x, n: int = 24) -> Plan:
    """Build rules for config x (or a batch of configs, shape (B, 2N)).

    For a batch the grading covers the tightest configuration.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    g = np.diff(x, axis=1)
    m = g.shape[1]
    rules = []
    for k in range(m):
        h = g[:, k] / 2
        sl = np.min(_scale(g[:, k - 1], h)) if k > 0 else np.inf
        sr = np.min(_scale(g[:, k + 1], h)) if k < m - 1 else np.inf
        rules.append(_build_rule(float(sl), float(sr), n))
    return Plan(tuple(rules), n)


def _nodes(x, k: int, rule: IntervalRule):
    """u nodes and kernel-including weights for interval k (0-based), batched.

    x has shape (B, 2N); returns u, wk of shape (B, Q).
    """
    xl, xr = x[:, k:k + 1], x[:, k + 1:k + 2]
    h = (xr - xl) / 2
    a, b = rule.a[None, :], rule.b[None, :]
    u = np.where(rule.left[None, :], xl + h * a, xr - h * b)
    logk = np.zeros_like(u)
    for j in range(x.shape[1]):
        if j < k:
            d = (xl - x[:, j:j + 1]) + h * a
        elif j > k + 1:
            d = (x[:, j:j + 1] - xr) + h * b
        else:
            continue
        logk -= 0.5 * np.log(d)
    return u, rule.w[None, :] * np.exp(logk)


def moments(x, smax: int, plan: Plan | None = None, center=None, scale=None):
    """I[..., k, s] = int_{x_k}^{x_{k+1}} ((u-c)/L)^s prod|u-x_j|^{-1/2} du.

    k runs over the 2N-1 intervals (0-based), s over 0..smax-1. ``x`` may be a
    single config or a batch (B, 2N). ``center``/``scale`` default to 0/1.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    if plan is None:
        plan = make_plan(xb)
    B, n2 = xb.shape
    c = np.zeros((B, 1)) if center is None else np.broadcast_to(np.asarray(center, float), (B,))[:, None]
    L = np.ones((B, 1)) if scale is None else np.broadcast_to(np.asarray(scale, float), (B,))[:, None]
    out = np.empty((B, n2 - 1, smax))
    for k in range(n2 - 1):
        u, wk = _nodes(xb, k, plan.rules[k])
        v = (u - c) / L
        p = np.ones_like(v)
        for s in range(smax):
            out[:, k, s] = np.sum(wk * p, axis=1)
            p = p * v
    return out[0] if single else out


def interval_rule(x, k: int, n: int = 24, plan: Plan | None = None):
    """Nodes u and weights (kernel included) for interval k, 1-based."""
    x = check_config(x)
    if not 1 <= k <= len(x) - 1:
        raise ValueError(f"interval {k} outside 1..{len(x) - 1}")
    if plan is None:
        plan = make_plan(x, n)
    u, w = _nodes(x[None, :], k - 1, plan.rules[k - 1])
    return u[0], w[0]


def interval_integral(x, k: int, weight=None, tol: float = 1e-10,
                      n0: int = 8) -> QuadResult:
    """int_{x_k}^{x_{k+1}} weight(u) prod_j |u-x_j|^{-1/2} du with node doubling."""
    x = check_config(x)
    if not 1 <= k <= len(x) - 1:
        raise ValueError(f"interval {k} outside 1..{len(x) - 1}")
    f = (lambda u: np.ones_like(u)) if weight is None else weight
    prev = None
    n = n0
    while True:
        u, w = interval_rule(x, k, n)
        val = np.sum(w * f(u))
        if prev is not None:
            err = abs(val - prev)
            if err <= tol * abs(val) or err <= tol * np.sum(np.abs(w * f(u))) * 1e-3:
                return QuadResult(float(np.real_if_close(val)) if np.isrealobj(val) else val,
                                  float(err), len(u))
        if 2 * len(u) > NODE_CAP_1D:
            raise QuadratureError(f"interval {k}: no convergence within {NODE_CAP_1D} nodes")
        prev = val
        n *= 2


def _axis_rule(x, k: int, tol: float):
    """Smallest per-panel n whose low moments agree with the doubled rule."""
    N = len(x) // 2
    n = 8
    while True:
        u1, w1 = interval_rule(x, k, n)
        u2, w2 = interval_rule(x, k, 2 * n)
        c, L = x.mean(), x[-1] - x[0]
        m1 = np.array([np.sum(w1 * ((u1 - c) / L) ** s) for s in range(N)])
        m2 = np.array([np.sum(w2 * ((u2 - c) / L) ** s) for s in range(N)])
        if np.all(np.abs(m1 - m2) <= tol * np.max(np.abs(m2))):
            return n
        if len(u2) > NODE_CAP_TENSOR:
            return n
        n *= 2


@nb.njit(cache=True)
def _tensor_kernel(U, Wt, lens):
    """Odometer walk over the product grid; U, Wt are padded (N, max_len).

    pre[r] holds the weight and Vandermonde factors of axes 0..r-1, so moving
    axis r only recomputes the factors from r on.
    """
    N = len(lens)
    idx = np.zeros(N, dtype=np.int64)
    pre = np.ones(N + 1)
    total = 0.0
    r0 = 0
    last = N - 1
    while True:
        for r in range(r0, last):
            f = pre[r] * Wt[r, idx[r]]
            ur = U[r, idx[r]]
            for q in range(r):
                f *= abs(ur - U[q, idx[q]])
            pre[r + 1] = f
        # innermost axis in a tight loop
        p = pre[last]
        for m in range(lens[last]):
            ul = U[last, m]
            f = p * Wt[last, m]
            for q in range(last):
                f *= abs(ul - U[q, idx[q]])
            total += f
        r = last - 1
        while r >= 0:
            idx[r] += 1
            if idx[r] < lens[r]:
                break
            idx[r] = 0
            r -= 1
        if r < 0:
            return total
        r0 = r


def _tensor_sum(axes) -> float:
    """sum over the product grid of prod_r w_r * prod_{r<s} |u_s - u_r|."""
    lens = np.array([len(u) for u, _ in axes], dtype=np.int64)
    U = np.zeros((len(axes), lens.max()))
    Wt = np.zeros_like(U)
    for r, (u, w) in enumerate(axes):
        U[r, :len(u)] = u
        Wt[r, :len(w)] = w
    return float(_tensor_kernel(U, Wt, lens))


def simplex_integral(x, k, tol: float = 1e-8, dim_cap: int = 5) -> QuadResult:
    """Tensor-product value of

        int prod_{r<s}|u_s-u_r| prod_{r,i}|u_r-x_i|^{-1/2} du_1...du_N,

    u_r ranging over (x_{k_r}, x_{k_r+1}); zero when k has a repeat.
    """
    x = check_config(x)
    k = tuple(int(v) for v in k)
    if len(k) > dim_cap:
        raise QuadratureError(f"dimension {len(k)} above cap {dim_cap}")
    if len(set(k)) < len(k):
        return QuadResult(0.0, 0.0, 0)
    ks = sorted(k)
    ns = [_axis_rule(x, kk, tol * 1e-3) for kk in ks]
    coarse_axes = [interval_rule(x, kk, n) for kk, n in zip(ks, ns)]
    coarse = _tensor_sum(coarse_axes)
    # refine one axis at a time: the errors of the axes add to first order
    deltas = []
    nodes = int(np.prod([len(u) for u, _ in coarse_axes]))
    for r, (kk, n) in enumerate(zip(ks, ns)):
        axes = list(coarse_axes)
        axes[r] = interval_rule(x, kk, 2 * n)
        deltas.append(_tensor_sum(axes) - coarse)
        nodes += int(np.prod([len(u) for u, _ in axes]))
    fine = coarse + sum(deltas)
    err = float(sum(abs(d) for d in deltas))
    if err > tol * abs(fine):
        raise QuadratureError(f"tensor rule for k={k} not converged: {err:.2e}")
    return QuadResult(float(fine), err, nodes)
