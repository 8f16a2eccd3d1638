"""Coulomb-gas partition functions F_beta, pure partition functions Z_alpha.

Two independent routes evaluate F_beta:

* ``F_simplex`` sums positive tensor-product integrals rho_k with the 0/1
  coefficients from :func:`sle8.linkpat.coefficient`. Nothing can go wrong
  with phases here, so it serves as ground truth.
* ``F_det`` builds the N x N period matrix from 1-D interval integrals and
  takes a phase times f0 times its determinant. It is fast and is what the
  rest of the library uses.

Branch convention for the det route: the integrand is positive on
(x_{2N}, inf) and continued through the upper half-plane, so on the interval
(x_k, x_{k+1}) it carries the factor (-i)^{2N-k}.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import linkpat as lp
from .quad import Plan, check_config, make_plan, moments, simplex_integral

PHASE_TOL = 1e-8
DEFAULT_N = 24
ETA = 1e-4


class PhaseError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PartitionValue:
    pattern: lp.LinkPattern
    x: tuple
    value: float
    im_residue: float
    route: str
    est_error: float

    def __float__(self):
        return self.value


def f0(x) -> float:
    x = np.asarray(x, dtype=float)
    d = x[None, :] - x[:, None]
    iu = np.triu_indices(len(x), 1)
    return float(np.exp(0.25 * np.sum(np.log(d[iu]))))


def _logf0_batch(X):
    n = X.shape[1]
    out = np.zeros(X.shape[0])
    for i in range(n):
        for j in range(i + 1, n):
            out += np.log(X[:, j] - X[:, i])
    return 0.25 * out


_MI = np.array([1, -1j, -1, 1j])      # (-i)^e
_I = np.array([1, 1j, -1, -1j])       # i^e


def _phases(N):
    n2 = 2 * N
    return np.array([_MI[(n2 - k) % 4] for k in range(1, n2)])


def period_from_moments(beta: lp.LinkPattern, I) -> np.ndarray:
    """(P_beta)_{r,s} = sum_{k=a_r}^{b_r-1} (-i)^{2N-k} I_{k,s}; I is (..., 2N-1, N)."""
    N = beta.N
    ph = _phases(N)
    J = I[..., :N] * ph[:, None]
    rows = [J[..., a - 1:b - 1, :].sum(axis=-2) for a, b in beta.links]
    return np.stack(rows, axis=-2)


def global_phase(beta: lp.LinkPattern) -> complex:
    e = sum(2 * beta.N - a for a, _ in beta.links)
    return _I[e % 4]


def _norm_params(X):
    c = 0.5 * (X[:, 0] + X[:, -1])
    L = 0.5 * (X[:, -1] - X[:, 0])
    return c, L


def _F_from_moments(beta, I, X, L):
    N = beta.N
    P = period_from_moments(beta, I)
    det = np.linalg.det(P)
    val = global_phase(beta) * det * np.exp(_logf0_batch(X)) * L ** (N * (N - 1) / 2)
    return val


def F_det_batch(beta: lp.LinkPattern, X, plan: Plan | None = None,
                n: int = DEFAULT_N, return_complex: bool = False):
    """F_beta for a batch of configs X (B, 2N) with one shared node plan."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if plan is None:
        plan = make_plan(X, n)
    c, L = _norm_params(X)
    I = moments(X, beta.N, plan, c, L)
    val = _F_from_moments(beta, I, X, L[:] if np.ndim(L) else L)
    return val if return_complex else val.real


def F_all_batch(X, N: int, plan: Plan | None = None, n: int = DEFAULT_N):
    """Complex F_beta for every beta in enumerate_patterns(N); shape (C, B)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if plan is None:
        plan = make_plan(X, n)
    c, L = _norm_params(X)
    I = moments(X, N, plan, c, L)
    return np.stack([_F_from_moments(b, I, X, L) for b in lp.enumerate_patterns(N)])


def _check_phase(beta, val, tol):
    if abs(val.imag) > tol * abs(val.real) or val.real <= 0:
        raise PhaseError(f"{beta}: F = {val} fails the phase/positivity check")


def F_det(beta: lp.LinkPattern, x, n: int = DEFAULT_N, plan: Plan | None = None,
          phase_tol: float = PHASE_TOL, estimate: bool = True) -> PartitionValue:
    x = check_config(x)
    if len(x) != 2 * beta.N:
        raise ValueError(f"{beta} needs {2 * beta.N} points, got {len(x)}")
    val = complex(F_det_batch(beta, x, plan, n, return_complex=True)[0])
    _check_phase(beta, val, phase_tol)
    err = 0.0
    if estimate:
        val2 = complex(F_det_batch(beta, x, None, 2 * n, return_complex=True)[0])
        err = abs(val2.real - val.real)
    return PartitionValue(beta, tuple(x), val.real, abs(val.imag), "determinant", err)


@lru_cache(maxsize=4096)
def _rho(xkey, k, tol):
    return simplex_integral(np.array(xkey), k, tol)


def F_simplex(beta: lp.LinkPattern, x, tol: float = 1e-8) -> PartitionValue:
    x = check_config(x)
    if len(x) != 2 * beta.N:
        raise ValueError(f"{beta} needs {2 * beta.N} points, got {len(x)}")
    key = tuple(float(v) for v in x)
    tot, err = 0.0, 0.0
    for k in lp.simplex_terms(beta):
        r = _rho(key, k, tol)
        tot += r.value
        err += r.est_error
    f = f0(x)
    return PartitionValue(beta, key, f * tot, 0.0, "simplex", f * err)


def _minv_float(N):
    return np.array(lp.meander_inverse(N), dtype=float)


def Z_batch(alpha: lp.LinkPattern, X, plan: Plan | None = None, n: int = DEFAULT_N):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    F = F_all_batch(X, alpha.N, plan, n).real
    row = _minv_float(alpha.N)[lp.pattern_index(alpha)]
    return row @ F


def Z(alpha: lp.LinkPattern, x, n: int = DEFAULT_N, estimate: bool = True) -> PartitionValue:
    x = check_config(x)
    if len(x) != 2 * alpha.N:
        raise ValueError(f"{alpha} needs {2 * alpha.N} points, got {len(x)}")
    F = F_all_batch(x, alpha.N, None, n)[:, 0]
    for b, v in zip(lp.enumerate_patterns(alpha.N), F):
        _check_phase(b, v, PHASE_TOL)
    row = _minv_float(alpha.N)[lp.pattern_index(alpha)]
    val = float(row @ F.real)
    err = 0.0
    if estimate:
        F2 = F_all_batch(x, alpha.N, None, 2 * n)[:, 0].real
        err = abs(float(row @ F2) - val)
    if val <= 0:
        raise PhaseError(f"Z_{alpha} = {val} is not positive")
    return PartitionValue(alpha, tuple(x), val, float(np.max(np.abs(F.imag))), "determinant", err)


def crossing_probs(beta: lp.LinkPattern, x, n: int = DEFAULT_N) -> dict:
    """{alpha: M_{alpha,beta} Z_alpha / F_beta} over the compatible alpha."""
    x = check_config(x)
    N = beta.N
    F = F_all_batch(x, N, None, n)[:, 0].real
    Zs = _minv_float(N) @ F
    jb = lp.pattern_index(beta)
    M = lp.meander_matrix(N)
    pats = lp.enumerate_patterns(N)
    return {pats[i]: float(Zs[i] / F[jb]) for i in range(len(pats)) if M[i, jb]}


def crossing_prob(alpha: lp.LinkPattern, beta: lp.LinkPattern, x, n: int = DEFAULT_N) -> float:
    if alpha.N != beta.N:
        raise lp.PatternError("size mismatch")
    return crossing_probs(beta, x, n).get(alpha, 0.0)


def crossing_prob_batch(alpha, beta, X, plan: Plan | None = None, n: int = DEFAULT_N):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    M = lp.meander_matrix(beta.N)
    if not M[lp.pattern_index(alpha), lp.pattern_index(beta)]:
        return np.zeros(len(X))
    F = F_all_batch(X, beta.N, plan, n).real
    Zs = _minv_float(beta.N)[lp.pattern_index(alpha)] @ F
    return Zs / F[lp.pattern_index(beta)]


# -- derivatives -----------------------------------------------------------------

def _local_gap(X, i):
    g = np.full(X.shape[0], np.inf)
    if i > 0:
        g = np.minimum(g, X[:, i] - X[:, i - 1])
    if i < X.shape[1] - 1:
        g = np.minimum(g, X[:, i + 1] - X[:, i])
    return g


def dlog_batch(func, X, i: int, eta: float = ETA, n: int = DEFAULT_N):
    """d/dx_i log func(X) by Richardson-extrapolated central differences.

    ``func(Xs, plan)`` evaluates a positive function on a stack of configs;
    all stencil points share the plan built at X, so nodes are frozen.
    ``i`` is 0-based.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    h = eta * _local_gap(X, i)
    plan = make_plan(X, n)
    B = X.shape[0]
    S = np.repeat(X[None], 4, axis=0)
    for m, d in enumerate((h, -h, h / 2, -h / 2)):
        S[m, :, i] += d
    vals = np.log(func(S.reshape(4 * B, -1), plan).reshape(4, B))
    D1 = (vals[0] - vals[1]) / (2 * h)
    D2 = (vals[2] - vals[3]) / h
    return (4 * D2 - D1) / 3


def dlogF(beta: lp.LinkPattern, x, i: int, eta: float = ETA) -> float:
    """d/dx_i log F_beta, i 1-based."""
    x = check_config(x)
    return float(dlog_batch(lambda S, p: F_det_batch(beta, S, p), x, i - 1, eta)[0])


def dlogZ(alpha: lp.LinkPattern, x, i: int, eta: float = ETA) -> float:
    x = check_config(x)
    return float(dlog_batch(lambda S, p: Z_batch(alpha, S, p), x, i - 1, eta)[0])


def F_polygon(beta: lp.LinkPattern, mapped_points, derivatives) -> float:
    """Covariant F for a domain, given the boundary values and derivatives of
    a conformal map onto the half-plane at the marked points."""
    y = np.asarray(mapped_points, dtype=float)
    d = np.asarray(derivatives, dtype=float)
    if np.any(np.diff(y) <= 0):
        raise ValueError("mapped points must be strictly increasing")
    if np.any(d <= 0):
        raise ValueError("boundary derivatives must be positive")
    return float(np.prod(d ** -0.125) * F_det(beta, y, estimate=False).value)
