"""Executable checks for the identities satisfied by F_beta and Z_alpha.

Every check returns a :class:`CheckReport`. A report passes when
|measured - target| <= tolerance, relative to |target| when the target is
nonzero. Finite differences always reuse one quadrature plan across the
stencil so that node positions do not move with the points.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ellipk

from . import linkpat as lp
from . import scmap
from .coulomb import F_all_batch, F_det, F_det_batch, F_simplex, Z_batch, dlogF
from .quad import check_config, make_plan

TOL_ALGEBRAIC = 1e-8
TOL_COVARIANCE = 1e-6
TOL_PDE = 1e-4
TOL_GENERIC = 1e-3
TOL_LOG = 0.02
R2_MIN = 0.9999
LOG_LADDER = (1e-6, 1e-3)


@dataclass
class CheckReport:
    check: str
    inputs: dict
    measured: float
    target: float
    tolerance: float
    passed: bool = field(init=False)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.measured = float(self.measured)
        self.target = float(self.target)
        err = abs(self.measured - self.target)
        scale = abs(self.target) if self.target != 0 else 1.0
        self.passed = bool(np.isfinite(self.measured) and err <= self.tolerance * scale)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def _gate(report: CheckReport, ok: bool) -> CheckReport:
    report.passed = bool(report.passed and ok)
    return report


# -- evaluators ------------------------------------------------------------------

def _evaluator(kind: str, pattern: lp.LinkPattern):
    if kind == "F":
        return lambda S, plan=None: F_det_batch(pattern, S, plan)
    if kind == "Z":
        return lambda S, plan=None: Z_batch(pattern, S, plan)
    raise ValueError(f"kind must be F or Z, got {kind!r}")


def _reduced_value(kind, pattern, x):
    """Value of F or Z for a possibly empty pattern (empty -> 1)."""
    if pattern is None:
        return 1.0
    return float(_evaluator(kind, pattern)(np.asarray(x)[None, :])[0])


# -- PDE -------------------------------------------------------------------------

def pde_terms(kind: str, pattern: lp.LinkPattern, x, j: int, eta: float = 1e-3):
    """Gradient of log G and d_j^2 log G at x, by Richardson central differences.

    One stacked evaluation on a frozen plan; j is 1-based.
    """
    x = check_config(x)
    n2 = len(x)
    gaps = np.diff(x)
    h = eta * float(np.min(gaps))
    G = _evaluator(kind, pattern)
    rows = [x]
    for i in range(n2):
        for d in (h, -h, h / 2, -h / 2):
            y = x.copy()
            y[i] += d
            rows.append(y)
    S = np.array(rows)
    if np.any(np.diff(S, axis=1) <= 0):
        raise ValueError("finite-difference stencil leaves the ordered configurations")
    vals = np.log(G(S, make_plan(x[None, :])))
    v0 = vals[0]
    v = vals[1:].reshape(n2, 4)
    grad = (4 * (v[:, 2] - v[:, 3]) / h - (v[:, 0] - v[:, 1]) / (2 * h)) / 3
    j0 = j - 1
    d2h = (v[j0, 0] - 2 * v0 + v[j0, 1]) / h ** 2
    d2h2 = (v[j0, 2] - 2 * v0 + v[j0, 3]) / (h / 2) ** 2
    hess = (4 * d2h2 - d2h) / 3
    return grad, hess


def pde_residual(kind: str, pattern: lp.LinkPattern, x, j: int,
                 tol: float = TOL_PDE) -> CheckReport:
    """(D^(j) G)/G times min-gap^2, where
    D^(j) = 4 d_j^2 + sum_{i != j} [2/(x_i - x_j) d_i + (1/4)/(x_i - x_j)^2]."""
    x = check_config(x)
    g, gjj = pde_terms(kind, pattern, x, j)
    j0 = j - 1
    r = 4 * (gjj + g[j0] ** 2)
    for i in range(len(x)):
        if i != j0:
            d = x[i] - x[j0]
            r += 2 * g[i] / d + 0.25 / d ** 2
    res = abs(r) * float(np.min(np.diff(x))) ** 2
    return CheckReport(f"pde/{kind}", {"pattern": str(pattern), "x": list(map(float, x)), "j": j},
                       res, 0.0, tol)


# -- Mobius covariance -----------------------------------------------------------

def special_conformal_range(x):
    """Allowed xi for z -> z/(1 + xi z) after centring x at its midpoint."""
    x = np.asarray(x, dtype=float)
    c = 0.5 * (x[0] + x[-1])
    y = x - c
    return c, (-1.0 / y[-1], -1.0 / y[0])


def mobius_check(kind: str, pattern: lp.LinkPattern, x, transform: str, param: float,
                 tol: float = TOL_COVARIANCE) -> CheckReport:
    """Relative defect of G(x) = prod phi'(x_i)^(-1/8) G(phi(x)).

    transform: "translation" (shift by param), "scaling" (factor param) or
    "special" (z -> z/(1 + param z) after centring x so that x_1 < 0 < x_2N).
    """
    x = check_config(x)
    G = _evaluator(kind, pattern)
    if transform == "translation":
        y, dphi = x + param, np.ones_like(x)
    elif transform == "scaling":
        if param <= 0:
            raise ValueError("scaling factor must be positive")
        y, dphi = param * x, np.full_like(x, param)
    elif transform == "special":
        c, (lo, hi) = special_conformal_range(x)
        if not lo < param < hi:
            raise ValueError(f"xi={param} outside ({lo}, {hi}); the map would break the ordering")
        x = x - c
        den = 1 + param * x
        y, dphi = x / den, den ** -2.0
    else:
        raise ValueError(f"unknown transform {transform!r}")
    if np.any(np.diff(y) <= 0):
        raise ValueError("transformed points are not increasing")
    g0 = float(G(x[None, :])[0])
    g1 = float(G(y[None, :])[0])
    defect = abs(np.prod(dphi ** -0.125) * g1 - g0) / abs(g0)
    return CheckReport(f"mobius/{transform}/{kind}",
                       {"pattern": str(pattern), "x": list(map(float, x)), "param": param},
                       defect, 0.0, tol)


# -- fusion asymptotics ----------------------------------------------------------

def _collapse(x, j: int, xi: float | None, eps):
    """Configs with x_j, x_{j+1} = xi -/+ eps/2, translated so xi sits at 0.

    Returns the stacked configs, the actual float separations, and the
    reduced config (also translated).
    """
    x = check_config(x)
    j0 = j - 1
    left = x[j0 - 1] if j0 > 0 else -np.inf
    right = x[j0 + 2] if j0 + 2 < len(x) else np.inf
    if xi is None:
        xi = 0.5 * (x[j0] + x[j0 + 1])
    if not left < xi < right:
        raise ValueError(f"xi={xi} not strictly between the neighbours")
    red = np.delete(x, [j0, j0 + 1]) - xi
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    S = np.empty((len(eps), len(x)))
    S[:, :j0] = red[:j0]
    S[:, j0 + 2:] = red[j0:]
    S[:, j0] = -eps / 2
    S[:, j0 + 1] = eps / 2
    actual = S[:, j0 + 1] - S[:, j0]
    gap = min(xi - left, right - xi)
    if not np.isfinite(gap):
        gap = x[j0 + 1] - x[j0]
    return S, actual, red, gap


def _red_pattern(pattern, j, tie: bool):
    if pattern.N == 1:
        return None
    return lp.wp_hat(pattern, j) if tie else lp.remove(pattern, j)


def _log_fit(eps, vals):
    L = np.abs(np.log(eps))
    A = np.stack([np.ones_like(L), L], axis=1)
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    resid = vals - A @ coef
    ss = np.sum((vals - vals.mean()) ** 2)
    r2 = 1 - np.sum(resid ** 2) / ss if ss > 0 else 1.0
    return float(coef[0]), float(coef[1]), float(r2)


def asy_generic(kind: str, pattern: lp.LinkPattern, x, j: int, xi: float | None = None,
                ladder=None, tol: float = TOL_GENERIC) -> CheckReport:
    """G / eps^(1/4) -> pi G_reduced, extrapolated in eps.

    For F this is the channel {j,j+1} in beta (reduced pattern beta/{j,j+1});
    for Z it is {j,j+1} not in alpha (reduced pattern tie-then-remove).
    """
    link_in = (j, j + 1) in pattern
    if kind == "F" and not link_in:
        raise ValueError(f"{{{j},{j + 1}}} is not a link of {pattern}; use asy_log")
    if kind == "Z" and link_in:
        raise ValueError(f"{{{j},{j + 1}}} is a link of {pattern}; use asy_log")
    red_pat = _red_pattern(pattern, j, tie=(kind == "Z"))
    x = check_config(x)
    j0 = j - 1
    probe = _collapse(x, j, xi, [1.0])[3]
    r = np.asarray(ladder if ladder is not None else [1e-3 / 2 ** k for k in range(4)])
    S, eps, red, _ = _collapse(x, j, xi, r * probe)
    vals = _evaluator(kind, pattern)(S) / eps ** 0.25
    # the leading correction is linear in eps up to logs; Richardson on the last pair
    lim = 2 * vals[-1] - vals[-2] if len(vals) > 1 else vals[-1]
    target = math.pi * (_reduced_value(kind, red_pat, red) if red_pat is not None else 1.0)
    return CheckReport(f"asy-generic/{kind}",
                       {"pattern": str(pattern), "x": list(map(float, x)), "j": j,
                        "reduced": str(red_pat) if red_pat else ""},
                       lim, target, tol, extra={"eps": eps.tolist(), "ratios": vals.tolist()})


def asy_log(kind: str, pattern: lp.LinkPattern, x, j: int, xi: float | None = None,
            ladder=None, n_points: int = 12, tol: float = TOL_LOG, r2_min: float = R2_MIN) -> CheckReport:
    """Regress G / eps^(1/4) = a + b |log eps|; compare b with G_reduced.

    For F this is the channel {j,j+1} not in beta (reduced pattern
    tie-then-remove); for Z it is {j,j+1} in alpha (alpha/{j,j+1}).
    """
    link_in = (j, j + 1) in pattern
    if kind == "F" and link_in:
        raise ValueError(f"{{{j},{j + 1}}} is a link of {pattern}; use asy_generic")
    if kind == "Z" and not link_in:
        raise ValueError(f"{{{j},{j + 1}}} is not a link of {pattern}; use asy_generic")
    if kind == "Z" and pattern.N == 1:
        raise ValueError("no logarithmic channel for a single link")
    red_pat = _red_pattern(pattern, j, tie=(kind == "F"))
    x = check_config(x)
    gap = _collapse(x, j, xi, [1.0])[3]
    lo, hi = LOG_LADDER if ladder is None else ladder
    r = np.geomspace(hi, lo, n_points)
    S, eps, red, _ = _collapse(x, j, xi, r * gap)
    vals = _evaluator(kind, pattern)(S) / eps ** 0.25
    a, b, r2 = _log_fit(eps, vals)
    target = _reduced_value(kind, red_pat, red)
    rep = CheckReport(f"asy-log/{kind}",
                      {"pattern": str(pattern), "x": list(map(float, x)), "j": j,
                       "reduced": str(red_pat)},
                      b, target, tol, extra={"intercept": a, "r2": r2})
    return _gate(rep, r2 >= r2_min)


def asy_fibre_sum(gamma: lp.LinkPattern, x, j: int, xi: float | None = None,
                  ladder=None, tol: float = TOL_GENERIC) -> CheckReport:
    """Sum over all alpha with {j,j+1} not in alpha and wp_hat(alpha, j) = gamma
    of lim Z_alpha / eps^(1/4), compared with pi Z_gamma at the reduced points.

    x has 2N = 2 gamma.N + 2 points. Several alpha can share the same image
    under the tie-and-remove move; the per-alpha limits then split pi Z_gamma
    between them and only the sum is fixed.
    """
    x = check_config(x)
    N = len(x) // 2
    fibre = [a for a in lp.enumerate_patterns(N)
             if (j, j + 1) not in a and lp.wp_hat(a, j) == gamma]
    probe = _collapse(x, j, xi, [1.0])[3]
    r = np.asarray(ladder if ladder is not None else [1e-3 / 2 ** k for k in range(4)])
    S, eps, red, _ = _collapse(x, j, xi, r * probe)
    Fall = F_all_batch(S, N).real
    Minv = np.array(lp.meander_inverse(N), dtype=float)
    rows = [lp.pattern_index(a) for a in fibre]
    vals = (Minv[rows] @ Fall).sum(axis=0) / eps ** 0.25
    lim = 2 * vals[-1] - vals[-2]
    target = math.pi * _reduced_value("Z", gamma, red)
    return CheckReport("asy-fibre/Z", {"gamma": str(gamma), "x": list(map(float, x)), "j": j,
                                       "fibre": [str(a) for a in fibre]},
                       lim, target, tol)


def asy_check(kind, pattern, x, j, **kw) -> CheckReport:
    """Dispatch to the channel dictated by whether {j,j+1} is a link."""
    link_in = (j, j + 1) in pattern
    generic = link_in if kind == "F" else not link_in
    return asy_generic(kind, pattern, x, j, **kw) if generic else asy_log(kind, pattern, x, j, **kw)


# -- Lim collocation -------------------------------------------------------------

def _insertion_center(pos: dict, link):
    """Centre for a new adjacent pair among the already placed points."""
    a, b = link
    if not pos:
        return 0.0, 0.5
    labels = sorted(pos)
    left = [pos[k] for k in labels if k < a]
    right = [pos[k] for k in labels if k > b]
    if left and right:
        xl, xr = left[-1], right[0]
        return 0.5 * (xl + xr), 0.5 * (xr - xl)
    if left:
        span = pos[labels[-1]] - pos[labels[0]] if len(labels) > 1 else 1.0
        return left[-1] + span, span
    span = pos[labels[-1]] - pos[labels[0]] if len(labels) > 1 else 1.0
    return right[0] - span, span


def lim_matrix(alpha: lp.LinkPattern, ladder=None, n_points: int = 8):
    """Lim_alpha applied to every Z_beta of the same size; returns (values, min R^2).

    Links are collapsed in the allowable order of alpha: every link but the
    last with the log normalisation (slope of Z/eps^(1/4) against |log eps|),
    the last one exactly at the points (-1/2, 1/2). The configs are built from
    the outside in, each time translating so the new pair is centred at 0.
    """
    N = alpha.N
    order = lp.allowable_ordering(alpha)
    lo, hi = LOG_LADDER if ladder is None else ladder
    r = np.geomspace(hi, lo, n_points)
    pats = lp.enumerate_patterns(N)
    Minv = np.array(lp.meander_inverse(N), dtype=float)

    # leaves: list of (position dict, eps tuple for levels N-1..1)
    leaves = [({order[-1][0]: -0.5, order[-1][1]: 0.5}, ())]
    for k in range(N - 2, -1, -1):
        new = []
        for pos, eps_hist in leaves:
            xi, g = _insertion_center(pos, order[k])
            base = {lab: p - xi for lab, p in pos.items()}
            for rr in r:
                e = rr * g
                p = dict(base)
                p[order[k][0]] = -e / 2
                p[order[k][1]] = e / 2
                new.append((p, eps_hist + (p[order[k][1]] - p[order[k][0]],)))
        leaves = new
    X = np.array([[pos[lab] for lab in range(1, 2 * N + 1)] for pos, _ in leaves])
    if np.any(np.diff(X, axis=1) <= 0):
        raise AssertionError("collocation configs not ordered")
    Zall = Minv @ F_all_batch(X, N).real           # (C, leaves)
    eps = np.array([e for _, e in leaves]).reshape((n_points,) * (N - 1) + (N - 1,)) if N > 1 else None
    vals = Zall.reshape((len(pats),) + (n_points,) * (N - 1))
    r2min = 1.0
    # innermost level is the last axis; fold it with regressions
    for lev in range(N - 1, 0, -1):
        e = eps[..., lev - 1]
        L = np.abs(np.log(e))
        v = vals / e ** 0.25
        A_mean = L.mean(axis=-1, keepdims=True)
        V_mean = v.mean(axis=-1, keepdims=True)
        cov = ((L - A_mean) * (v - V_mean)).sum(axis=-1)
        var = ((L - A_mean) ** 2).sum(axis=-1)
        slope = cov / var
        pred = V_mean + slope[..., None] * (L - A_mean)
        ss = ((v - V_mean) ** 2).sum(axis=-1)
        r2 = np.where(ss > 0, 1 - ((v - pred) ** 2).sum(axis=-1) / np.where(ss > 0, ss, 1), 1.0)
        # only fits with a real log signal carry information about R^2
        sig = np.abs(slope) > 1e-3 * np.max(np.abs(slope))
        if np.any(sig):
            r2min = min(r2min, float(r2[sig].min()))
        vals = slope
        eps = eps[..., 0, :] if lev > 1 else None
    return {p: float(v) for p, v in zip(pats, np.atleast_1d(vals))}, r2min


def lim_collocation(alpha: lp.LinkPattern, beta: lp.LinkPattern, ladder=None,
                    n_points: int = 8) -> CheckReport:
    """Lim_alpha(Z_beta), expected pi when beta = alpha and 0 otherwise."""
    if alpha.N != beta.N:
        raise lp.PatternError("size mismatch")
    vals, r2 = lim_matrix(alpha, ladder, n_points)
    diag = alpha == beta
    v = vals[beta]
    if diag:
        rep = CheckReport("lim/diagonal", {"alpha": str(alpha), "beta": str(beta)},
                          v, math.pi, TOL_LOG)
    else:
        rep = CheckReport("lim/off-diagonal", {"alpha": str(alpha), "beta": str(beta)},
                          abs(v) / math.pi, 0.0, 0.05)
    rep.extra["r2_min"] = r2
    return rep


# -- algebraic identities ----------------------------------------------------------

def closed_form(beta: lp.LinkPattern, x) -> float:
    """Known closed forms for N = 1 and N = 2 (complete elliptic integrals)."""
    x = check_config(x)
    if beta.N == 1:
        return math.pi * (x[1] - x[0]) ** 0.25
    if beta.N != 2:
        raise ValueError("closed forms only for N <= 2")
    x1, x2, x3, x4 = x
    z = (x2 - x1) * (x4 - x3) / ((x3 - x1) * (x4 - x2))
    # 2F1(1/2, 1/2; 1; m) = (2/pi) K(m)
    if beta == lp.all_simple(2):
        return 2 * math.pi * ((x4 - x1) * (x3 - x2) * z) ** 0.25 * float(ellipk(z))
    return 2 * math.pi * ((x2 - x1) * (x4 - x3) * (1 - z)) ** 0.25 * float(ellipk(1 - z))


def closed_form_check(beta: lp.LinkPattern, x, tol: float = TOL_ALGEBRAIC) -> CheckReport:
    x = check_config(x)
    v = F_det(beta, x, estimate=False).value
    return CheckReport("closed-form", {"beta": str(beta), "x": list(map(float, x))},
                       v, closed_form(beta, x), tol)


def sum_rule(beta: lp.LinkPattern, x, tol: float = TOL_ALGEBRAIC) -> CheckReport:
    """|sum_alpha M_{alpha,beta} Z_alpha / F_beta - 1|."""
    x = check_config(x)
    N = beta.N
    F = F_all_batch(x[None, :], N)[:, 0].real
    Zs = np.array(lp.meander_inverse(N), dtype=float) @ F
    M = lp.meander_matrix(N)
    jb = lp.pattern_index(beta)
    s = float(M[:, jb].astype(float) @ Zs / F[jb])
    return CheckReport("sum-rule", {"beta": str(beta), "x": list(map(float, x))},
                       abs(s - 1), 0.0, tol)


def route_agreement(beta: lp.LinkPattern, x, tol: float = 1e-7) -> CheckReport:
    a = F_det(beta, x, estimate=False).value
    b = F_simplex(beta, x).value
    return CheckReport("route", {"beta": str(beta), "x": list(map(float, np.asarray(x)))},
                       abs(a - b) / abs(b), 0.0, tol)


def matrix_identity(beta: lp.LinkPattern, x, tol: float = TOL_ALGEBRAIC) -> list:
    """M P = P-loop (relative, max entry) and det M = 2^N exactly."""
    x = check_config(x)
    M = scmap.loop_matrix_M(beta)
    P = scmap.period_matrix_P(beta, x, branch="link")
    Po = scmap.loop_period_matrix(beta, x)
    d = float(np.max(np.abs(M @ P - Po)) / np.max(np.abs(Po)))
    det = np.linalg.det(M)
    inp = {"beta": str(beta), "x": list(map(float, x))}
    return [CheckReport("matrix/MP", inp, d, 0.0, tol),
            CheckReport("matrix/det", inp, abs(det), 2.0 ** beta.N, 1e-12)]


def slit_checks(beta: lp.LinkPattern, x, tol_closure: float = 1e-8,
                tol_drift: float = 1e-5) -> list:
    """Closure of the slit map, root brackets and the drift identity."""
    x = check_config(x)
    par = scmap.solve_Q(beta, x)
    inp = {"beta": str(beta), "x": list(map(float, x))}
    closure = float(np.max(np.abs(par.closure))) if np.size(par.closure) else 0.0
    brackets = True
    for (a, b), mu in zip(par.links[1:-1], par.mu):
        if not x[a - 1] < mu < x[b - 1]:
            brackets = False
    d_map = scmap.drift_from_map(beta, x)
    d_pf = dlogF(beta, x, 1)
    return [CheckReport("slit/closure", inp, closure, 0.0, tol_closure),
            _gate(CheckReport("slit/brackets", inp, float(not brackets), 0.0, 0.0), brackets),
            CheckReport("slit/drift", inp, d_map, d_pf, tol_drift)]


# -- suite -----------------------------------------------------------------------

SUITES = ("pde", "mobius", "asy", "lim", "sum", "closed", "matrix", "slit")


def random_config(rng, n2: int, min_gap: float = 0.2):
    gaps = min_gap + rng.exponential(1.0, n2 - 1)
    x = np.concatenate([[0.0], np.cumsum(gaps)])
    return x - x.mean()


def _suite_tasks(name, N, rng):
    pats = lp.enumerate_patterns(N)
    x = random_config(rng, 2 * N)
    tasks = []
    if name == "pde":
        for kind in ("F", "Z"):
            for p in pats:
                for j in range(1, 2 * N + 1):
                    tasks.append((pde_residual, (kind, p, x, j)))
    elif name == "mobius":
        _, (lo, hi) = special_conformal_range(x)
        xi = lo + (hi - lo) * rng.uniform(0.2, 0.8)
        for kind in ("F", "Z"):
            for p in pats:
                tasks.append((mobius_check, (kind, p, x, "translation", 5.0)))
                tasks.append((mobius_check, (kind, p, x, "scaling", 3.0)))
                tasks.append((mobius_check, (kind, p, x, "special", float(xi))))
    elif name == "asy":
        for kind in ("F", "Z"):
            for p in pats:
                for j in range(1, 2 * N):
                    if kind == "Z" and N == 1:
                        continue
                    tasks.append((asy_check, (kind, p, x, j)))
        for j in range(1, 2 * N) if N > 1 else ():
            for g in lp.enumerate_patterns(N - 1):
                tasks.append((asy_fibre_sum, (g, x, j)))
    elif name == "lim":
        for a in pats:
            tasks.append((_lim_row, (a,)))
    elif name == "sum":
        for p in pats:
            tasks.append((sum_rule, (p, x)))
    elif name == "closed":
        if N <= 2:
            for p in pats:
                tasks.append((closed_form_check, (p, x)))
    elif name == "matrix":
        for p in pats:
            tasks.append((matrix_identity, (p, x)))
    elif name == "slit":
        if N >= 2:
            for p in pats:
                if (1, 2 * N) not in p:
                    tasks.append((slit_checks, (p, x)))
    else:
        raise ValueError(f"unknown suite {name!r}; choose from all, {', '.join(SUITES)}")
    return tasks


def _lim_row(alpha):
    vals, r2 = lim_matrix(alpha)
    out = []
    for beta, v in vals.items():
        if beta == alpha:
            rep = CheckReport("lim/diagonal", {"alpha": str(alpha), "beta": str(beta)}, v, math.pi, TOL_LOG)
        else:
            rep = CheckReport("lim/off-diagonal", {"alpha": str(alpha), "beta": str(beta)},
                              abs(v) / math.pi, 0.0, 0.05)
        rep.extra["r2_min"] = r2
        out.append(rep)
    return out


def run_suite(suite: str = "all", N: int = 2, seed: int = 0, threads: int = 1) -> list:
    """Run one suite (or all) for size N; reports come back in a fixed order."""
    names = SUITES if suite == "all" else (suite,)
    rng = np.random.default_rng(seed)
    tasks = []
    for name in names:
        tasks += _suite_tasks(name, N, rng)

    def run(t):
        f, args = t
        r = f(*args)
        return r if isinstance(r, list) else [r]

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    return [r for rs in results for r in rs]


def reports_to_json(reports, **meta) -> str:
    payload = {"schema": 1, **meta, "passed": all(r.passed for r in reports),
               "reports": [r.to_dict() for r in reports]}
    return json.dumps(payload, indent=2, default=float)
