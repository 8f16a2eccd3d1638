"""Schwarz-Christoffel slit-rectangle map phi_beta and related period data.

For beta with {1,2N} not a link, phi_beta maps the upper half-plane onto a
rectangle of unit width with horizontal slits:

    phi(z) = int_{x_1}^z Q(u) du / prod_j (u-x_j)^{1/2}  /  norm,

norm being the same integral up to x_{2p}. The one-forms use the branch that
is positive on (x_{2N}, inf) and is continued through the upper half-plane;
for u in the upper half-plane that is the principal square root.

Formulas here use the link order with {1, 2p} first and {2q-1, 2N} last.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linkpat as lp
from .coulomb import _phases, period_from_moments
from .quad import Plan, check_config, make_plan, moments

ROOT_IMAG_TOL = 1e-8


class SlitMapError(RuntimeError):
    pass


def slit_order(beta: lp.LinkPattern):
    """(links, p, q): links reordered so a_1 = 1 and b_N = 2N."""
    n2 = 2 * beta.N
    if (1, n2) in beta:
        raise SlitMapError(f"{{1,{n2}}} is a link of {beta}; slit map undefined")
    first = (1, beta.partner(1))
    last = (beta.partner(n2), n2)
    mid = [l for l in beta.links if l not in (first, last)]
    return [first] + mid + [last], first[1] // 2, (last[0] + 1) // 2


def _interval_sum(I, a, b, N):
    """sum_{k=a}^{b-1} (-i)^{2N-k} I_k for 1-based a, b; I is (2N-1, S)."""
    ph = _phases(N)
    return (ph[a - 1:b - 1, None] * I[a - 1:b - 1]).sum(axis=0)


def period_matrix_P(beta: lp.LinkPattern, x, branch: str = "global",
                    plan: Plan | None = None) -> np.ndarray:
    """(int_{x_{a_r}}^{x_{b_r}} omega_{s-1})_{r,s}, canonical link order.

    branch="global": the half-plane branch used by F_det.
    branch="link": each row normalised to be positive on its first interval,
    the convention in which the loop-matrix identity is stated.
    """
    x = check_config(x)
    N = beta.N
    I = moments(x, N, plan)
    if branch == "global":
        return period_from_moments(beta, I)
    if branch == "link":
        return _link_rows(beta, I, 1j)
    raise ValueError(f"unknown branch {branch!r}")


def _link_rows(beta, I, unit, factor=1.0):
    rows = []
    for a, b in beta.links:
        ph = np.array([unit ** (k - a) for k in range(a, b)])
        rows.append(factor * (ph[:, None] * I[a - 1:b - 1, :beta.N]).sum(axis=0))
    return np.array(rows)


def loop_matrix_M(beta: lp.LinkPattern) -> np.ndarray:
    N = beta.N
    M = np.zeros((N, N), dtype=complex)
    for r, (ar, br) in enumerate(beta.links):
        M[r, r] = 2
        for s in range(r + 1, N):
            as_ = beta.links[s][0]
            if as_ < br:
                M[r, s] = 4 * (-1j) ** (as_ - ar)
    return M


def loop_period_matrix(beta: lp.LinkPattern, x, plan: Plan | None = None) -> np.ndarray:
    """Loop integrals expanded over the intervals, same convention as branch="link"."""
    x = check_config(x)
    I = moments(x, beta.N, plan)
    return _link_rows(beta, I, -1j, 2.0)


def matrix_R(beta: lp.LinkPattern, x, plan: Plan | None = None) -> np.ndarray:
    x = check_config(x)
    N = beta.N
    links, _, _ = slit_order(beta)
    I = moments(x, max(N - 1, 1), plan)
    rows = [_interval_sum(I, a, b, N)[:N - 2] for a, b in links[1:N - 1]]
    return np.array(rows, dtype=complex).reshape(N - 2, N - 2)


@dataclass(frozen=True)
class SlitMapParams:
    beta: lp.LinkPattern
    x: tuple
    links: tuple
    p: int
    q: int
    nu: tuple            # (nu_1, ..., nu_{N-2}); Q(w) = w^{N-2} + sum nu_{N-2-n} w^n
    mu: tuple
    coeffs: tuple        # Q coefficients, lowest degree first
    norm: complex
    closure: float       # max |phi(x_{a_r}) - phi(x_{b_r})| over middle links
    nu_imag: float

    def Q(self, w):
        return np.polynomial.polynomial.polyval(w, np.array(self.coeffs))

    def dQ(self, w):
        c = np.polynomial.polynomial.polyder(np.array(self.coeffs))
        return np.polynomial.polynomial.polyval(w, c)

    def boundary_values(self) -> np.ndarray:
        """phi(x_m) for m = 1..2N via interval sums."""
        return _boundary_values(self, None)

    @property
    def height(self) -> float:
        return float(self.boundary_values()[-1].imag)


def _Qmoments(coeffs, I):
    return I[:, :len(coeffs)] @ np.asarray(coeffs)


def _boundary_values(par, plan):
    x = np.array(par.x)
    N = len(x) // 2
    I = moments(x, len(par.coeffs), plan)
    J = _phases(N) * _Qmoments(par.coeffs, I)
    return np.concatenate([[0], np.cumsum(J)]) / par.norm


def solve_Q(beta: lp.LinkPattern, x, plan: Plan | None = None) -> SlitMapParams:
    x = check_config(x)
    N = beta.N
    if N < 2:
        raise SlitMapError("slit map needs N >= 2")
    links, p, q = slit_order(beta)
    I = moments(x, N, plan)
    if N == 2:
        nu = np.zeros(0)
        nu_im = 0.0
    else:
        R = np.array([_interval_sum(I, a, b, N)[:N - 2] for a, b in links[1:N - 1]])
        rhs = np.array([_interval_sum(I, a, b, N)[N - 2] for a, b in links[1:N - 1]])
        sol = -np.linalg.solve(R, rhs)        # (nu_{N-2}, ..., nu_1)
        nu_im = float(np.max(np.abs(sol.imag)) / max(1.0, np.max(np.abs(sol.real))))
        if nu_im > ROOT_IMAG_TOL:
            raise SlitMapError(f"nu not real (rel. imag {nu_im:.1e})")
        nu = sol.real[::-1]                    # nu_1 ... nu_{N-2}
    # Q(w) = w^{N-2} + sum_{n=0}^{N-3} nu_{N-2-n} w^n
    coeffs = np.array([nu[N - 3 - n] for n in range(N - 2)] + [1.0])
    mu = _roots(coeffs, x, links)
    J = _phases(N) * _Qmoments(coeffs, I)
    norm = complex(np.sum(J[:2 * p - 1]))
    bv = np.concatenate([[0], np.cumsum(J)]) / norm
    closure = max([abs(bv[a - 1] - bv[b - 1]) for a, b in links[1:N - 1]], default=0.0)
    return SlitMapParams(beta, tuple(x), tuple(links), p, q, tuple(nu), tuple(mu),
                         tuple(coeffs), norm, float(closure), nu_im)


def _roots(coeffs, x, links):
    deg = len(coeffs) - 1
    if deg == 0:
        return ()
    r = np.polynomial.polynomial.polyroots(coeffs)
    if np.max(np.abs(r.imag)) > ROOT_IMAG_TOL * max(1.0, np.max(np.abs(r))):
        raise SlitMapError(f"complex roots {r}")
    r = np.sort(r.real)
    dc = np.polynomial.polynomial.polyder(coeffs)
    for _ in range(3):
        r = r - np.polynomial.polynomial.polyval(r, coeffs) / np.polynomial.polynomial.polyval(r, dc)
    mid = links[1:-1]
    order = sorted(range(len(mid)), key=lambda i: x[mid[i][1] - 1] - x[mid[i][0] - 1])
    free = list(r)
    mu = [None] * len(mid)
    for i in order:
        a, b = mid[i]
        inside = [v for v in free if x[a - 1] < v < x[b - 1]]
        if not inside:
            raise SlitMapError(f"no root of Q in bracket ({x[a - 1]}, {x[b - 1]})")
        mu[i] = inside[0]
        free.remove(inside[0])
    return tuple(float(v) for v in mu)


# -- evaluation in the half-plane -------------------------------------------------

_T, _W = np.polynomial.legendre.leggauss(20)


def _integrand(par, u):
    x = np.array(par.x)
    out = par.Q(u).astype(complex)
    for xj in x:
        out = out / np.sqrt(u - xj + 0j)
    return out


def _segment(par, p0, p1, sing):
    """Composite Gauss-Legendre along [p0, p1]; panels no longer than their
    distance to the nearest marked point."""
    total = 0j
    stack = [(p0, p1)]
    while stack:
        a, b = stack.pop()
        L = abs(b - a)
        if L == 0:
            continue
        # distance from the segment to the singular points
        t = np.clip(np.real((sing - a) * np.conj(b - a)) / L ** 2, 0, 1)
        d = np.min(np.abs(sing - (a + t * (b - a))))
        if L > d:
            if L < 1e-14 * (1 + abs(a)):
                raise SlitMapError("path runs into a marked point")
            m = (a + b) / 2
            stack += [(a, m), (m, b)]
            continue
        u = a + (b - a) * (_T + 1) / 2
        total += np.sum(_W * _integrand(par, u)) * (b - a) / 2
    return total


def slit_map(par: SlitMapParams, z) -> np.ndarray:
    """phi_beta(z) for z in the closed upper half-plane (not a marked point)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    x = np.array(par.x)
    sing = x.astype(complex)
    gap = np.min(np.diff(x))
    x1 = x[0]
    t0 = 0.5 * gap
    s, ws = (_T + 1) / 2, _W / 2
    # x_1 -> x_1 + i t0 with u = x_1 + i t0 s^2
    u = x1 + 1j * t0 * s ** 2
    base = np.sum(ws * _integrand(par, u) * 2j * t0 * s)
    top = x1 + 1j * t0
    out = np.empty(z.shape, dtype=complex)
    for m, zz in enumerate(z):
        if zz.imag < 0:
            raise SlitMapError(f"{zz} is below the real axis")
        if np.min(np.abs(zz - sing)) < 1e-12 * (1 + np.max(np.abs(x))):
            raise SlitMapError(f"{zz} is a marked point")
        y = max(zz.imag, t0)
        val = base + _segment(par, top, x1 + 1j * y, sing)
        val += _segment(par, x1 + 1j * y, zz.real + 1j * y, sing)
        val += _segment(par, zz.real + 1j * y, zz, sing)
        out[m] = val
    return out / par.norm


# -- expansion at x_1 and the drift identity ------------------------------------

def expansion_HK(beta: lp.LinkPattern, x, plan: Plan | None = None):
    """Coefficients of phi = H (z-x_1)^{1/2} + K (z-x_1)^{3/2} + ...

    Both use the x_{2p} normalisation (the map's own denominator).
    """
    x = check_config(x)
    par = solve_Q(beta, x, plan)
    d = x[1:] - x[0]
    root = np.prod(np.sqrt(-d + 0j))           # prod_{j>=2} (x_1 - x_j)^{1/2}
    den = root * par.norm
    Q1, dQ1 = par.Q(x[0]), par.dQ(x[0])
    H = 2 * Q1 / den
    K = (2 / 3 * dQ1 + 1 / 3 * Q1 * np.sum(1 / d)) / den
    return complex(H), complex(K)


def drift_from_map(beta: lp.LinkPattern, x, eta: float = 1e-4) -> float:
    """(3K - 2 d_1 H) / (2H); d_1 H by Richardson central differences."""
    x = check_config(x)
    h = eta * (x[1] - x[0])
    plan = make_plan(x)
    H, K = expansion_HK(beta, x, plan)

    def Hat(d):
        y = x.copy()
        y[0] += d
        return expansion_HK(beta, y, plan)[0]

    D1 = (Hat(h) - Hat(-h)) / (2 * h)
    D2 = (Hat(h / 2) - Hat(-h / 2)) / h
    dH = (4 * D2 - D1) / 3
    val = (3 * K - 2 * dH) / (2 * H)
    if abs(val.imag) > 1e-6 * max(1.0, abs(val.real)):
        raise SlitMapError(f"drift ratio not real: {val}")
    return float(val.real)


def map_grid(par: SlitMapParams, re, im) -> np.ndarray:
    """phi over the grid re x im; shape (len(im), len(re))."""
    Zg = np.asarray(re)[None, :] + 1j * np.asarray(im)[:, None]
    return slit_map(par, Zg.ravel()).reshape(Zg.shape)
