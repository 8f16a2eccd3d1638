"""Euler-Maruyama simulation of the Loewner driving process for kappa = 8.

The driving point W starts at x_i and the other marked points V^j follow the
Loewner flow dV = 2 dt / (V - W). W gets the noise sqrt(8) dB plus the drift
8 d_i log G, where G is F_beta or Z_alpha evaluated at the current points.
Paths are simulated as a batch so every drift evaluation is one vectorised
call. The step shrinks as dt * min(1, (gap/gap0)^2) near swallowing and a
path stops once gap < eps_stop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linkpat as lp
from .coulomb import F_det_batch, Z_batch, crossing_prob_batch, dlog_batch
from .quad import check_config

KAPPA = 8.0
EPS_STOP = 1e-3


class OrderingError(RuntimeError):
    def __init__(self, msg, state):
        super().__init__(msg)
        self.state = state


@dataclass(frozen=True)
class DriftSource:
    """Which partition function supplies the drift: kind "F" or "Z"."""

    kind: str
    pattern: lp.LinkPattern

    def __post_init__(self):
        if self.kind not in ("F", "Z"):
            raise ValueError(f"drift kind must be F or Z, got {self.kind!r}")

    def __call__(self, X, plan):
        if self.kind == "F":
            return F_det_batch(self.pattern, X, plan)
        return Z_batch(self.pattern, X, plan)

    def dlog(self, X, i0):
        return dlog_batch(self, X, i0)


@dataclass(frozen=True)
class ChainState:
    t: float
    W: float
    V: tuple
    swallowed: tuple


@dataclass(frozen=True)
class DrivingPath:
    dt: float
    i: int
    t: np.ndarray
    X: np.ndarray          # (steps+1, 2N); column i-1 holds W
    seed: int
    stop: str              # "horizon" or "near-swallow"

    @property
    def W(self):
        return self.X[:, self.i - 1]

    @property
    def V(self):
        return np.delete(self.X, self.i - 1, axis=1)

    def states(self):
        for t, row in zip(self.t, self.X):
            yield ChainState(float(t), float(row[self.i - 1]),
                             tuple(np.delete(row, self.i - 1)), (False,) * (len(row) - 1))


@dataclass
class BatchResult:
    X0: np.ndarray
    X: np.ndarray          # final states (B, 2N)
    t: np.ndarray          # final times
    stop: np.ndarray       # True where stopped near swallowing
    steps: int


def _gap(X, i0):
    g = np.full(X.shape[0], np.inf)
    if i0 > 0:
        g = np.minimum(g, X[:, i0] - X[:, i0 - 1])
    if i0 < X.shape[1] - 1:
        g = np.minimum(g, X[:, i0 + 1] - X[:, i0])
    return g


def simulate_batch(x, i: int, source: DriftSource | None, dt: float, horizon: float,
                   n_paths: int, seed: int, noise: bool = True, eps_stop: float = EPS_STOP,
                   record: bool = False, on_step=None) -> BatchResult:
    """Run n_paths independent chains from x with W = x_i (i 1-based).

    source=None drops the drift; noise=False drops the Brownian part.
    on_step(X, active) is called after each step if given.
    """
    x = check_config(x)
    if dt <= 0 or horizon <= 0:
        raise ValueError("dt and horizon must be positive")
    i0 = i - 1
    rng = np.random.default_rng(seed)
    X = np.repeat(x[None, :], n_paths, axis=0)
    t = np.zeros(n_paths)
    g0 = _gap(X, i0)
    stop = np.zeros(n_paths, dtype=bool)
    active = np.ones(n_paths, dtype=bool)
    hist = [X.copy()] if record else None
    times = [t.copy()] if record else None
    steps = 0
    while np.any(active):
        xi = rng.standard_normal(n_paths)
        a = np.nonzero(active)[0]
        Xa = X[a]
        g = _gap(Xa, i0)
        h = dt * np.minimum(1.0, (g / g0[a]) ** 2)
        h = np.minimum(h, horizon - t[a])
        W = Xa[:, i0].copy()
        drift = KAPPA * source.dlog(Xa, i0) if source is not None else 0.0
        others = np.arange(X.shape[1]) != i0
        Xa[:, others] += 2 * h[:, None] / (Xa[:, others] - W[:, None])
        Xa[:, i0] = W + drift * h + (np.sqrt(KAPPA * h) * xi[a] if noise else 0.0)
        bad = np.any(np.diff(Xa, axis=1) <= 0, axis=1)
        if np.any(bad):
            k = a[np.argmax(bad)]
            raise OrderingError(f"path {k} left the ordered configurations", Xa[np.argmax(bad)])
        X[a] = Xa
        t[a] += h
        steps += 1
        near = _gap(Xa, i0) < eps_stop * g0[a]
        stop[a[near]] = True
        done = near | (t[a] >= horizon * (1 - 1e-12))
        active[a[done]] = False
        if record:
            hist.append(X.copy())
            times.append(t.copy())
        if on_step is not None:
            on_step(X, active)
    res = BatchResult(x[None, :].repeat(n_paths, 0), X, t, stop, steps)
    if record:
        res.hist = np.array(hist)
        res.times = np.array(times)
    return res


def simulate(x, i: int, source: DriftSource | None, dt: float, horizon: float, seed: int,
             noise: bool = True, eps_stop: float = EPS_STOP) -> DrivingPath:
    r = simulate_batch(x, i, source, dt, horizon, 1, seed, noise, eps_stop, record=True)
    X = r.hist[:, 0, :]
    t = r.times[:, 0]
    # drop the repeated rows after the path stopped
    last = int(np.argmax(t >= t[-1])) + 1
    return DrivingPath(dt, i, t[:last], X[:last], seed, "near-swallow" if r.stop[0] else "horizon")


def drift(source: DriftSource, x, i: int) -> float:
    """8 d_i log G at a single configuration."""
    x = check_config(x)
    return float(KAPPA * source.dlog(x[None, :], i - 1)[0])


@dataclass(frozen=True)
class MartingaleStat:
    mean: float
    sem: float
    n_paths: int
    m0: float
    m_min: float
    m_max: float
    near_swallow: int

    @property
    def z(self) -> float:
        return self.mean / self.sem if self.sem > 0 else 0.0

    @property
    def consistent(self) -> bool:
        return abs(self.mean) <= 3 * self.sem or (self.sem == 0 and abs(self.mean) < 1e-12)


def martingale_check(x, i: int, beta: lp.LinkPattern, alpha: lp.LinkPattern, n_paths: int,
                     dt: float, horizon: float, seed: int, track: bool = False) -> MartingaleStat:
    """Mean increment of M_t = p^alpha_beta(W_t, V_t) under the F_beta drift.

    track=True also records the range of M over all steps (slower).
    """
    if lp.meander_loops(alpha, beta) != 1:
        raise ValueError(f"{alpha} is not compatible with {beta}")
    x = check_config(x)
    m0 = float(crossing_prob_batch(alpha, beta, x[None, :])[0])
    lo, hi = [m0], [m0]

    def watch(X, active):
        m = crossing_prob_batch(alpha, beta, X)
        lo.append(float(m.min()))
        hi.append(float(m.max()))

    r = simulate_batch(x, i, DriftSource("F", beta), dt, horizon, n_paths, seed,
                       on_step=watch if track else None)
    inc = crossing_prob_batch(alpha, beta, r.X) - m0
    sem = float(np.std(inc, ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else 0.0
    return MartingaleStat(float(np.mean(inc)), sem, n_paths, m0, min(lo), max(hi), int(r.stop.sum()))
