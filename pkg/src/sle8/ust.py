"""Uniform spanning trees on rectangular lattice polygons with wired arcs.

Lattice model
-------------
Primal vertices are (i, j), 0 <= i <= W, 0 <= j <= H. The boundary cycle B
runs counterclockwise from (0, 0) and boundary edge b_m joins B[m] to
B[m+1]. Mark x_k sits at boundary vertex B[s_k]; arc k is the run of
boundary edges from x_k to x_{k+1}. Odd arcs are wired (their edges are
always in the tree), even arcs are free and carry a wired dual arc just
outside them. The wired arcs are further glued by the non-crossing
partition of the boundary condition beta, which makes the contracted
multigraph on which Wilson's algorithm runs.

Peano curves live on the corner lattice: the points v + (sx/4, sy/4) with
sx, sy = +-1, stored at fine index (2i + [sx > 0], 2j + [sy > 0]). A curve
turns clockwise around primal vertices, so the primal tree is on its right.
At each corner exactly one of two moves is open: around the vertex across a
non-tree edge, or alongside a tree edge to its other end. The included
corners are those inside the rectangle plus the outer corners along free
arcs; the curves from the odd marks end at even marks and together they
visit every included corner once.

Sidedness with respect to the exploration path is a parity: crossing the
dual of a tree edge passes the two strands running alongside it.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numba as nb
import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve
from scipy.special import ellipj, ellipk
from scipy.stats import binomtest

from . import linkpat as lp
from .coulomb import crossing_probs

THREADS_ENV = "SLE8_THREADS"


class LatticeError(ValueError):
    pass


class WalkError(RuntimeError):
    pass


def default_threads() -> int:
    return max(1, int(os.environ.get(THREADS_ENV, os.cpu_count() or 1)))


# -- lattice geometry --------------------------------------------------------------

def _boundary_cycle(W, H):
    B = [(i, 0) for i in range(W)] + [(W, j) for j in range(H)]
    B += [(W - i, H) for i in range(W)] + [(0, H - j) for j in range(H)]
    return np.array(B, dtype=np.int64)


@nb.njit(cache=True)
def _edge(i, j, dx, dy, W, H):
    """Edge id of (i, j) -> (i+dx, j+dy), or -1 if it leaves the rectangle."""
    if dy == 0:
        ii = i if dx > 0 else i - 1
        if ii < 0 or ii >= W or j < 0 or j > H:
            return -1
        return ii * (H + 1) + j
    jj = j if dy > 0 else j - 1
    if jj < 0 or jj >= H or i < 0 or i > W:
        return -1
    return W * (H + 1) + i * H + jj


def _edge_py(i, j, dx, dy, W, H):
    return _edge.py_func(i, j, dx, dy, W, H)


@dataclass(frozen=True, eq=False)
class LatticePolygon:
    """Rectangle of W x H lattice cells with 2N marks on its boundary."""

    W: int
    H: int
    delta: float
    marks: tuple          # s_k: index into the boundary cycle, k = 1..2N

    def __post_init__(self):
        L = 2 * (self.W + self.H)
        s = list(self.marks)
        if len(s) < 2 or len(s) % 2:
            raise LatticeError("need an even number >= 2 of marks")
        gaps = [(s[(k + 1) % len(s)] - s[k]) % L for k in range(len(s))]
        if sum(gaps) != L or min(gaps) < 2:
            raise LatticeError(f"marks must be counterclockwise with arcs of >= 2 edges, gaps {gaps}")

    @property
    def N(self) -> int:
        return len(self.marks) // 2

    @property
    def n_vertices(self) -> int:
        return (self.W + 1) * (self.H + 1)

    @property
    def n_edges(self) -> int:
        return self.W * (self.H + 1) + (self.W + 1) * self.H

    @cached_property
    def boundary(self) -> np.ndarray:
        return _boundary_cycle(self.W, self.H)

    @cached_property
    def edge_arc(self) -> np.ndarray:
        """Arc index 1..2N of each boundary edge, 0 for interior edges."""
        B = self.boundary
        L = len(B)
        out = np.zeros(self.n_edges, dtype=np.int64)
        for k, s in enumerate(self.marks):
            e = self.marks[(k + 1) % len(self.marks)]
            m = s
            while m != e:
                (i, j), (i2, j2) = B[m], B[(m + 1) % L]
                out[_edge_py(i, j, i2 - i, j2 - j, self.W, self.H)] = k + 1
                m = (m + 1) % L
        return out

    @cached_property
    def wired(self) -> np.ndarray:
        a = self.edge_arc
        return (a > 0) & (a % 2 == 1)

    def arc_vertices(self, k: int) -> np.ndarray:
        """Boundary vertices of arc k, both end marks included."""
        B = self.boundary
        L = len(B)
        s, e = self.marks[k - 1], self.marks[k % len(self.marks)]
        n = (e - s) % L
        return B[[(s + t) % L for t in range(n + 1)]]

    def mark_vertex(self, k: int) -> np.ndarray:
        return self.boundary[self.marks[k - 1]]

    def _boundary_edges_at(self, v):
        i, j = v
        out = []
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            e = _edge_py(i, j, dx, dy, self.W, self.H)
            if e >= 0 and self.edge_arc[e] > 0:
                out.append(((dx, dy), e))
        return out

    @cached_property
    def included(self) -> np.ndarray:
        """Corner points that belong to the medial polygon."""
        W, H = self.W, self.H
        inc = np.ones((2 * W + 2, 2 * H + 2), dtype=bool)
        inc[0, :] = inc[-1, :] = inc[:, 0] = inc[:, -1] = False
        for v in self.boundary:
            bd = self._boundary_edges_at(v)
            free_all = all(self.edge_arc[e] % 2 == 0 for _, e in bd)
            for sx in (-1, 1):
                for sy in (-1, 1):
                    a, b = 2 * v[0] + (sx > 0), 2 * v[1] + (sy > 0)
                    if inc[a, b]:
                        continue
                    adj = [e for (dx, dy), e in bd if (dx == sx and dy == 0) or (dy == sy and dx == 0)]
                    if adj:
                        inc[a, b] = all(self.edge_arc[e] % 2 == 0 for e in adj)
                    else:
                        inc[a, b] = free_all
        return inc

    @cached_property
    def mark_corners(self) -> np.ndarray:
        """(2N, 2) fine indices: where the curve at each mark starts or ends.

        It is the outer corner on the free side of the mark.
        """
        out = np.empty((2 * self.N, 2), dtype=np.int64)
        for k in range(1, 2 * self.N + 1):
            v = self.mark_vertex(k)
            free = [(d, e) for d, e in self._boundary_edges_at(v) if self.edge_arc[e] % 2 == 0]
            (dx, dy), _ = free[0]
            # outward normal of the free edge: boundary runs ccw, so it is the
            # direction turned clockwise from the ccw tangent
            i, j = v
            if dy == 0:
                nx, ny = 0, (-1 if j == 0 else 1)
            else:
                nx, ny = (1 if i == self.W else -1), 0
            sx = dx if dx else nx
            sy = dy if dy else ny
            out[k - 1] = (2 * i + (sx > 0), 2 * j + (sy > 0))
        return out

    @cached_property
    def mark_at(self) -> np.ndarray:
        m = np.full(self.included.shape, -1, dtype=np.int64)
        for k, (a, b) in enumerate(self.mark_corners):
            m[a, b] = k + 1
        return m

    def corner_xy(self, a, b) -> np.ndarray:
        """Continuum coordinates of fine corner indices."""
        a, b = np.asarray(a), np.asarray(b)
        x = a // 2 + np.where(a % 2 == 1, 0.25, -0.25)
        y = b // 2 + np.where(b % 2 == 1, 0.25, -0.25)
        return np.stack([x, y], axis=-1) * self.delta

    @property
    def mark_xy(self) -> np.ndarray:
        return self.boundary[list(self.marks)] * self.delta

    def face_xy(self) -> np.ndarray:
        """Centres of the W*H faces, face id i*H + j."""
        i, j = np.meshgrid(np.arange(self.W), np.arange(self.H), indexing="ij")
        return (np.stack([i.ravel(), j.ravel()], axis=1) + 0.5) * self.delta


def build_polygon(width: float, height: float, positions, delta: float) -> LatticePolygon:
    """Rectangle [0,width] x [0,height] with marks at the given boundary
    arclength positions, measured counterclockwise from the corner (0, 0)."""
    W, H = int(round(width / delta)), int(round(height / delta))
    if W < 2 or H < 2:
        raise LatticeError("rectangle must span at least 2 cells each way")
    L = 2 * (W + H)
    s = [int(round(p / delta)) % L for p in positions]
    return LatticePolygon(W, H, float(delta), tuple(s))


def square_polygon(n: int, fractions) -> LatticePolygon:
    """Unit square at mesh 1/n; marks at fractions of the perimeter."""
    return build_polygon(1.0, 1.0, [4.0 * f for f in fractions], 1.0 / n)


def symmetric_hexagon(n: int) -> LatticePolygon:
    """Six marks on the unit square, mirror symmetric about x = 1/2 with
    x_k <-> x_{7-k}."""
    f = np.array([1 / 2 + 1 / 3, 3 / 2, 13 / 6, 17 / 6, 7 / 2, 1 / 2 - 1 / 3 + 4]) / 4
    s = [int(round(v * 4 * n)) % (4 * n) for v in f]
    return LatticePolygon(n, n, 1.0 / n, tuple(s))


# -- contracted graph and Wilson's algorithm -----------------------------------------

@dataclass(frozen=True, eq=False)
class WiredGraph:
    poly: LatticePolygon
    beta: lp.LinkPattern
    node: np.ndarray        # vertex id -> node id
    n_nodes: int
    root: int
    indptr: np.ndarray
    nbr: np.ndarray
    eid: np.ndarray


def wired_graph(poly: LatticePolygon, beta: lp.LinkPattern) -> WiredGraph:
    if beta.N != poly.N:
        raise LatticeError(f"{beta} has {beta.N} links, polygon has {poly.N} arc pairs")
    W, H = poly.W, poly.H
    nv = poly.n_vertices
    node = np.full(nv, -1, dtype=np.int64)
    blocks = lp.pattern_to_partition(beta).blocks
    for b, block in enumerate(blocks):
        for i in block:
            for x, y in poly.arc_vertices(2 * i - 1):
                node[x * (H + 1) + y] = b
    nxt = len(blocks)
    for v in range(nv):
        if node[v] < 0:
            node[v] = nxt
            nxt += 1
    root = int(node[poly.mark_vertex(1)[0] * (H + 1) + poly.mark_vertex(1)[1]])
    eu, ev = _edge_ends(W, H)
    keep = ~poly.wired & (node[eu] != node[ev])
    e = np.nonzero(keep)[0]
    a, b = node[eu[e]], node[ev[e]]
    src = np.concatenate([a, b])
    dst = np.concatenate([b, a])
    ids = np.concatenate([e, e])
    order = np.argsort(src, kind="stable")
    indptr = np.zeros(nxt + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)
    return WiredGraph(poly, beta, node, nxt, root, indptr, dst[order].astype(np.int64),
                      ids[order].astype(np.int64))


def _edge_ends(W, H):
    eu, ev = [], []
    for i in range(W):
        for j in range(H + 1):
            eu.append(i * (H + 1) + j)
            ev.append((i + 1) * (H + 1) + j)
    for i in range(W + 1):
        for j in range(H):
            eu.append(i * (H + 1) + j)
            ev.append(i * (H + 1) + j + 1)
    return np.array(eu, dtype=np.int64), np.array(ev, dtype=np.int64)


_GOLD = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@nb.njit(cache=True)
def _next(state):
    """splitmix64; state is a length-1 uint64 array."""
    state[0] += _GOLD
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def _randint(state, n):
    return int((_next(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0) * n)


@nb.njit(cache=True)
def _wilson(indptr, nbr, eid, n_nodes, root, state, chosen, max_steps):
    """Mark chosen[e] for the edges of a uniform spanning tree.

    Returns the number of walk steps, or -1 if max_steps was exceeded.
    """
    in_tree = np.zeros(n_nodes, dtype=np.bool_)
    nxt_node = np.empty(n_nodes, dtype=np.int64)
    nxt_edge = np.empty(n_nodes, dtype=np.int64)
    in_tree[root] = True
    steps = 0
    for i in range(n_nodes):
        u = i
        while not in_tree[u]:
            d = indptr[u + 1] - indptr[u]
            k = indptr[u] + _randint(state, d)
            nxt_node[u] = nbr[k]
            nxt_edge[u] = eid[k]
            u = nbr[k]
            steps += 1
            if steps > max_steps:
                return -1
        u = i
        while not in_tree[u]:
            in_tree[u] = True
            chosen[nxt_edge[u]] = True
            u = nxt_node[u]
    return steps


def _step_cap(n):
    return 1000 * n * n + 10 ** 6


def wilson_tree(n_nodes: int, edges, root: int = 0, seed: int = 0) -> np.ndarray:
    """Uniform spanning tree of a small multigraph; returns chosen edge indices."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    ids = np.concatenate([np.arange(len(edges))] * 2)
    order = np.argsort(src, kind="stable")
    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)
    chosen = np.zeros(len(edges), dtype=np.bool_)
    state = np.array([seed], dtype=np.uint64)
    if _wilson(indptr, dst[order], ids[order], n_nodes, root, state, chosen, _step_cap(n_nodes)) < 0:
        raise WalkError("Wilson step cap exceeded (graph disconnected?)")
    return np.nonzero(chosen)[0]


@dataclass(frozen=True, eq=False)
class TreeSample:
    graph: WiredGraph
    in_tree: np.ndarray     # per primal edge, wired edges included
    seed: int


def sample_tree(g: WiredGraph, seed: int) -> TreeSample:
    state = np.array([seed], dtype=np.uint64)
    chosen = g.poly.wired.copy()
    if _wilson(g.indptr, g.nbr, g.eid, g.n_nodes, g.root, state, chosen, _step_cap(g.n_nodes)) < 0:
        raise WalkError("Wilson step cap exceeded")
    return TreeSample(g, chosen, seed)


# -- Peano curves ------------------------------------------------------------------

@nb.njit(cache=True)
def _rstep(a, b, in_tree, W, H):
    """One clockwise Peano step from fine corner (a, b)."""
    i, j = a // 2, b // 2
    sx = 1 if a & 1 else -1
    sy = 1 if b & 1 else -1
    if sx * sy == 1:
        e = _edge(i, j, sx, 0, W, H)
        if e < 0 or not in_tree[e]:
            sy = -sy
        else:
            i += sx
            sx = -sx
    else:
        e = _edge(i, j, 0, sy, W, H)
        if e < 0 or not in_tree[e]:
            sx = -sx
        else:
            j += sy
            sy = -sy
    return 2 * i + (1 if sx > 0 else 0), 2 * j + (1 if sy > 0 else 0)


@nb.njit(cache=True)
def _trace(in_tree, W, H, incl, mark_corners, mark_at, label, partner):
    """Run the curves from the odd marks. label[a, b] receives the curve
    number (0-based) when label is not empty; partner[k-1] gets the far end.

    Returns the number of corners visited, or -(k) if the curve from mark k
    failed to end at an even mark.
    """
    N = mark_corners.shape[0] // 2
    cap = incl.shape[0] * incl.shape[1]
    total = 0
    write = label.shape[0] > 0
    for m in range(N):
        k = 2 * m + 1
        a, b = mark_corners[k - 1, 0], mark_corners[k - 1, 1]
        steps = 0
        while True:
            if write:
                label[a, b] = m
            total += 1
            a2, b2 = _rstep(a, b, in_tree, W, H)
            if not incl[a2, b2]:
                break
            a, b = a2, b2
            steps += 1
            if steps > cap:
                return -k
        e = mark_at[a, b]
        if e < 0 or e % 2 == 1:
            return -k
        partner[k - 1] = e
        partner[e - 1] = k
    return total


def _pattern_from_partner(partner) -> lp.LinkPattern:
    return lp.LinkPattern(tuple((k + 1, int(partner[k])) for k in range(len(partner)) if k + 1 < partner[k]))


def peano_curves(t: TreeSample):
    """(curves, A): each curve an array of continuum points from an odd mark
    to its partner, and the link pattern A of their endpoints."""
    poly = t.graph.poly
    label = np.full(poly.included.shape, -1, dtype=np.int64)
    partner = np.zeros(2 * poly.N, dtype=np.int64)
    res = _trace(t.in_tree, poly.W, poly.H, poly.included, poly.mark_corners, poly.mark_at, label, partner)
    if res < 0:
        raise WalkError(f"curve from mark {-res} did not end at an even mark")
    A = _pattern_from_partner(partner)
    if lp.meander_loops(A, t.graph.beta) != 1:
        raise WalkError(f"pattern {A} incompatible with {t.graph.beta}")
    curves = []
    for m in range(poly.N):
        a, b = poly.mark_corners[2 * m]
        pts = [(a, b)]
        while True:
            a2, b2 = _rstep(a, b, t.in_tree, poly.W, poly.H)
            if not poly.included[a2, b2]:
                break
            a, b = a2, b2
            pts.append((a, b))
        pts = np.array(pts)
        curves.append(poly.corner_xy(pts[:, 0], pts[:, 1]))
    return curves, A


def exploration_chain(A: lp.LinkPattern, beta: lp.LinkPattern) -> list[int]:
    """Odd marks whose curves make up the exploration path, in order."""
    n2 = 2 * beta.N
    out, k = [], 1
    while True:
        out.append(k)
        e = A.partner(k)
        if e == n2:
            return out
        k = beta.partner(e)
        if k in out:
            raise WalkError("exploration path does not reach the last mark")


def exploration_path(t: TreeSample, beta: lp.LinkPattern | None = None):
    """(path, chain): concatenated Peano segments from x_1 to x_{2N} and the
    odd marks whose curves were used. The jumps between segments are the
    exterior contours of beta."""
    beta = t.graph.beta if beta is None else beta
    curves, A = peano_curves(t)
    chain = exploration_chain(A, beta)
    return np.concatenate([curves[(k - 1) // 2] for k in chain]), chain


# -- batched sampling --------------------------------------------------------------

@nb.njit(nogil=True, cache=True)
def _sample_keys(n, seed, indptr, nbr, eid, n_nodes, root, wired, W, H, incl,
                 mark_corners, mark_at, max_steps):
    state = np.array([seed], dtype=np.uint64)
    N2 = mark_corners.shape[0]
    keys = np.empty(n, dtype=np.int64)
    partner = np.zeros(N2, dtype=np.int64)
    label = np.empty((0, 0), dtype=np.int64)
    for s in range(n):
        chosen = wired.copy()
        if _wilson(indptr, nbr, eid, n_nodes, root, state, chosen, max_steps) < 0:
            keys[s] = -1
            continue
        r = _trace(chosen, W, H, incl, mark_corners, mark_at, label, partner)
        if r < 0:
            keys[s] = -2
            continue
        key = 0
        for k in range(N2 - 1, -1, -1):
            key = key * (N2 + 1) + partner[k]
        keys[s] = key
    return keys


def _decode(key, N2):
    partner = []
    for _ in range(N2):
        partner.append(key % (N2 + 1))
        key //= N2 + 1
    return _pattern_from_partner(partner)


def worker_sizes(n: int, threads: int) -> list[int]:
    return [n // threads + (w < n % threads) for w in range(threads)]


def sample_patterns(g: WiredGraph, n: int, seed: int, threads: int | None = None) -> list[lp.LinkPattern]:
    """Connectivity patterns of n independent trees. Worker w uses the
    stream seeded with seed ^ w; results are reproducible for fixed
    (seed, threads)."""
    threads = threads or default_threads()
    p = g.poly
    args = (g.indptr, g.nbr, g.eid, g.n_nodes, g.root, p.wired, p.W, p.H,
            p.included, p.mark_corners, p.mark_at, _step_cap(g.n_nodes))
    sizes = worker_sizes(n, threads)
    if threads == 1:
        parts = [_sample_keys(sizes[0], seed, *args)]
    else:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda w: _sample_keys(sizes[w], seed ^ w, *args), range(threads)))
    keys = np.concatenate(parts)
    if np.any(keys < 0):
        raise WalkError(f"{np.sum(keys < 0)} samples failed")
    uniq, inv = np.unique(keys, return_inverse=True)
    pats = [_decode(int(k), 2 * p.N) for k in uniq]
    for A in pats:
        if lp.meander_loops(A, g.beta) != 1:
            raise WalkError(f"sampled pattern {A} is incompatible with {g.beta}")
    return [pats[i] for i in inv]


@dataclass(frozen=True)
class CrossingEstimate:
    alpha: lp.LinkPattern
    count: int
    freq: float
    ci_lo: float
    ci_hi: float
    exact: float | None

    @property
    def sigma(self) -> float:
        p = self.exact if self.exact is not None else self.freq
        return float(np.sqrt(max(p * (1 - p), 1e-300) / max(self.n, 1)))

    n: int = 0


@dataclass(frozen=True)
class MCResult:
    beta: lp.LinkPattern
    n: int
    seed: int
    threads: int
    rows: tuple
    x_continuum: tuple

    def row(self, alpha) -> CrossingEstimate:
        for r in self.rows:
            if r.alpha == alpha:
                return r
        raise KeyError(alpha)


def mc_crossing(poly: LatticePolygon, beta: lp.LinkPattern, n_samples: int, seed: int,
                threads: int | None = None, exact: bool = True) -> MCResult:
    """Empirical law of the connectivity pattern with 95% Clopper-Pearson
    intervals. Every compatible alpha gets a row."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    threads = threads or default_threads()
    g = wired_graph(poly, beta)
    pats = sample_patterns(g, n_samples, seed, threads)
    counts = {}
    for A in pats:
        counts[A] = counts.get(A, 0) + 1
    xc = continuum_marks(poly) if exact else None
    probs = crossing_probs(beta, xc) if exact else {}
    rows = []
    for alpha in lp.compatible(beta):
        c = counts.get(alpha, 0)
        ci = binomtest(c, n_samples).proportion_ci(0.95)
        rows.append(CrossingEstimate(alpha, c, c / n_samples, float(ci.low), float(ci.high),
                                     probs.get(alpha) if exact else None, n_samples))
    return MCResult(beta, n_samples, seed, threads, tuple(rows),
                    tuple(xc) if exact else ())


# -- conformal map of the rectangle --------------------------------------------------

def _sn_complex(u, m):
    """Jacobi sn(u | m) for complex u (addition formula, real ellipj calls)."""
    u = np.asarray(u, dtype=complex)
    s, c, d, _ = ellipj(u.real, m)
    s1, c1, d1, _ = ellipj(u.imag, 1 - m)
    den = c1 ** 2 + m * s ** 2 * s1 ** 2
    return (s * d1 + 1j * c * d * s1 * c1) / den


@dataclass(frozen=True)
class RectangleMap:
    """Conformal map of [0,W] x [0,H] (lattice units) onto the upper half-plane,
    followed by a real Mobius map sending the point at perimeter
    position s_inf to infinity."""

    W: float
    H: float
    m: float
    K: float
    zeta_inf: complex

    def sn(self, z):
        z = np.asarray(z, dtype=complex)
        u = (z - self.W / 2) * (2 * self.K / self.W)
        return _sn_complex(u, self.m)

    def __call__(self, z):
        return -1.0 / (self.sn(z) - self.zeta_inf)


def _perimeter_point(W, H, s):
    s = s % (2 * (W + H))
    if s <= W:
        return complex(s, 0)
    if s <= W + H:
        return complex(W, s - W)
    if s <= 2 * W + H:
        return complex(2 * W + H - s, H)
    return complex(0, 2 * (W + H) - s)


def rectangle_map(W: float, H: float, s_inf: float) -> RectangleMap:
    ratio = 2 * H / W

    def f(m):
        return ellipk(1 - m) / ellipk(m) - ratio

    m = brentq(f, 1e-15, 1 - 1e-15, xtol=1e-16, rtol=1e-15)
    K = float(ellipk(m))
    tmp = RectangleMap(W, H, m, K, 0j)
    zi = complex(tmp.sn(_perimeter_point(W, H, s_inf)))
    return RectangleMap(W, H, m, K, complex(zi.real, 0))


def _infinity_position(poly: LatticePolygon) -> float:
    """Midpoint of the last arc, nudged off lattice-symmetric points."""
    L = 2 * (poly.W + poly.H)
    s, e = poly.marks[-1], poly.marks[0]
    return (s + ((e - s) % L) / 2 + 0.1237) % L


def polygon_map(poly: LatticePolygon) -> RectangleMap:
    return rectangle_map(poly.W, poly.H, _infinity_position(poly))


def continuum_marks(poly: LatticePolygon) -> np.ndarray:
    """Images of the marks on the real line, increasing."""
    f = polygon_map(poly)
    B = poly.boundary
    z = np.array([complex(*B[s]) for s in poly.marks])
    x = f(z).real
    if np.any(np.diff(x) <= 0):
        raise LatticeError(f"mapped marks not increasing: {x}")
    return x


# -- discrete observable -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DualGraph:
    """Faces (id i*H + j) plus one node per free arc (id W*H + k/2 - 1)."""

    n_nodes: int
    u: np.ndarray           # endpoints of dual edges
    v: np.ndarray
    primal: np.ndarray      # primal edge crossed
    side_a: np.ndarray      # fine corners on either side of the primal edge
    side_b: np.ndarray


def dual_graph(poly: LatticePolygon) -> DualGraph:
    W, H = poly.W, poly.H
    F = W * H
    us, vs, pe, sa, sb = [], [], [], [], []
    arc = poly.edge_arc

    def arc_node(e):
        return F + arc[e] // 2 - 1

    for i in range(W):
        for j in range(H + 1):
            e = i * (H + 1) + j
            if poly.wired[e]:
                continue
            below = i * H + j - 1 if j > 0 else arc_node(e)
            above = i * H + j if j < H else arc_node(e)
            us.append(below)
            vs.append(above)
            pe.append(e)
            sa.append((2 * i + 1, 2 * j))
            sb.append((2 * i + 1, 2 * j + 1))
    for i in range(W + 1):
        for j in range(H):
            e = W * (H + 1) + i * H + j
            if poly.wired[e]:
                continue
            left = (i - 1) * H + j if i > 0 else arc_node(e)
            right = i * H + j if i < W else arc_node(e)
            us.append(left)
            vs.append(right)
            pe.append(e)
            sa.append((2 * i, 2 * j + 1))
            sb.append((2 * i + 1, 2 * j + 1))
    return DualGraph(F + poly.N, np.array(us), np.array(vs), np.array(pe),
                     np.array(sa, dtype=np.int64), np.array(sb, dtype=np.int64))


@nb.njit(cache=True)
def _parity(n_nodes, start, indptr, nbr, de, primal, side_a, side_b, in_tree, label, in_xi):
    par = np.full(n_nodes, -1, dtype=np.int64)
    par[start] = 0
    queue = np.empty(n_nodes, dtype=np.int64)
    queue[0] = start
    head, tail = 0, 1
    while head < tail:
        x = queue[head]
        head += 1
        for k in range(indptr[x], indptr[x + 1]):
            y = nbr[k]
            d = de[k]
            t = 0
            if in_tree[primal[d]]:
                t = in_xi[label[side_a[d, 0], side_a[d, 1]]] ^ in_xi[label[side_b[d, 0], side_b[d, 1]]]
            p = par[x] ^ t
            if par[y] < 0:
                par[y] = p
                queue[tail] = y
                tail += 1
            elif par[y] != p:
                return par, -1
    return par, 0


def _dual_csr(dg: DualGraph):
    src = np.concatenate([dg.u, dg.v])
    dst = np.concatenate([dg.v, dg.u])
    ids = np.concatenate([np.arange(len(dg.u))] * 2)
    order = np.argsort(src, kind="stable")
    indptr = np.zeros(dg.n_nodes + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    return np.cumsum(indptr), dst[order].astype(np.int64), ids[order].astype(np.int64)


def right_of_path(t: TreeSample, dg: DualGraph | None = None) -> np.ndarray:
    """1 for dual nodes to the right of the exploration path, else 0."""
    poly = t.graph.poly
    dg = dual_graph(poly) if dg is None else dg
    label = np.full(poly.included.shape, -1, dtype=np.int64)
    partner = np.zeros(2 * poly.N, dtype=np.int64)
    if _trace(t.in_tree, poly.W, poly.H, poly.included, poly.mark_corners, poly.mark_at, label, partner) < 0:
        raise WalkError("Peano walk failed")
    A = _pattern_from_partner(partner)
    in_xi = np.zeros(poly.N, dtype=np.int64)
    for k in exploration_chain(A, t.graph.beta):
        in_xi[(k - 1) // 2] = 1
    indptr, nbr, de = _dual_csr(dg)
    start = poly.W * poly.H + poly.N - 1
    par, flag = _parity(dg.n_nodes, start, indptr, nbr, de, dg.primal, dg.side_a, dg.side_b,
                        t.in_tree, label, in_xi)
    if flag < 0 or np.any(par < 0):
        raise WalkError("inconsistent sidedness")
    return par


@nb.njit(nogil=True, cache=True)
def _observable_batch(n, seed, indptr, nbr, eid, n_nodes, root, wired, W, H, incl,
                      mark_corners, mark_at, bpartner, d_indptr, d_nbr, d_de, primal, side_a,
                      side_b, n_dual, start, probes, max_steps):
    state = np.array([seed], dtype=np.uint64)
    N2 = mark_corners.shape[0]
    hits = np.zeros(probes.shape[0], dtype=np.int64)
    partner = np.zeros(N2, dtype=np.int64)
    label = np.full(incl.shape, -1, dtype=np.int64)
    in_xi = np.zeros(N2 // 2, dtype=np.int64)
    for s in range(n):
        chosen = wired.copy()
        if _wilson(indptr, nbr, eid, n_nodes, root, state, chosen, max_steps) < 0:
            return hits, -1
        if _trace(chosen, W, H, incl, mark_corners, mark_at, label, partner) < 0:
            return hits, -2
        in_xi[:] = 0
        k = 1
        for _ in range(N2):
            in_xi[(k - 1) // 2] = 1
            e = partner[k - 1]
            if e == N2:
                break
            k = bpartner[e - 1]
        par, flag = _parity(n_dual, start, d_indptr, d_nbr, d_de, primal, side_a, side_b,
                            chosen, label, in_xi)
        if flag < 0:
            return hits, -3
        for q in range(probes.shape[0]):
            hits[q] += par[probes[q]]
    return hits, 0


@dataclass(frozen=True)
class ObservableEstimate:
    probes: tuple
    n: int
    freq: np.ndarray
    sigma: np.ndarray
    seed: int
    threads: int


def estimate_observable(poly: LatticePolygon, beta: lp.LinkPattern, probes, n: int, seed: int,
                        threads: int | None = None) -> ObservableEstimate:
    """Monte-Carlo frequency of {probe right of the exploration path};
    probes are dual node ids (face id i*H + j)."""
    _observable_checks(beta)
    threads = threads or default_threads()
    g = wired_graph(poly, beta)
    dg = dual_graph(poly)
    d_indptr, d_nbr, d_de = _dual_csr(dg)
    probes = np.atleast_1d(np.asarray(probes, dtype=np.int64))
    bp = np.array([beta.partner(k) for k in range(1, 2 * beta.N + 1)], dtype=np.int64)
    args = (g.indptr, g.nbr, g.eid, g.n_nodes, g.root, poly.wired, poly.W, poly.H, poly.included,
            poly.mark_corners, poly.mark_at, bp, d_indptr, d_nbr, d_de, dg.primal, dg.side_a,
            dg.side_b, dg.n_nodes, poly.W * poly.H + poly.N - 1, probes, _step_cap(g.n_nodes))
    sizes = worker_sizes(n, threads)
    with ThreadPoolExecutor(threads) as ex:
        parts = list(ex.map(lambda w: _observable_batch(sizes[w], seed ^ w, *args), range(threads)))
    if any(flag < 0 for _, flag in parts):
        raise WalkError("observable sampling failed")
    hits = sum(h for h, _ in parts)
    f = hits / n
    return ObservableEstimate(tuple(int(p) for p in probes), n, f, np.sqrt(f * (1 - f) / n), seed, threads)


def _observable_checks(beta):
    if beta.N < 2 or (1, 2 * beta.N) in beta:
        raise LatticeError("the observable needs N >= 2 and {1,2N} not a link")


def dirichlet_groups(beta: lp.LinkPattern):
    """(zero, one, floating): free arcs with u = 0, with u = 1, and the
    floating groups, each a list of even arc indices."""
    n2 = 2 * beta.N
    orbits = lp.arc_orbits(beta, 0)
    main = next(o for o in orbits if n2 in o)
    return [n2], [k for k in main if k != n2], [o for o in orbits if n2 not in o]


@dataclass(frozen=True)
class ObservableField:
    u: np.ndarray           # per dual node (faces, then free arcs)
    residual: float
    flux: tuple             # net flux on each floating group


def solve_observable(poly: LatticePolygon, beta: lp.LinkPattern) -> ObservableField:
    """Discrete harmonic u on the dual graph: u = 0 on the last free arc,
    u = 1 on the other arcs wired to it, and one floating potential with zero
    net flux for every other group of free arcs. Wired edges have no dual
    edge, which gives the reflecting condition along wired arcs."""
    _observable_checks(beta)
    if beta.N != poly.N:
        raise LatticeError("size mismatch")
    dg = dual_graph(poly)
    F = poly.W * poly.H
    zero, one, floating = dirichlet_groups(beta)
    # unknowns: faces, then one per floating group
    col = np.full(dg.n_nodes, -1, dtype=np.int64)
    col[:F] = np.arange(F)
    fixed = np.zeros(dg.n_nodes)
    is_fixed = np.zeros(dg.n_nodes, dtype=bool)
    for k in zero + one:
        is_fixed[F + k // 2 - 1] = True
        fixed[F + k // 2 - 1] = 1.0 if k in one else 0.0
    for g, grp in enumerate(floating):
        for k in grp:
            col[F + k // 2 - 1] = F + g
    n = F + len(floating)
    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    for a, b in zip(dg.u, dg.v):
        for x, y in ((a, b), (b, a)):
            if is_fixed[x]:
                continue
            r = col[x]
            rows.append(r)
            cols.append(r)
            vals.append(1.0)
            if is_fixed[y]:
                rhs[r] += fixed[y]
            else:
                rows.append(r)
                cols.append(col[y])
                vals.append(-1.0)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    sol = spsolve(A.tocsc(), rhs)
    res = float(np.max(np.abs(A @ sol - rhs)))
    u = fixed.copy()
    free = ~is_fixed
    u[free] = sol[col[free]]
    flux = []
    for g, grp in enumerate(floating):
        nodes = {F + k // 2 - 1 for k in grp}
        s = 0.0
        for a, b in zip(dg.u, dg.v):
            if (a in nodes) != (b in nodes):
                inner, outer = (a, b) if a in nodes else (b, a)
                s += u[outer] - u[inner]
        flux.append(s)
    return ObservableField(u, res, tuple(flux))


def continuum_observable(poly: LatticePolygon, beta: lp.LinkPattern) -> np.ndarray:
    """Re phi_beta at the face centres, via the rectangle map."""
    from .scmap import slit_map, solve_Q
    f = polygon_map(poly)
    x = continuum_marks(poly)
    par = solve_Q(beta, x)
    i, j = np.meshgrid(np.arange(poly.W), np.arange(poly.H), indexing="ij")
    z = (i.ravel() + 0.5) + 1j * (j.ravel() + 0.5)
    w = f(z)
    w = w.real + 1j * np.abs(w.imag)
    return slit_map(par, w).real


def observable_distance(poly: LatticePolygon, beta: lp.LinkPattern) -> float:
    """sup over faces of |u - Re phi_beta|."""
    u = solve_observable(poly, beta).u[:poly.W * poly.H]
    return float(np.max(np.abs(u - continuum_observable(poly, beta))))
