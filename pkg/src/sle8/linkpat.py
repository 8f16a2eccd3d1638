"""Planar link patterns, meanders and non-crossing partitions.

Indices are 1-based. A pattern on 2N points is stored canonically as
((a_1, b_1), ..., (a_N, b_N)) with a_1 < ... < a_N and a_r < b_r.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

MAX_N = 10


class PatternError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class LinkPattern:
    links: tuple[tuple[int, int], ...]

    def __post_init__(self):
        links = tuple(sorted((min(a, b), max(a, b)) for a, b in self.links))
        n2 = 2 * len(links)
        seen = set()
        for a, b in links:
            for i in (a, b):
                if not 1 <= i <= n2:
                    raise PatternError(f"index {i} outside 1..{n2}")
                if i in seen:
                    raise PatternError(f"index {i} repeated")
                seen.add(i)
        for (a, b), (c, d) in itertools.combinations(links, 2):
            if a < c < b < d:
                raise PatternError(f"links {a}-{b} and {c}-{d} cross")
        object.__setattr__(self, "links", links)

    @property
    def N(self) -> int:
        return len(self.links)

    def partner(self, i: int) -> int:
        for a, b in self.links:
            if a == i:
                return b
            if b == i:
                return a
        raise PatternError(f"index {i} not in pattern")

    def partners(self) -> dict[int, int]:
        out = {}
        for a, b in self.links:
            out[a] = b
            out[b] = a
        return out

    def __contains__(self, link) -> bool:
        a, b = link
        return (min(a, b), max(a, b)) in self.links

    def __str__(self) -> str:
        return ",".join(f"{a}-{b}" for a, b in self.links)

    def __repr__(self) -> str:
        return f"LinkPattern({self})"


def parse_pattern(text: str) -> LinkPattern:
    """Parse ``"1-6,2-5,3-4"``; order of links and of endpoints is free."""
    links = []
    for pos, tok in enumerate(text.replace(" ", "").split(",")):
        try:
            a, b = tok.split("-")
            links.append((int(a), int(b)))
        except ValueError:
            raise PatternError(f"cannot parse link {pos + 1}: {tok!r}") from None
    return LinkPattern(tuple(links))


def pattern(*links) -> LinkPattern:
    return LinkPattern(tuple(tuple(l) for l in links))


def catalan(n: int) -> int:
    return comb(2 * n, n) // (n + 1)


@lru_cache(maxsize=None)
def enumerate_patterns(N: int) -> tuple[LinkPattern, ...]:
    if not 1 <= N <= MAX_N:
        raise PatternError(f"N={N} outside supported range 1..{MAX_N}")

    def rec(points):
        if not points:
            yield ()
            return
        first = points[0]
        # partner must leave an even number of points inside
        for m in range(1, len(points), 2):
            inner, outer = points[1:m], points[m + 1:]
            for li in rec(inner):
                for lo in rec(outer):
                    yield ((first, points[m]),) + li + lo

    pats = [LinkPattern(l) for l in rec(tuple(range(1, 2 * N + 1)))]
    return tuple(sorted(pats, key=lambda p: p.links))


def all_simple(N: int) -> LinkPattern:
    return LinkPattern(tuple((2 * r - 1, 2 * r) for r in range(1, N + 1)))


def rainbow(N: int) -> LinkPattern:
    return LinkPattern(tuple((r, 2 * N + 1 - r) for r in range(1, N + 1)))


# -- meanders -----------------------------------------------------------------

def meander_loops(alpha: LinkPattern, beta: LinkPattern) -> int:
    if alpha.N != beta.N:
        raise PatternError(f"size mismatch: N={alpha.N} vs N={beta.N}")
    parent = list(range(2 * alpha.N + 1))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in alpha.links + beta.links:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(i) for i in range(1, 2 * alpha.N + 1)})


@lru_cache(maxsize=None)
def meander_matrix(N: int) -> np.ndarray:
    """0/1 integer matrix indexed by ``enumerate_patterns(N)``."""
    pats = enumerate_patterns(N)
    n = len(pats)
    M = np.zeros((n, n), dtype=np.int64)
    for i, a in enumerate(pats):
        for j in range(i, n):
            M[i, j] = M[j, i] = int(meander_loops(a, pats[j]) == 1)
    M.setflags(write=False)
    return M


def rational_inverse(A) -> np.ndarray:
    """Exact inverse by Gauss-Jordan over Fractions (object array)."""
    A = np.asarray(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"matrix is not square (shape = {A.shape})")
    X = np.empty((n, 2 * n), dtype=object)
    for i in range(n):
        for j in range(n):
            X[i, j] = Fraction(int(A[i, j])) if not isinstance(A[i, j], Fraction) else A[i, j]
            X[i, n + j] = Fraction(int(i == j))
    for c in range(n):
        piv = next((r for r in range(c, n) if X[r, c] != 0), None)
        if piv is None:
            raise ZeroDivisionError("matrix is singular")
        if piv != c:
            X[[c, piv]] = X[[piv, c]]
        X[c] = X[c] / X[c, c]
        col = X[:, c].copy()
        col[c] = 0
        rows = np.nonzero(col != 0)[0]
        if len(rows):
            X[rows] -= np.outer(col[rows], X[c])
    return X[:, n:]


@lru_cache(maxsize=None)
def meander_inverse(N: int) -> np.ndarray:
    """Exact M^{-1} as an object array of Fractions."""
    Minv = rational_inverse(meander_matrix(N))
    Minv.setflags(write=False)
    return Minv


def pattern_index(p: LinkPattern) -> int:
    return _index_map(p.N)[p]


@lru_cache(maxsize=None)
def _index_map(N):
    return {p: i for i, p in enumerate(enumerate_patterns(N))}


def compatible(beta: LinkPattern) -> list[LinkPattern]:
    """All alpha with M[alpha, beta] = 1."""
    M = meander_matrix(beta.N)
    j = pattern_index(beta)
    return [a for i, a in enumerate(enumerate_patterns(beta.N)) if M[i, j]]


# -- local moves ---------------------------------------------------------------

def tie(beta: LinkPattern, j: int) -> LinkPattern:
    if not 1 <= j <= 2 * beta.N - 1:
        raise PatternError(f"j={j} outside 1..{2 * beta.N - 1}")
    if (j, j + 1) in beta:
        raise PatternError(f"{{{j},{j + 1}}} already a link")
    l1, l2 = beta.partner(j), beta.partner(j + 1)
    rest = [l for l in beta.links if j not in l and j + 1 not in l]
    return LinkPattern(tuple(rest + [(j, j + 1), (l1, l2)]))


def remove(beta: LinkPattern, j: int) -> LinkPattern:
    if (j, j + 1) not in beta:
        raise PatternError(f"{{{j},{j + 1}}} is not a link")
    if beta.N == 1:
        raise PatternError("cannot remove the only link")

    def lab(i):
        return i if i < j else i - 2

    return LinkPattern(tuple((lab(a), lab(b)) for a, b in beta.links if a != j))


rho_hat = remove


def wp_hat(beta: LinkPattern, j: int) -> LinkPattern:
    return remove(tie(beta, j), j)


def cyclic_shift(beta: LinkPattern) -> LinkPattern:
    n2 = 2 * beta.N

    def s(i):
        return n2 if i == 1 else i - 1

    return LinkPattern(tuple((s(a), s(b)) for a, b in beta.links))


def allowable_ordering(alpha: LinkPattern) -> list[tuple[int, int]]:
    """Links in an order where each one joins neighbours among survivors."""
    alive = list(range(1, 2 * alpha.N + 1))
    links = set(alpha.links)
    order = []
    while links:
        for pos in range(len(alive) - 1):
            l = (alive[pos], alive[pos + 1])
            if l in links:
                break
        else:  # pragma: no cover - impossible for planar patterns
            raise PatternError("no removable link")
        order.append(l)
        links.remove(l)
        alive.remove(l[0])
        alive.remove(l[1])
    return order


# -- non-crossing partitions ---------------------------------------------------

@dataclass(frozen=True)
class NonCrossingPartition:
    n_arcs: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(sorted(tuple(sorted(b)) for b in self.blocks if len(b)))
        flat = sorted(i for b in blocks for i in b)
        if flat != list(range(1, self.n_arcs + 1)):
            raise PatternError("blocks must partition 1..N")
        where = {i: k for k, b in enumerate(blocks) for i in b}
        for a, b, c, d in itertools.combinations(range(1, self.n_arcs + 1), 4):
            if where[a] == where[c] != where[b] == where[d]:
                raise PatternError(f"blocks cross at {a},{b},{c},{d}")
        object.__setattr__(self, "blocks", blocks)

    def __str__(self):
        return "|".join(" ".join(map(str, b)) for b in self.blocks)


def parse_partition(text: str, n_arcs: int | None = None) -> NonCrossingPartition:
    blocks = [tuple(int(t) for t in part.split()) for part in text.split("|")]
    n = n_arcs if n_arcs is not None else max(max(b) for b in blocks)
    return NonCrossingPartition(n, tuple(blocks))


def partition_to_pattern(pi: NonCrossingPartition) -> LinkPattern:
    """Wired arc i is the boundary segment (x_{2i-1} x_{2i}).

    A block i_1 < ... < i_m is realized by the chords {2 i_t, 2 i_{t+1} - 1}
    and the closing chord {2 i_m, 2 i_1 - 1}; a singleton gives {2i-1, 2i}.
    """
    links = []
    for b in pi.blocks:
        for t in range(len(b)):
            nxt = b[(t + 1) % len(b)]
            links.append((2 * b[t], 2 * nxt - 1))
    return LinkPattern(tuple(links))


def arc_orbits(beta: LinkPattern, parity: int) -> list[list[int]]:
    """Boundary arcs (x_k x_{k+1}) grouped by the exterior faces of beta.

    parity=1 gives the wired arcs (k odd), parity=0 the dual arcs (k even,
    arc 2N being (x_{2N} x_1)). Each group is listed in traversal order
    k -> beta(k+1).
    """
    n2 = 2 * beta.N
    nxt = beta.partners()
    left = [k for k in range(1, n2 + 1) if k % 2 == parity]
    out = []
    while left:
        k0 = left[0]
        orb, k = [], k0
        while True:
            orb.append(k)
            left.remove(k)
            k = nxt[k % n2 + 1]
            if k == k0:
                break
        out.append(orb)
    return out


def pattern_to_partition(beta: LinkPattern) -> NonCrossingPartition:
    blocks = [tuple((k + 1) // 2 for k in orb) for orb in arc_orbits(beta, 1)]
    return NonCrossingPartition(beta.N, tuple(blocks))


# -- coefficient ---------------------------------------------------------------

_IPOW = (1, 1j, -1, -1j)


def coefficient(beta: LinkPattern, k) -> int:
    """Coefficient of the simplex integral rho_k in the expansion of F_beta.

    Brute-force signed sum over permutations with pruning; the result is
    always 0 or 1.
    """
    k = tuple(int(v) for v in k)
    N = beta.N
    if len(k) != N or any(k[i] >= k[i + 1] for i in range(N - 1)):
        raise PatternError(f"k={k} must be strictly increasing of length {N}")
    if k[0] < 1 or k[-1] > 2 * N - 1:
        raise PatternError(f"k={k} outside 1..{2 * N - 1}")
    ok = [[beta.links[r][0] <= k[t] <= beta.links[r][1] - 1 for t in range(N)]
          for r in range(N)]

    total = 0

    def rec(r, used, sign_perm):
        nonlocal total
        if r == N:
            total += _perm_sign(sign_perm)
            return
        for t in range(N):
            if not used[t] and ok[r][t]:
                used[t] = True
                sign_perm.append(t)
                rec(r + 1, used, sign_perm)
                sign_perm.pop()
                used[t] = False

    rec(0, [False] * N, [])
    if total == 0:
        return 0
    e = sum(k) - sum(a for a, _ in beta.links)
    val = total * _IPOW[e % 4]
    if val == 1:
        return 1
    raise ArithmeticError(f"coefficient {val} not in {{0,1}} for {beta}, k={k}")


def _perm_sign(p) -> int:
    p = list(p)
    s = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            s = -s
    return s


@lru_cache(maxsize=None)
def simplex_terms(beta: LinkPattern) -> tuple[tuple[int, ...], ...]:
    """All increasing k with coefficient(beta, k) = 1."""
    N = beta.N
    return tuple(k for k in itertools.combinations(range(1, 2 * N), N)
                 if coefficient(beta, k))
