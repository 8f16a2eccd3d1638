import itertools

import numpy as np
import pytest
from scipy.stats import chisquare

from sle8 import coulomb as cg
from sle8 import linkpat as lp
from sle8 import ust

SQ6 = [0.05, 0.2, 0.35, 0.55, 0.7, 0.85]


def _tree_law(n_nodes, edges, n, root=0):
    counts = {}
    for s in range(n):
        t = frozenset(ust.wilson_tree(n_nodes, edges, root, seed=s + 1).tolist())
        counts[t] = counts.get(t, 0) + 1
    return counts


def test_wilson_square_cycle_uniform():
    # the 2x2 vertex grid is a 4-cycle with exactly 4 spanning trees
    counts = _tree_law(4, [(0, 1), (1, 3), (3, 2), (2, 0)], 8000)
    assert len(counts) == 4
    assert all(len(t) == 3 for t in counts)
    assert chisquare(list(counts.values())).pvalue > 1e-3


def test_wilson_k4_uniform_any_root():
    edges = list(itertools.combinations(range(4), 2))
    for root in (0, 2):
        counts = _tree_law(4, edges, 16000, root)
        assert len(counts) == 16             # Cayley: 4^(4-2)
        assert chisquare(list(counts.values())).pvalue > 1e-3


def test_wilson_multigraph_weights():
    # doubled edge between 0 and 1: trees through either copy are equally likely
    counts = _tree_law(3, [(0, 1), (0, 1), (1, 2)], 6000)
    assert len(counts) == 2
    assert chisquare(list(counts.values())).pvalue > 1e-3


def test_wilson_disconnected_raises():
    with pytest.raises(ust.WalkError):
        ust.wilson_tree(4, [(0, 1), (2, 3)])


@pytest.mark.parametrize("marks", [(0, 1, 2, 3), (0, 3, 5, 9, 12, 14, 20)])
def test_bad_marks_rejected(marks):
    with pytest.raises(ust.LatticeError):
        ust.LatticePolygon(6, 5, 0.2, marks)


def test_polygon_counts():
    p = ust.square_polygon(10, [0.05, 0.3, 0.55, 0.8])
    assert (p.N, p.n_vertices, p.n_edges) == (2, 121, 220)
    assert len(p.boundary) == 40


def test_symmetric_hexagon_marks_mirror():
    p = ust.symmetric_hexagon(30)
    B = p.boundary
    xs = [B[s][0] for s in p.marks]
    for k in range(3):
        assert xs[k] + xs[5 - k] == p.W


def test_continuum_marks_increasing():
    x = ust.continuum_marks(ust.square_polygon(12, SQ6))
    assert len(x) == 6 and np.all(np.diff(x) > 0)


@pytest.mark.parametrize("beta", [lp.all_simple(3), lp.all_simple(2)], ids=str)
def test_unique_compatible_pattern_is_deterministic(beta):
    assert len(lp.compatible(beta)) == 1
    N = beta.N
    poly = ust.square_polygon(12, SQ6 if N == 3 else [0.05, 0.3, 0.55, 0.8])
    r = ust.mc_crossing(poly, beta, 500, seed=3, threads=1)
    assert len(r.rows) == 1 and r.rows[0].count == 500
    assert r.rows[0].exact == pytest.approx(1.0, abs=1e-12)


def test_symmetric_hexagon_rainbow_halves():
    r = ust.mc_crossing(ust.symmetric_hexagon(20), lp.rainbow(3), 4000, seed=1, threads=1)
    assert {str(row.alpha) for row in r.rows} == {"1-2,3-6,4-5", "1-4,2-3,5-6"}
    for row in r.rows:
        assert row.exact == pytest.approx(0.5, abs=1e-9)
        assert abs(row.freq - 0.5) < 4 * row.sigma
        assert row.ci_lo < row.freq < row.ci_hi
    assert sum(row.count for row in r.rows) == 4000


def test_reproducible_for_fixed_seed_and_threads():
    poly = ust.square_polygon(10, SQ6)
    a = ust.mc_crossing(poly, lp.rainbow(3), 300, seed=7, threads=2)
    b = ust.mc_crossing(poly, lp.rainbow(3), 300, seed=7, threads=2)
    assert [r.count for r in a.rows] == [r.count for r in b.rows]
    assert ust.worker_sizes(10, 3) == [4, 3, 3]


def test_peano_curves_and_exploration():
    poly = ust.square_polygon(12, SQ6)
    beta = lp.rainbow(3)
    g = ust.wired_graph(poly, beta)
    for seed in range(5):
        t = ust.sample_tree(g, seed)
        curves, A = ust.peano_curves(t)
        assert lp.meander_loops(A, beta) == 1
        assert len(curves) == 3
        path, chain = ust.exploration_path(t)
        assert chain[0] == 1 and A.partner(chain[-1]) == 6
        # each step of a Peano curve moves by one medial half-edge
        for c in curves:
            steps = np.abs(np.diff(c, axis=0)).sum(axis=1)
            assert np.allclose(steps, steps[0])


def test_wired_graph_size_mismatch():
    with pytest.raises(ust.LatticeError):
        ust.wired_graph(ust.square_polygon(10, SQ6), lp.all_simple(2))


@pytest.mark.parametrize("beta", ["1-2,3-4,5-6", "1-2,3-6,4-5", "1-4,2-3,5-6"])
def test_observable_solve(beta):
    b = lp.parse_pattern(beta)
    f = ust.solve_observable(ust.square_polygon(12, SQ6), b)
    assert f.residual < 1e-10
    assert f.u.min() >= -1e-12 and f.u.max() <= 1 + 1e-12
    assert all(abs(v) < 1e-10 for v in f.flux)


def test_observable_floating_groups_n4():
    poly = ust.square_polygon(8, [0.05, 0.15, 0.3, 0.4, 0.55, 0.65, 0.8, 0.9])
    b = lp.parse_pattern("1-4,2-3,5-8,6-7")
    assert ust.dirichlet_groups(b) == ([8], [4], [[2], [6]])
    f = ust.solve_observable(poly, b)
    assert len(f.flux) == 2 and max(map(abs, f.flux)) < 1e-10


def test_observable_rejects_outer_link():
    with pytest.raises(ust.LatticeError):
        ust.solve_observable(ust.square_polygon(12, SQ6), lp.rainbow(3))


def test_observable_mc_matches_solution():
    poly = ust.square_polygon(10, SQ6)
    b = lp.parse_pattern("1-2,3-6,4-5")
    u = ust.solve_observable(poly, b).u
    probes = [0, 23, 45, 67, 99]
    est = ust.estimate_observable(poly, b, probes, 3000, seed=5, threads=1)
    for p, f, s in zip(probes, est.freq, est.sigma):
        assert abs(f - u[p]) < 4 * max(s, 1e-3)


def test_observable_distance_small():
    d = ust.observable_distance(ust.square_polygon(16, SQ6), lp.all_simple(3))
    assert 0 < d < 0.2


def test_crossing_exact_matches_coulomb():
    poly = ust.square_polygon(12, SQ6)
    r = ust.mc_crossing(poly, lp.rainbow(3), 10, seed=0, threads=1)
    p = cg.crossing_probs(lp.rainbow(3), np.array(r.x_continuum))
    for row in r.rows:
        assert row.exact == pytest.approx(p[row.alpha], rel=1e-12)
