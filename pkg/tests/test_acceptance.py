"""Acceptance criteria 1-15, one test each.

Every test records a one-line PASS/FAIL summary; conftest prints them all at
the end of the session. Heavy Monte Carlo criteria are marked slow.
"""

import math
import time

import numpy as np
import pytest

from sle8 import coulomb as cg
from sle8 import linkpat as lp
from sle8 import loewner as lw
from sle8 import scmap, ust
from sle8 import verify as vf
from conftest import F_n2_oracle, random_config

RESULTS = {}


def report(k, ok, detail):
    line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[k] = line
    print(line)
    assert ok, line


def _grid(rng, N, n_cfg):
    return [random_config(rng, 2 * N, min_gap=0.15) for _ in range(n_cfg)]


def test_c01_closed_form_n1():
    t = time.perf_counter()
    v = cg.F_det(lp.pattern((1, 2)), [0.0, 1.0]).value
    s = cg.F_simplex(lp.pattern((1, 2)), [0.0, 1.0]).value
    dt = time.perf_counter() - t
    err = max(abs(v - math.pi), abs(s - math.pi)) / math.pi
    report(1, err <= 1e-10 and dt < 1, f"F_12(0,1) rel err {err:.1e}, {dt:.2f} s")


def test_c02_closed_form_n2():
    rng = np.random.default_rng(2)
    t = time.perf_counter()
    err = 0.0
    for x in _grid(rng, 2, 10):
        err = max(err, abs(cg.F_det(lp.all_simple(2), x).value / F_n2_oracle(False, x) - 1),
                  abs(cg.F_det(lp.rainbow(2), x).value / F_n2_oracle(True, x) - 1))
    dt = time.perf_counter() - t
    report(2, err <= 1e-8 and dt < 5, f"max rel err vs AGM oracle {err:.1e} on 10 configs, {dt:.2f} s")


def _route_grid():
    rng = np.random.default_rng(3)
    for N in (2, 3, 4):
        for x in _grid(rng, N, 20):
            yield N, x


def test_c03_route_agreement():
    t = time.perf_counter()
    worst, count = 0.0, 0
    for N, x in _route_grid():
        for b in lp.enumerate_patterns(N):
            a = cg.F_det(b, x, estimate=False).value
            s = cg.F_simplex(b, x).value
            worst = max(worst, abs(a - s) / s)
            count += 1
    dt = time.perf_counter() - t
    report(3, worst <= 1e-7 and dt < 120, f"max |F_det-F_simplex|/F {worst:.1e} over {count} cases, {dt:.1f} s")


def test_c04_positivity_and_phase():
    worst_im, min_f, min_z, count = 0.0, np.inf, np.inf, 0
    for N, x in _route_grid():
        for b in lp.enumerate_patterns(N):
            v = cg.F_det(b, x, estimate=False)
            worst_im = max(worst_im, v.im_residue / abs(v.value))
            min_f = min(min_f, v.value / cg.f0(x))
            min_z = min(min_z, cg.Z(b, x, estimate=False).value / cg.f0(x))
            count += 1
    ok = min_f > 0 and min_z > 0 and worst_im <= 1e-8
    report(4, ok, f"min F/f0 {min_f:.3g}, min Z/f0 {min_z:.3g}, max |Im|/|Re| {worst_im:.1e}, {count} cases")


def test_c05_mobius():
    rng = np.random.default_rng(5)
    worst, count = 0.0, 0
    for N in (1, 2, 3):
        x = vf.random_config(rng, 2 * N)
        _, (lo, hi) = vf.special_conformal_range(x)
        for b in lp.enumerate_patterns(N):
            for kind in ("F", "Z"):
                for tr, par in (("translation", 3.7), ("scaling", 0.35), ("special", lo + 0.7 * (hi - lo))):
                    r = vf.mobius_check(kind, b, x, tr, par)
                    worst = max(worst, r.measured)
                    count += 1
    report(5, worst <= 1e-6, f"max covariance defect {worst:.1e} over {count} checks")


def test_c06_pde():
    rng = np.random.default_rng(6)
    worst, count = 0.0, 0
    for N in (1, 2, 3):
        x = vf.random_config(rng, 2 * N)
        for b in lp.enumerate_patterns(N):
            for kind in ("F", "Z"):
                for j in range(1, 2 * N + 1):
                    worst = max(worst, vf.pde_residual(kind, b, x, j).measured)
                    count += 1
    report(6, worst <= 1e-4, f"max normalised residual {worst:.1e} over {count} (pattern, j)")


def test_c07_fusion_asymptotics():
    rng = np.random.default_rng(7)
    groups = {"F/pi": [], "F/log": [], "Z/pi": [], "Z/log": [], "Z/pi fibre sum": []}
    for N in (1, 2, 3):
        x = vf.random_config(rng, 2 * N)
        for b in lp.enumerate_patterns(N):
            for j in range(1, 2 * N):
                for kind in ("F", "Z"):
                    if kind == "Z" and N == 1:
                        continue
                    r = vf.asy_check(kind, b, x, j)
                    channel = "pi" if r.check.startswith("asy-generic") else "log"
                    groups[f"{kind}/{channel}"].append(r)
        if N > 1:
            for j in range(1, 2 * N):
                for g in lp.enumerate_patterns(N - 1):
                    groups["Z/pi fibre sum"].append(vf.asy_fibre_sum(g, x, j))
    parts = [f"{k} {sum(r.passed for r in v)}/{len(v)}" for k, v in groups.items()]
    literal = [r for k, v in groups.items() if k != "Z/pi fibre sum" for r in v]
    # the literal pi-channel for Z fails where two alphas share one reduced pattern
    report(7, all(r.passed for r in literal), "; ".join(parts))


def test_c08_lim_collocation():
    worst_diag, worst_off, r2 = 0.0, 0.0, 1.0
    for N in (1, 2, 3):
        for a in lp.enumerate_patterns(N):
            vals, r2a = vf.lim_matrix(a)
            r2 = min(r2, r2a)
            for b, v in vals.items():
                if b == a:
                    worst_diag = max(worst_diag, abs(v / math.pi - 1))
                else:
                    worst_off = max(worst_off, abs(v) / math.pi)
    ok = worst_diag <= 0.02 and worst_off < 0.05
    report(8, ok, f"diag rel dev {worst_diag:.1e}, off-diag/pi {worst_off:.1e}, min R^2 {r2:.6f}")


def test_c09_matrix_identities():
    rng = np.random.default_rng(9)
    worst, dets = 0.0, True
    for N in (1, 2, 3, 4):
        x = vf.random_config(rng, 2 * N)
        for b in lp.enumerate_patterns(N):
            mp, det = vf.matrix_identity(b, x)
            worst = max(worst, mp.measured)
            M = scmap.loop_matrix_M(b)
            # triangular with diagonal 2: the determinant is 2^N exactly
            dets &= bool(np.all(np.tril(M, -1) == 0) and np.all(np.diag(M) == 2)) and det.passed
    report(9, worst <= 1e-8 and dets, f"max |MP - P_loop|/|P_loop| {worst:.1e}; det M = 2^N: {dets}")


def test_c10_slit_map():
    rng = np.random.default_rng(10)
    closure, drift, brackets = 0.0, 0.0, True
    for _ in range(10):
        x = vf.random_config(rng, 6)
        for b in lp.enumerate_patterns(3):
            if (1, 6) in b:
                continue
            c, br, d = vf.slit_checks(b, x)
            closure = max(closure, c.measured)
            brackets &= br.passed
            drift = max(drift, abs(d.measured - d.target) / abs(d.target))
    ok = closure < 1e-8 and brackets and drift <= 1e-5
    report(10, ok, f"max closure {closure:.1e}, mu brackets {brackets}, drift rel err {drift:.1e}")


def test_c11_meander_facts():
    M2 = lp.meander_matrix(2)
    anti = bool(np.array_equal(M2, np.array([[0, 1], [1, 0]])))
    nested4 = lp.parse_pattern("1-2,3-8,4-7,5-6")
    n_comp = len(lp.compatible(nested4))
    rng = np.random.default_rng(11)
    x = vf.random_config(rng, 8)
    Zs = {a: cg.Z(a, x, estimate=False).value for a in lp.compatible(nested4)}
    err = abs(sum(Zs.values()) / cg.F_det(nested4, x).value - 1)
    report(11, anti and n_comp == 4 and err <= 1e-7,
           f"N=2 anti-diagonal {anti}; {nested4} has {n_comp} compatible alpha; sum rule err {err:.1e}")


@pytest.mark.slow
def test_c12_monte_carlo_vs_exact():
    beta = lp.rainbow(3)
    n = 100_000
    out = {}
    for size in (50, 100):
        t = time.perf_counter()
        r = ust.mc_crossing(ust.symmetric_hexagon(size), beta, n, seed=12)
        out[size] = (r, time.perf_counter() - t)
    r50, t50 = out[50]
    r100, t100 = out[100]
    within = all(abs(row.freq - row.exact) <= 3 * row.sigma for row in r50.rows)
    gap50 = max(abs(row.freq - row.exact) for row in r50.rows)
    gap100 = max(abs(row.freq - row.exact) for row in r100.rows)
    sig = r50.rows[0].sigma
    # the lattice law is exactly 1/2 here, so both gaps are sampling noise
    refine = gap100 <= gap50 + 3 * math.sqrt(2) * sig
    z = [f"{(row.freq - row.exact) / row.sigma:+.2f}" for row in r50.rows]
    report(12, within and refine,
           f"50x50 z-scores {z} (sigma {sig:.1e}, {t50:.0f} s, {r50.threads} thread(s)); "
           f"gap 50x50 {gap50:.1e} -> 100x100 {gap100:.1e} ({t100:.0f} s)")


@pytest.mark.slow
def test_c13_deterministic_patterns():
    ok, detail = True, []
    for N, fr in ((2, [0.05, 0.3, 0.55, 0.8]), (3, [0.05, 0.2, 0.35, 0.55, 0.7, 0.85])):
        beta = lp.all_simple(N)
        (alpha,) = lp.compatible(beta)
        r = ust.mc_crossing(ust.square_polygon(40, fr), beta, 10_000, seed=13)
        c = r.row(alpha).count
        ok &= c == 10_000
        detail.append(f"{beta} -> {alpha}: {c}/10000")
    report(13, ok, "; ".join(detail))


@pytest.mark.slow
def test_c14_discrete_observable():
    fr = [0.05, 0.2, 0.35, 0.55, 0.7, 0.85]
    beta = lp.parse_pattern("1-2,3-6,4-5")
    res, bounds, dist = 0.0, True, []
    for n in (16, 32):
        poly = ust.square_polygon(n, fr)
        f = ust.solve_observable(poly, beta)
        res = max(res, f.residual)
        bounds &= bool(f.u.min() >= -1e-12 and f.u.max() <= 1 + 1e-12)
        dist.append(ust.observable_distance(poly, beta))
    poly = ust.square_polygon(16, fr)
    u = ust.solve_observable(poly, beta).u
    probes = [17, 60, 120, 190, 250]
    est = ust.estimate_observable(poly, beta, probes, 10_000, seed=14)
    z = (est.freq - u[probes]) / np.maximum(est.sigma, 1e-12)
    ok = res < 1e-10 and bounds and dist[1] < dist[0] and bool(np.all(np.abs(z) < 3))
    report(14, ok, f"residual {res:.1e}, 0<=u<=1 {bounds}, sup dist {dist[0]:.3f} -> {dist[1]:.3f}, "
                   f"probe z {np.round(z, 2).tolist()}")


@pytest.mark.slow
def test_c15_loewner():
    rng = np.random.default_rng(15)
    src = lw.DriftSource("F", lp.pattern((1, 2)))
    err = 0.0
    for _ in range(100):
        w = rng.uniform(-5, 5)
        v = w + rng.uniform(0.05, 5)
        i = int(rng.integers(1, 3))
        W, V = (w, v) if i == 1 else (v, w)
        err = max(err, abs(lw.drift(src, [w, v], i) / (2 / (W - V)) - 1))
    x = [0.0, 1.0, 2.2, 3.0, 4.1, 5.0]
    st = lw.martingale_check(x, 1, lp.rainbow(3), lp.parse_pattern("1-2,3-6,4-5"), 1000, 2e-3, 0.2, seed=15)
    report(15, err <= 1e-8 and st.consistent,
           f"N=1 drift rel err {err:.1e} at 100 states; martingale mean {st.mean:+.2e} "
           f"(sem {st.sem:.1e}, z {st.z:+.2f}, {st.near_swallow} stopped near swallowing)")
