import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sle8 import coulomb as cg
from sle8 import linkpat as lp
from conftest import F_n2_oracle, configs

SIMPLE2 = lp.parse_pattern("1-2,3-4")
NESTED2 = lp.parse_pattern("1-4,2-3")
RAINBOW3 = lp.rainbow(3)

# mpmath hypergeometric values at x = (0, 1, 2, 3)
F_SIMPLE_0123 = 9.85685672681803661294248108521
F_NESTED_0123 = 12.6094980231567455851548575412

# tensor-product simplex route at x = (0, ..., 5) and at a random config,
# frozen from the route that shares no phase bookkeeping with F_det
X3A = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
F3A = {"1-2,3-4,5-6": 30.92357603067596, "1-2,3-6,4-5": 39.4805677466594,
       "1-4,2-3,5-6": 39.4805677466594, "1-6,2-3,4-5": 44.895019863047665,
       "1-6,2-5,3-4": 52.853614012726226}
X3B = [-1.3, -0.2, 0.5, 1.7, 2.0, 4.1]
F3B = {"1-2,3-4,5-6": 38.94069075004359, "1-2,3-6,4-5": 32.04952138939454,
       "1-4,2-3,5-6": 42.64263737454105, "1-6,2-3,4-5": 31.743101354219387,
       "1-6,2-5,3-4": 51.83802781536516}


def test_f0_examples():
    assert cg.f0([0, 1]) == 1.0
    assert cg.f0([0, 1, 2, 3]) == pytest.approx(12 ** 0.25, rel=1e-15)


@settings(max_examples=30, deadline=None)
@given(x=configs(6), lam=st.floats(0.1, 10))
def test_f0_homogeneity(x, lam):
    assert cg.f0(lam * x) == pytest.approx(lam ** (3 * 5 / 4) * cg.f0(x), rel=1e-12)


@pytest.mark.parametrize("route", [cg.F_det, cg.F_simplex])
def test_n1_is_pi(route):
    assert route(lp.pattern((1, 2)), [0.0, 1.0]).value == pytest.approx(math.pi, rel=1e-12)


@pytest.mark.parametrize("route", [cg.F_det, cg.F_simplex])
def test_n2_against_hypergeometric(route):
    assert route(SIMPLE2, [0, 1, 2, 3]).value == pytest.approx(F_SIMPLE_0123, rel=1e-9)
    assert route(NESTED2, [0, 1, 2, 3]).value == pytest.approx(F_NESTED_0123, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(x=configs(4))
def test_n2_against_agm_oracle(x):
    assert cg.F_det(SIMPLE2, x).value == pytest.approx(F_n2_oracle(False, x), rel=1e-9)
    assert cg.F_det(NESTED2, x).value == pytest.approx(F_n2_oracle(True, x), rel=1e-9)


@pytest.mark.parametrize("x,table", [(X3A, F3A), (X3B, F3B)])
def test_n3_frozen_values(x, table):
    for b in lp.enumerate_patterns(3):
        assert cg.F_det(b, x).value == pytest.approx(table[str(b)], rel=1e-8)


def test_routes_agree_n3_random(rng):
    for _ in range(3):
        x = np.sort(rng.uniform(-3, 3, 6))
        if np.min(np.diff(x)) < 0.1:
            continue
        for b in lp.enumerate_patterns(3):
            a = cg.F_det(b, x).value
            s = cg.F_simplex(b, x).value
            assert abs(a - s) <= 1e-7 * s


@settings(max_examples=20, deadline=None)
@given(x=configs(6), c=st.floats(-10, 10), lam=st.floats(0.2, 5))
def test_translation_and_scaling(x, c, lam):
    for b in (lp.all_simple(3), RAINBOW3):
        f = cg.F_det(b, x).value
        assert cg.F_det(b, x + c).value == pytest.approx(f, rel=1e-10)
        assert cg.F_det(b, lam * x).value == pytest.approx(lam ** 0.75 * f, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(x=configs(6))
def test_positivity_and_phase(x):
    for b in lp.enumerate_patterns(3):
        v = cg.F_det(b, x)
        assert v.value > 0 and v.im_residue <= 1e-8 * v.value
        assert cg.Z(b, x).value > 0


def test_phase_error_raised():
    with pytest.raises(cg.PhaseError):
        cg._check_phase(SIMPLE2, complex(1.0, 0.1), 1e-8)


def test_wrong_length():
    with pytest.raises(ValueError):
        cg.F_det(SIMPLE2, [0, 1])


def test_z_small_cases():
    x = [0.0, 0.4, 1.1, 2.5]
    assert cg.Z(lp.pattern((1, 2)), [0, 1]).value == pytest.approx(math.pi)
    assert cg.Z(SIMPLE2, x).value == pytest.approx(cg.F_det(NESTED2, x).value, rel=1e-12)


def test_z_sum_rule_n3(rng):
    x = np.array([-2.0, -0.8, 0.1, 0.9, 2.2, 3.0])
    Zs = {a: cg.Z(a, x).value for a in lp.enumerate_patterns(3)}
    M = lp.meander_matrix(3)
    for b in lp.enumerate_patterns(3):
        s = sum(M[lp.pattern_index(a), lp.pattern_index(b)] * z for a, z in Zs.items())
        assert s == pytest.approx(cg.F_det(b, x).value, rel=1e-10)


def test_crossing_probabilities():
    assert cg.crossing_prob(lp.pattern((1, 2)), lp.pattern((1, 2)), [0, 1]) == pytest.approx(1.0)
    x = [0.0, 0.4, 1.1, 2.5]
    assert cg.crossing_prob(NESTED2, SIMPLE2, x) == pytest.approx(1.0, abs=1e-12)
    assert cg.crossing_prob(SIMPLE2, SIMPLE2, x) == 0.0
    p = cg.crossing_probs(RAINBOW3, X3A)
    assert {str(a) for a in p} == {"1-2,3-6,4-5", "1-4,2-3,5-6"}
    assert sum(p.values()) == pytest.approx(1.0, abs=1e-12)
    # reflection x -> -x maps one alpha onto the other, so both are 1/2 here
    assert all(v == pytest.approx(0.5, abs=1e-10) for v in p.values())


@settings(max_examples=15, deadline=None)
@given(x=configs(6))
def test_crossing_probabilities_in_unit_interval(x):
    for b in lp.enumerate_patterns(3):
        p = cg.crossing_probs(b, x)
        assert all(-1e-12 <= v <= 1 + 1e-12 for v in p.values())
        assert sum(p.values()) == pytest.approx(1.0, abs=1e-10)


def test_dlog_n1():
    assert cg.dlogF(lp.pattern((1, 2)), [0.0, 1.0], 1) == pytest.approx(-0.25, rel=1e-9)


@settings(max_examples=10, deadline=None)
@given(x=configs(6, min_gap=0.3))
def test_dlog_translation_and_euler(x):
    for b in (RAINBOW3, lp.all_simple(3)):
        g = np.array([cg.dlogF(b, x, i) for i in range(1, 7)])
        scale = np.max(np.abs(g)) + 1
        assert abs(g.sum()) < 1e-7 * scale
        assert np.dot(x, g) == pytest.approx(0.75, abs=1e-6 * scale * (1 + np.max(np.abs(x))))


def test_f_polygon_identity_and_mobius():
    x = np.array([-1.0, -0.3, 0.4, 1.2])
    assert cg.F_polygon(SIMPLE2, x, np.ones(4)) == pytest.approx(cg.F_det(SIMPLE2, x).value, rel=1e-14)
    xi = 0.3
    y = x / (1 + xi * x)
    d = (1 + xi * x) ** -2.0
    assert cg.F_polygon(SIMPLE2, y, d) == pytest.approx(cg.F_det(SIMPLE2, x).value, rel=1e-9)


def test_f_polygon_rotation_relabel():
    # z -> -1/(z - c) with c in (x_1, x_2) sends x_1 past all other points;
    # after relabelling cyclically the pattern becomes cyclic_shift(beta)
    x = np.array([-1.0, -0.3, 0.4, 1.2, 2.0, 3.5])
    c = 0.5 * (x[0] + x[1])
    y = np.roll(-1 / (x - c), -1)
    d = np.roll((x - c) ** -2.0, -1)
    for b in lp.enumerate_patterns(3):
        val = cg.F_polygon(lp.cyclic_shift(b), y, d)
        assert val == pytest.approx(cg.F_det(b, x).value, rel=1e-10)
