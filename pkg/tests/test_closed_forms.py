import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from afde import closed_forms as cf
from afde.similarity import derive_similarity, validate_exponents

from strategies import exponent_sets

ME1 = validate_exponents(1, (0.5,))
SE1 = derive_similarity(ME1)
ME2 = validate_exponents(2, (0.8, 0.4))
SE2 = derive_similarity(ME2)


def test_barenblatt_values():
    assert cf.barenblatt_profile_1d(0.0, 0.5, 1.0) == pytest.approx(1.0)
    # corrected coefficient 1/3 at m = 0.5: (1 + 1)^-2 at y = sqrt(3)
    assert cf.barenblatt_profile_1d(math.sqrt(3.0), 0.5, 1.0) == pytest.approx(0.25)
    assert cf.barenblatt_coefficient_1d(0.5) == pytest.approx(1 / 3)
    assert cf.printed_coefficient_1d(0.5) == pytest.approx(1 / 6)


@given(st.floats(-50, 50), st.floats(0.05, 0.95))
def test_barenblatt_even(y, m):
    assert cf.barenblatt_profile_1d(y, m, 1.0) == cf.barenblatt_profile_1d(-y, m, 1.0)


def test_vss_values():
    assert cf.vss_constant_1d(0.5) == pytest.approx(9.0)
    assert cf.vss_1d(1.0, 1.0, 0.5) == pytest.approx(9.0)
    assert cf.vss_1d(1.0, 4.0, 0.5) == pytest.approx(9.0 * 16)
    with pytest.raises(ValueError):
        cf.vss_1d(0.0, 1.0, 0.5)


def test_barenblatt_increases_to_vss():
    y = 1.7
    vals = [cf.barenblatt_profile_1d(y, 0.5, C) for C in (1.0, 0.1, 0.01, 1e-4, 1e-8)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(cf.vss_1d(y, 1.0, 0.5), rel=1e-6)


def test_barenblatt_mass_closed_form():
    M = quad(lambda y: cf.barenblatt_profile_1d(y, 0.5, 1.0), -np.inf, np.inf)[0]
    assert cf.barenblatt_mass_1d(0.5, 1.0) == pytest.approx(M, rel=1e-9)
    C = cf.barenblatt_C_for_mass_1d(0.5, 3.0)
    assert cf.barenblatt_mass_1d(0.5, C) == pytest.approx(3.0, rel=1e-12)


def test_stationary_residual_barenblatt_and_vss():
    y = np.array([[-2.0], [0.3], [1.1], [4.0]])
    r = cf.residual_stationary(lambda p: cf.barenblatt_profile_1d(p[..., 0], 0.5, 1.0), ME1, SE1, y, 1e-3)
    assert np.max(np.abs(r)) <= 1e-5
    r = cf.residual_stationary(lambda p: cf.vss_1d(p[..., 0], 1.0, 0.5), ME1, SE1, np.array([[2.0]]), 1e-3)
    assert np.max(np.abs(r)) <= 1e-5


def test_printed_coefficient_fails_residual():
    y = np.array([[0.7], [1.5]])
    F = lambda p: cf.barenblatt_profile_1d(p[..., 0], 0.5, 1.0, coefficient=cf.printed_coefficient_1d(0.5))
    assert np.max(np.abs(cf.residual_stationary(F, ME1, SE1, y, 1e-3))) > 1e-2


def test_evolution_residual_1d():
    x = np.linspace(-5, 5, 11)
    U = lambda x, t: cf.barenblatt_solution_1d(x, t, 0.5, 1.0)
    assert np.max(np.abs(cf.residual_evolution_1d(U, 0.5, x, 1.5, 1e-3, 1e-4))) <= 1e-5
    V = lambda x, t: cf.vss_1d(x, t, 0.5)
    assert np.max(np.abs(cf.residual_evolution_1d(V, 0.5, np.array([2.0, 3.0]), 1.5, 1e-3, 1e-4))) <= 1e-5


def test_isotropic_exponent_resolution():
    me = validate_exponents(2, (0.5, 0.5))
    se = derive_similarity(me)
    rng = np.random.default_rng(0)
    y = rng.uniform(-3, 3, (20, 2))
    good = cf.residual_stationary(lambda p: cf.isotropic_profile(p, 0.5, 2, 1.0), me, se, y, 1e-3)
    bad = cf.residual_stationary(lambda p: cf.isotropic_profile(p, 0.5, 2, 1.0, power=-2 / 0.5), me, se, y, 1e-3)
    assert np.max(np.abs(good)) <= 1e-5
    assert np.max(np.abs(bad)) > 1e-2


def test_isotropic_n1_matches_1d_coefficient():
    # both normalisations coincide once the corrected 1D coefficient is used
    assert cf.isotropic_coefficient(0.5, 1) == pytest.approx(cf.barenblatt_coefficient_1d(0.5))


def test_isotropic_origin_and_radial():
    assert cf.isotropic_profile(np.zeros(3), 0.6, 3, 2.0) == pytest.approx(2.0 ** (-1 / 0.4))
    a = cf.isotropic_profile(np.array([1.0, 2.0]), 0.5, 2, 1.0)
    b = cf.isotropic_profile(np.array([math.sqrt(5.0), 0.0]), 0.5, 2, 1.0)
    assert a == pytest.approx(b)
    C = cf.isotropic_C_for_mass(0.5, 2, 2.0)
    assert cf.isotropic_mass(0.5, 2, C) == pytest.approx(2.0)


def test_constant_profile_residual_at_origin():
    me = validate_exponents(2, (0.8, 0.4))
    se = derive_similarity(me)
    r = cf.residual_stationary(lambda p: np.full(p.shape[:-1], 3.0), me, se, np.zeros((1, 2)), 1e-3)
    assert r[0] == pytest.approx(se.alpha * 3.0)


def test_partition_examples():
    cal = cf.surrogate_calibration(ME2)
    # corrected coefficient (1-m)/(2m(1+m)): C(0.8;1) = 14.4^5, C(0.4;1) = (28/15)^(5/3)
    assert cal.C[0] == pytest.approx(14.4**5, rel=1e-12)
    assert cal.C[1] == pytest.approx((28 / 15) ** (5 / 3), rel=1e-12)
    v = cf.partition_min(np.array([1.0, 1.0]), 1.0, ME2, SE2, cal)
    assert v == pytest.approx((28 / 15) ** (5 / 3))
    on_axis = cf.partition_min(np.array([2.0, 0.0]), 3.0, ME2, SE2, cal)
    assert on_axis == pytest.approx(cal.C[0] * 3.0**5 * 2.0 ** (-10))
    assert cf.vss_time_ratio(np.array([1.0, 1.0]), 1.0, ME2, SE2, cal) == pytest.approx(5 / 3)
    assert cf.vss_time_ratio(np.array([1.0, 0.0]), 1.0, ME2, SE2, cal) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        cf.partition_min(np.zeros(2), 1.0, ME2, SE2, cal)


@given(exponent_sets(), st.floats(0.01, 100.0), st.integers(0, 2**31))
def test_partition_homogeneity_and_fixed_point(me, k, seed):
    se = derive_similarity(me)
    cal = cf.surrogate_calibration(me)
    x = np.random.default_rng(seed).uniform(0.1, 5.0, (4, me.N))
    a = k * cf.partition_min(x * k ** np.asarray(se.gamma), 1.0, me, se, cal)
    np.testing.assert_allclose(a, cf.partition_min(x, 1.0, me, se, cal), rtol=1e-9)
    G = cf.mass_rescale(cf.partition_profile(me, se, cal), k, se)
    np.testing.assert_allclose(G(x), cf.partition_min(x, 1.0, me, se, cal), rtol=1e-9)


@given(exponent_sets(), st.integers(0, 2**31))
def test_time_ratio_range_and_sandwich(me, seed):
    se = derive_similarity(me)
    cal = cf.surrogate_calibration(me)
    rng = np.random.default_rng(seed)
    y = rng.uniform(0.05, 4.0, (5, me.N))
    r = cf.vss_time_ratio(y, rng.uniform(0.1, 10), me, se, cal)
    assert np.all(r >= min(se.mu) - 1e-12) and np.all(r <= max(se.mu) + 1e-12)
    terms = np.abs(y) ** (-2 * np.asarray(se.mu))
    s = cf.sandwich_bound(y, me, 1.0)
    assert np.all(terms.min(axis=-1) / me.N <= s * (1 + 1e-12))
    assert np.all(s <= terms.min(axis=-1) * (1 + 1e-12))


def test_sandwich_examples():
    assert cf.sandwich_bound(np.array([1.0, 1.0]), ME2, 1.0) == pytest.approx(0.5)
    assert cf.sandwich_bound(np.array([0.0, 2.0]), ME2, 3.0) == pytest.approx(3.0 * 2 ** (-10 / 3))


def test_mass_rescale_1d():
    F = lambda p: cf.barenblatt_profile_1d(p[..., 0], 0.5, 1.0)
    assert cf.mass_rescale(F, 1.0, SE1)(np.array([[0.7]]))[0] == pytest.approx(F(np.array([[0.7]]))[0])
    G = cf.mass_rescale(F, 2.0, SE1)
    m0 = quad(lambda y: F(np.array([y])), -np.inf, np.inf)[0]
    m1 = quad(lambda y: G(np.array([y])), -np.inf, np.inf)[0]
    assert m1 / m0 == pytest.approx(2**0.75, rel=1e-8)


def test_level_line():
    cal = cf.surrogate_calibration(ME2)
    x = cf.level_line(np.array([1.0, 0.0]), 7.0, ME2, SE2, cal)
    assert x[1] == 0.0
    assert cf.partition_min(x, 1.0, ME2, SE2, cal) == pytest.approx(7.0)
    x2 = cf.level_line(np.array([1.0, 0.0]), 7.0 * 3, ME2, SE2, cal)
    assert x2[0] / x[0] == pytest.approx(3 ** (-SE2.gamma[0]))
    me = validate_exponents(2, (0.9, 0.1))
    se = derive_similarity(me)
    c = cf.surrogate_calibration(me)
    w = np.array([0.6, 0.8])
    pts = np.array([cf.level_line(w, L, me, se, c) for L in (1.0, 10.0, 100.0)])
    slope = np.diff(np.log(pts[:, 1])) / np.diff(np.log(pts[:, 0]))
    np.testing.assert_allclose(slope, 9.0, rtol=1e-10)
    with pytest.raises(ValueError):
        cf.level_line(np.array([1.0, 1.0]), 1.0, ME2, SE2, cal)


def test_delayed_relative_error():
    me = validate_exponents(2, (0.5, 0.5))
    se = derive_similarity(me)
    cal = cf.surrogate_calibration(me)
    assert cf.delayed_relative_error(np.array([1.0, 0.0]), 1.0, 1.0, me, se, cal) == pytest.approx(3.0)
    x = np.array([0.0, 2.0])
    assert cf.delayed_relative_error(x, 2.0, 0.5, ME2, SE2, cf.surrogate_calibration(ME2)) == pytest.approx(((1 + 0.25) ** (5 / 3) - 1) / 0.5)
    t = 1e4
    v = cf.delayed_relative_error(np.array([1.0, 1.0]), t, t / 100, ME2, SE2, cf.surrogate_calibration(ME2)) * t
    assert v == pytest.approx(5 / 3, rel=0.01)
