import math

import numpy as np
import pytest
from hypothesis import given

from afde.grid import ScalarField, TensorGrid, mass
from afde.similarity import (
    ExponentError,
    RescaleMap,
    derive_similarity,
    from_selfsimilar,
    rescale_points,
    to_selfsimilar,
    validate_exponents,
)

from strategies import exponent_sets


def test_valid_anisotropic_pair():
    me = validate_exponents(2, (0.8, 0.4))
    assert me.mbar == pytest.approx(0.6)
    assert me.mcrit == 0.0


def test_h2_violation_reports_sum():
    with pytest.raises(ExponentError) as e:
        validate_exponents(3, (0.1, 0.2, 0.3))
    assert any("H2" in v and "0.6" in v for v in e.value.violations)


def test_h1_violation_names_axis():
    with pytest.raises(ExponentError) as e:
        validate_exponents(2, (1.2, 0.5))
    assert any("axis 1" in v for v in e.value.violations)


def test_all_violations_collected():
    with pytest.raises(ExponentError) as e:
        validate_exponents(3, (1.5, -0.2, -0.5))
    assert len(e.value.violations) == 4  # three H1 axes plus H2


@pytest.mark.parametrize("N,m", [(0, []), (2, [0.5])])
def test_shape_errors(N, m):
    with pytest.raises(ExponentError):
        validate_exponents(N, m)


def test_table_anisotropic():
    se = derive_similarity(validate_exponents(2, (0.8, 0.4)))
    assert se.alpha == pytest.approx(5 / 3, rel=1e-14)
    assert se.sigma == pytest.approx((0.4, 0.6), rel=1e-14)
    assert se.a == pytest.approx((2 / 3, 1.0), rel=1e-14)
    assert se.gamma == pytest.approx((0.1, 0.3), rel=1e-14)
    assert se.mu == pytest.approx((5.0, 5 / 3), rel=1e-14)
    assert se.beta == pytest.approx(0.6, rel=1e-14)
    assert se.alpha * (0.8 - 1) + 2 * se.a[0] == pytest.approx(1.0, rel=1e-14)


def test_isotropic_and_1d():
    se = derive_similarity(validate_exponents(2, (0.5, 0.5)))
    assert se.alpha == pytest.approx(2.0)
    assert se.sigma == pytest.approx((0.5, 0.5))
    se1 = derive_similarity(validate_exponents(1, (0.5,)))
    assert se1.alpha == pytest.approx(2 / 3)
    assert se1.sigma == pytest.approx((1.0,))


@given(exponent_sets())
def test_identities(me):
    se = derive_similarity(me)
    assert math.isclose(math.fsum(se.sigma), 1.0, rel_tol=1e-12)
    for mi, ai, si, gi, ui in zip(me.m, se.a, se.sigma, se.gamma, se.mu):
        assert math.isclose(se.alpha * (mi - 1) + 2 * ai, 1.0, rel_tol=1e-12)
        assert math.isclose(si - gi, 1 / (2 * se.alpha), rel_tol=1e-12, abs_tol=1e-13)
        assert ui > 1
    assert math.isclose(se.beta, 1 - math.fsum(se.gamma), rel_tol=1e-12)


def _field(N=2, n=8):
    g = TensorGrid.uniform(N, 2.0, n)
    rng = np.random.default_rng(1)
    return ScalarField(g, rng.random(g.shape), 0.0)


def test_selfsimilar_identity_at_unit_time():
    u = _field()
    se = derive_similarity(validate_exponents(2, (0.8, 0.4)))
    v, tau = to_selfsimilar(u.with_values(u.values, 1.0), RescaleMap(se))
    assert tau == 0.0
    assert np.array_equal(v.values, u.values)
    assert v.grid == u.grid


def test_selfsimilar_isotropic_e():
    u = _field()
    se = derive_similarity(validate_exponents(2, (0.5, 0.5)))
    u = u.with_values(u.values, math.e)
    v, tau = to_selfsimilar(u, RescaleMap(se))
    assert tau == pytest.approx(1.0)
    np.testing.assert_allclose(v.values, u.values * math.e**2, rtol=1e-14)
    np.testing.assert_allclose(v.grid.half_extent, np.array(u.grid.half_extent) / math.e, rtol=1e-14)
    back, t = from_selfsimilar(v, RescaleMap(se))
    assert t == pytest.approx(math.e)


@given(exponent_sets(max_dim=2))
def test_round_trip(me):
    se = derive_similarity(me)
    g = TensorGrid.uniform(me.N, 3.0, 6)
    u = ScalarField(g, np.linspace(0.1, 2.0, g.cells[0] ** me.N).reshape(g.shape), 2.5)
    rmap = RescaleMap(se, t0=0.3)
    v, _ = to_selfsimilar(u, rmap)
    w, t = from_selfsimilar(v, rmap)
    assert t == pytest.approx(2.5, rel=1e-12)
    np.testing.assert_allclose(w.values, u.values, rtol=1e-12)
    np.testing.assert_allclose(w.grid.half_extent, g.half_extent, rtol=1e-12)
    assert mass(v) == pytest.approx(mass(u), rel=1e-12)


def test_rescale_points_and_bad_shift():
    se = derive_similarity(validate_exponents(2, (0.8, 0.4)))
    y = rescale_points(np.array([[8.0, 8.0]]), 8.0, se)
    np.testing.assert_allclose(y, [[8.0 * 8 ** (-2 / 3), 1.0]])
    with pytest.raises(ValueError):
        RescaleMap(se, t0=-1.0)
