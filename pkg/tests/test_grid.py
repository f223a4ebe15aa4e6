import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scipy.integrate import quad

from afde import closed_forms as cf
from afde.grid import (
    Box,
    ScalarField,
    TensorGrid,
    box_weights,
    local_mass,
    lp_distance,
    lp_norm,
    mass,
    read_snapshot_csv,
    sample,
    second_difference,
    sup_norm,
    upwind_drift_divergence,
    write_snapshot_csv,
)


def test_grid_validation():
    with pytest.raises(ValueError):
        TensorGrid((1.0,), (5,))
    with pytest.raises(ValueError):
        TensorGrid((1.0, 1.0), (4,))
    with pytest.raises(ValueError):
        TensorGrid((-1.0,), (4,))


def test_no_cell_on_axis():
    g = TensorGrid((1.0, 2.0), (6, 8))
    assert not np.any(g.points() == 0.0)
    f = sample(lambda p: cf.vss_1d(p[..., 0], 1.0, 0.5), TensorGrid((3.0,), (10,)))
    assert np.all(np.isfinite(f.values))


def test_field_invariants():
    g = TensorGrid((1.0,), (4,))
    with pytest.raises(ValueError):
        ScalarField(g, np.array([1.0, -1.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        ScalarField(g, np.array([1.0, np.nan, 0.0, 0.0]))
    with pytest.raises(ValueError):
        ScalarField(g, np.ones(5))


@pytest.mark.parametrize("n", [4, 10, 64])
def test_norms_constant(n):
    g = TensorGrid.uniform(2, 1.0, n)
    u = sample(lambda p: np.ones(p.shape[:-1]), g)
    assert np.all(u.values == 1.0)
    assert mass(u) == pytest.approx(4.0)
    assert local_mass(u, Box((0.0, 0.0), (1.0, 1.0))) == pytest.approx(1.0)
    assert lp_norm(u, 2) == pytest.approx(2.0)
    assert sup_norm(u) == 1.0


def test_local_mass_partial_cells():
    g = TensorGrid.uniform(2, 1.0, 10)
    u = sample(lambda p: np.ones(p.shape[:-1]), g)
    assert local_mass(u, Box((-0.33, 0.01), (0.47, 0.5))) == pytest.approx(0.8 * 0.49)
    w = box_weights(g, Box((-2.0, -2.0), (2.0, 2.0)))
    np.testing.assert_allclose(w, 1.0, rtol=1e-14)


def test_sampled_barenblatt_mass_and_sup():
    errs = []
    for n in (200, 400):
        g = TensorGrid((40.0,), (n,))
        u = sample(lambda p: cf.barenblatt_profile_1d(p[..., 0], 0.5, 1.0), g)
        exact_box = quad(lambda y: cf.barenblatt_profile_1d(y, 0.5, 1.0), -40, 40, epsabs=1e-14)[0]
        errs.append(abs(mass(u) - exact_box))
        assert sup_norm(u) == pytest.approx(1.0, abs=g.spacing[0] ** 2)
    assert errs[0] / errs[1] > 3.0


def test_second_difference_exact_on_quadratics():
    g = TensorGrid((2.0, 1.0), (16, 8))
    P = g.points()
    h = g.spacing[0]
    lin = second_difference(3 * P[..., 0] + 1, 0, h)
    assert np.max(np.abs(lin[1:-1])) < 1e-10
    quad = second_difference(P[..., 0] ** 2, 0, h)
    np.testing.assert_allclose(quad[1:-1], 2.0, rtol=1e-10)


def test_second_difference_sine_order():
    errs = []
    for n in (64, 128):
        g = TensorGrid((3.0,), (n,))
        x = g.centers(0)
        d = second_difference(np.sin(x), 0, g.spacing[0])
        errs.append(np.max(np.abs(d[1:-1] + np.sin(x[1:-1]))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_upwind_divergence_properties():
    g = TensorGrid((3.0, 3.0), (12, 12))
    assert np.all(upwind_drift_divergence(np.zeros(g.shape), 0, g, 0.7) == 0)
    rng = np.random.default_rng(3)
    v = rng.random(g.shape)
    assert abs(np.sum(upwind_drift_divergence(v, 1, g, 0.7))) < 1e-12
    with pytest.raises(ValueError):
        upwind_drift_divergence(v, 0, g, -1.0)


def test_upwind_first_order():
    errs = []
    for n in (100, 200, 400):
        g = TensorGrid((4.0,), (n,))
        y = g.centers(0)
        v = np.exp(-y * y)
        exact = 0.5 * (1 - 2 * y * y) * np.exp(-y * y)
        errs.append(np.max(np.abs(upwind_drift_divergence(v, 0, g, 0.5) - exact)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 0.8) and np.all(rates < 1.3)


@given(st.integers(1, 2), st.integers(2, 5), st.floats(0.5, 3.0))
def test_lp_distance_triangle(N, half_n, L):
    g = TensorGrid.uniform(N, L, 2 * half_n)
    rng = np.random.default_rng(N * 100 + half_n)
    a, b, c = (ScalarField(g, rng.random(g.shape)) for _ in range(3))
    for p in (1.0, 2.0, np.inf):
        assert lp_distance(a, c, p) <= lp_distance(a, b, p) + lp_distance(b, c, p) + 1e-12
    assert lp_distance(a, a, 1.0) == 0.0


def test_snapshot_csv_round_trip(tmp_path):
    g = TensorGrid((1.0, 2.0), (4, 6))
    u = ScalarField(g, np.random.default_rng(0).random(g.shape) * 1e-7, 0.5)
    p = write_snapshot_csv(u, tmp_path / "s.csv")
    lines = p.read_text().splitlines()
    assert lines[0] == "x1,x2,u"
    assert len(lines) == 1 + 24
    v = read_snapshot_csv(p, g, 0.5)
    assert np.array_equal(v.values, u.values)
    with pytest.raises(ValueError):
        read_snapshot_csv(p, TensorGrid((1.0,), (4,)))
