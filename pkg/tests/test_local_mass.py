import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp

from afde import closed_forms as cf
from afde.grid import Box, ScalarField, TensorGrid, sample
from afde.local_mass import (
    ProbeError,
    axis_factor,
    build_bump,
    bump_1d,
    bump_1d_d2,
    bump_1d_integral,
    compute_Y,
    default_flatness,
    flatness_ok,
    ode_mass_bound,
    renormalized_bound,
    verify_local_mass,
)
from afde.similarity import validate_exponents
from afde.solver import SolverConfig, solve_cauchy
from afde.verify import direct_Y

ME1 = validate_exponents(1, (0.5,))
ME2 = validate_exponents(2, (0.8, 0.4))


def test_bump_normalisation_and_flatness():
    box = Box((0.0, -1.0), (2.0, 3.0))
    probe, phi, _ = build_bump(box, ME2)
    assert phi(np.array([1.0, 1.0])) == pytest.approx(1.0)
    assert phi(np.array([0.0, 1.0])) == 0.0
    h = 1e-6
    # vanishing slope at the edge
    assert (phi(np.array([h, 1.0])) - phi(np.array([0.0, 1.0]))) / h < 1e-10


def test_flatness_rule():
    assert flatness_ok(4, 0.5)
    assert not flatness_ok(1.5, 0.5)
    # k(1-m) > 1 alone is not enough: k = 2.5, m = 0.5 gives 1.25 > 1 but <= 1 + m
    assert not flatness_ok(2.5, 0.5)
    with pytest.raises(ProbeError):
        build_bump(Box((0.0,), (1.0,)), ME1, k=(1.5,))
    for m in (0.05, 0.5, 0.8, 0.95):
        assert flatness_ok(default_flatness(m), m)


def test_bump_derivative_and_integral():
    t = np.linspace(0.05, 0.95, 19)
    h = 1e-4
    fd = (bump_1d(t + h, 4) - 2 * bump_1d(t, 4) + bump_1d(t - h, 4)) / h**2
    np.testing.assert_allclose(bump_1d_d2(t, 4), fd, rtol=1e-5, atol=1e-6)
    assert bump_1d_integral(4) == pytest.approx(quad(lambda s: bump_1d(s, 4), 0, 1)[0], rel=1e-12)


def test_axis_factor_against_quad():
    m, k = 0.5, 4.0
    f = lambda t: (bump_1d(t, k) ** (-m) * abs(bump_1d_d2(t, k))) ** (1 / (1 - m)) if 0 < t < 1 else 0.0
    ref = quad(f, 0, 1, points=[0.5], limit=200, epsabs=1e-13)[0]
    assert axis_factor(m, k, 128) == pytest.approx(ref, rel=1e-9)


def test_Y_self_validating_1d():
    Y, _ = compute_Y(Box((0.0,), (1.0,)), (4.0,), ME1)
    assert axis_factor(0.5, 4.0, 1024) == pytest.approx(Y[0], rel=1e-3)


def test_Y_symmetric_axes():
    me = validate_exponents(2, (0.6, 0.6))
    Y, _ = compute_Y(Box((0.0, 0.0), (2.0, 2.0)), (6.0, 6.0), me)
    assert Y[0] == pytest.approx(Y[1], rel=1e-12)


def test_Y_scaling_law_direct_quadrature():
    box = Box((0.0, 0.0), (1.0, 1.0))
    k = (default_flatness(0.8), default_flatness(0.4))
    h = (1 / 256, 1 / 256)
    Y0 = direct_Y(box, ME2, k, h)
    Y1 = direct_Y(Box((0.0, 0.0), (2.0, 1.0)), ME2, k, h)
    assert Y1[0] / Y0[0] == pytest.approx(2 * 2 ** (-2 / 0.2), rel=5e-3)
    assert Y1[1] / Y0[1] == pytest.approx(2.0, rel=5e-3)
    Yq, _ = compute_Y(box, k, ME2)
    np.testing.assert_allclose(Y0, Yq, rtol=5e-3)


def test_ode_bound_examples():
    assert ode_mass_bound(0.3, (0.0,), ME1, 5.0) == 0.3
    assert ode_mass_bound(0.0, (1.0,), ME1, 3.0) == pytest.approx(9 / 4, rel=1e-9)


def test_ode_bound_against_direct_integration():
    Y = (0.7, 2.0)
    sol = solve_ivp(lambda _, x: [0.7**0.2 * x[0] ** 0.8 + 2.0**0.6 * x[0] ** 0.4], (0, 1.5), [0.5], rtol=1e-12, atol=1e-14)
    assert ode_mass_bound(0.5, Y, ME2, 1.5) == pytest.approx(sol.y[0, -1], rel=1e-8)


@given(st.floats(0, 5), st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0.01, 3))
def test_ode_bound_monotone(X0, Y1, Y2, t):
    b = ode_mass_bound(X0, (Y1, Y2), ME2, t)
    assert ode_mass_bound(X0, (Y1, Y2), ME2, t * 1.5) >= b * (1 - 1e-9)
    assert ode_mass_bound(X0 + 0.1, (Y1, Y2), ME2, t) >= b * (1 - 1e-9)
    assert ode_mass_bound(X0, (Y1 * 2, Y2), ME2, t) >= b * (1 - 1e-9)


def test_zero_solution_report():
    g = TensorGrid.uniform(2, 3.0, 16)
    probe, phi, d2phi = build_bump(Box((0.0, 0.0), (1.0, 1.0)), ME2)
    tr = solve_cauchy(ScalarField(g, np.zeros(g.shape)), 0.1, ME2, SolverConfig(bc="reflecting", floor=1e-8, scheme="implicit"))
    rep = verify_local_mass(tr, probe, phi, d2phi, ME2)
    assert all(x == 0 for x in rep.X)
    assert rep.verdicts["below_ode_bound"] and rep.verdicts["holder"]


def test_barenblatt_probe_straddling_bulk():
    m, C = 0.5, 1.0
    g = TensorGrid((20.0,), (400,))

    def exact(p, t):
        return cf.barenblatt_solution_1d(p[..., 0], t, m, C)

    u0 = sample(lambda p: exact(p, 1.0), g, 1.0)
    tr = solve_cauchy(u0, 2.0, ME1, SolverConfig(bc="barrier-dirichlet", barrier=exact, snapshots=(1.25, 1.5, 1.75)))
    probe, phi, d2phi = build_bump(Box((-1.0,), (3.0,)), ME1)
    rep = verify_local_mass(tr, probe, phi, d2phi, ME1)
    assert all(mg > 0 for mg in rep.margin[1:])
    assert rep.verdicts["holder"]


def test_renormalized_envelope_mass_ladder():
    g = TensorGrid.uniform(2, 4.0, 32)
    box = Box((1.0, -1.0), (3.0, 1.0))
    probe, phi, d2phi = build_bump(box, ME2)
    P = g.points()
    for M in (1.0, 10.0, 100.0):
        b = np.clip(1 - np.sum(P**2, axis=-1) / 0.25, 0, None) ** 2
        u = ScalarField(g, b * M / (b.sum() * g.cell_volume))
        tr = solve_cauchy(u, 0.2, ME2, SolverConfig(bc="reflecting", scheme="implicit", dt_init=1e-4, snapshots=(0.05, 0.1)))
        rep = verify_local_mass(tr, probe, phi, d2phi, ME2)
        assert rep.verdicts["below_renormalized"]
    rb = renormalized_bound(0.0, probe, ME2)
    assert rb.Z0 == 1.0 and rb(0.0) == pytest.approx(1.0)


def test_probe_outside_grid():
    g = TensorGrid.uniform(1, 1.0, 8)
    probe, phi, d2phi = build_bump(Box((0.0,), (2.0,)), ME1)
    tr = solve_cauchy(ScalarField(g, np.ones(g.shape)), 0.01, ME1, SolverConfig(bc="reflecting"))
    with pytest.raises(ProbeError):
        verify_local_mass(tr, probe, phi, d2phi, ME1)
