"""Local mass control with flat product test functions.

For phi(x) = prod_i phi_i(x_i) supported in a box K and X(t) = int u phi dx,

    dX/dt = sum_i int u^{m_i} d_ii phi dx <= sum_i X^{m_i} Y_i^{1-m_i},
    Y_i = int_K (phi^{-m_i} |d_ii phi|)^{1/(1-m_i)} dx,

by Hölder with exponents (1/m_i, 1/(1-m_i)). The Y_i factorise over axes,
which gives Y_i = V(K) L_i^{-2/(1-m_i)} c_i with c_i independent of K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import beta as beta_fn

from .errors import NumericalFailure
from .grid import Box, ScalarField, TensorGrid
from .similarity import MediumExponents


class ProbeError(ValueError):
    pass


def default_flatness(m: float) -> float:
    return float(max(2, math.ceil(2.0 / (1.0 - m)) + 1))


def flatness_ok(k: float, m: float) -> bool:
    # t^{(k(1-m)-2)/(1-m)} near the edge is integrable iff k(1-m) > 1 + m
    return k >= 2.0 and k * (1.0 - m) > 1.0 + m


# ---------------------------------------------------------------------------
# 1D bump on [0, 1]: phi(t) = (4 t (1 - t))^k


def bump_1d(t, k: float):
    t = np.asarray(t, dtype=float)
    g = np.clip(4.0 * t * (1.0 - t), 0.0, None)
    return g**k


def bump_1d_d2(t, k: float):
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    g = np.where(inside, 4.0 * t * (1.0 - t), 1.0)
    dg = 4.0 - 8.0 * t
    val = k * (k - 1.0) * g ** (k - 2.0) * dg * dg - 8.0 * k * g ** (k - 1.0)
    return np.where(inside, val, 0.0)


def bump_1d_integral(k: float) -> float:
    return 4.0**k * beta_fn(k + 1.0, k + 1.0)


def _inflection(k: float) -> float:
    """Zero of phi'' in (0, 1/2)."""
    return brentq(lambda t: float(bump_1d_d2(t, k)), 1e-12, 0.5 - 1e-12, xtol=1e-15)


def _graded_gauss(f: Callable, a: float, b: float, n: int, q: int) -> float:
    """Gauss-Legendre on [a, b] after the sigmoidal map u -> u^q / (u^q + (1-u)^q),
    which clusters nodes at both ends and tames algebraic endpoint behaviour."""
    x, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    num = u**q
    den = u**q + (1.0 - u) ** q
    s = num / den
    ds = q * (u * (1.0 - u)) ** (q - 1) / den**2
    t = a + (b - a) * s
    return float(np.sum(wu * f(t) * ds) * (b - a))


def axis_factor(m: float, k: float, n: int = 64) -> float:
    """int_0^1 (phi^{-m} |phi''|)^{1/(1-m)} dt, split at the inflection points."""
    if not flatness_ok(k, m):
        raise ProbeError(f"k={k} with m={m} gives a divergent integral (need k >= 2 and k(1-m) > 1+m)")
    mu = 1.0 / (1.0 - m)

    def f(t):
        p = bump_1d(t, k)
        d2 = np.abs(bump_1d_d2(t, k))
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (p ** (-m) * d2) ** mu
        return np.where(p > 0, val, 0.0)

    r = _inflection(k)
    # endpoint exponent p = k - 2 mu > -1; grading q makes the mapped integrand smooth
    p_end = k - 2.0 * mu
    q = max(2, int(math.ceil(4.0 / (p_end + 1.0))))
    half = _graded_gauss(f, 0.0, r, n, q) + _graded_gauss(f, r, 0.5, n, max(q, 3))
    return 2.0 * half


# ---------------------------------------------------------------------------
# probe


@dataclass(frozen=True)
class LocalMassProbe:
    box: Box
    k: tuple[float, ...]
    Y: tuple[float, ...]
    volume: float
    axis_constants: tuple[float, ...] = field(default=())  # c_i in Y_i = V L_i^{-2 mu_i} c_i

    @property
    def lengths(self) -> tuple[float, ...]:
        return self.box.lengths


def compute_Y(box: Box, k: Sequence[float], me: MediumExponents, n: int = 64, rtol: float = 1e-3, max_n: int = 4096):
    """Y_i by tensorised quadrature; doubles the node count until two
    successive resolutions agree to ``rtol``. Returns (Y, c)."""
    L = box.lengths
    V = box.volume
    Y, c = [], []
    for i, mi in enumerate(me.m):
        nn = n
        prev = axis_factor(mi, k[i], nn)
        while True:
            nn *= 2
            cur = axis_factor(mi, k[i], nn)
            if abs(cur - prev) <= rtol * abs(cur):
                break
            if nn >= max_n:
                raise NumericalFailure(f"quadrature for Y_{i + 1} did not settle ({prev:.6g} vs {cur:.6g})")
            prev = cur
        others = math.prod(bump_1d_integral(k[j]) for j in range(me.N) if j != i)
        ci = cur * others
        mu = 1.0 / (1.0 - mi)
        c.append(ci)
        Y.append(V * L[i] ** (-2.0 * mu) * ci)
    return tuple(Y), tuple(c)


def build_bump(box: Box, me: MediumExponents, k: Optional[Sequence[float]] = None):
    """Return (probe, phi, d2phi) where phi and d2phi(points, axis) act on (..., N) arrays."""
    if len(box.lower) != me.N:
        raise ProbeError("box dimension does not match the exponents")
    k = tuple(default_flatness(mi) for mi in me.m) if k is None else tuple(float(v) for v in k)
    bad = [f"axis {i + 1}: k={ki} with m={mi} needs k >= 2 and k(1-m) > 1+m" for i, (ki, mi) in enumerate(zip(k, me.m)) if not flatness_ok(ki, mi)]
    if bad:
        raise ProbeError("; ".join(bad))
    lo = np.asarray(box.lower)
    L = np.asarray(box.lengths)

    def phi(x):
        t = (np.asarray(x, dtype=float) - lo) / L
        out = np.ones(t.shape[:-1])
        for i in range(me.N):
            out = out * bump_1d(t[..., i], k[i])
        return out

    def d2phi(x, axis: int):
        t = (np.asarray(x, dtype=float) - lo) / L
        out = bump_1d_d2(t[..., axis], k[axis]) / L[axis] ** 2
        for j in range(me.N):
            if j != axis:
                out = out * bump_1d(t[..., j], k[j])
        return out

    Y, c = compute_Y(box, k, me)
    probe = LocalMassProbe(box=box, k=k, Y=Y, volume=box.volume, axis_constants=c)
    return probe, phi, d2phi


# ---------------------------------------------------------------------------
# ODE bound


def ode_mass_bound(X0: float, Y: Sequence[float], me: MediumExponents, t: float) -> float:
    """Maximal solution at time t of X' = sum_i X^{m_i} Y_i^{1-m_i}, X(0) = X0.

    Integrated in w = X^{1-m_min}, whose right-hand side is bounded at w = 0,
    so the maximal branch is selected even when X0 = 0.
    """
    if X0 < 0 or t < 0:
        raise ValueError("need X0 >= 0 and t >= 0")
    m = me.as_array()
    Yv = np.asarray(Y, dtype=float)
    if t == 0 or np.all(Yv == 0):
        return float(X0)
    q = 1.0 - m.min()
    coef = Yv ** (1.0 - m)
    ex = (m - m.min()) / q

    def rhs(_, w):
        ww = max(w[0], 0.0)
        return [q * float(np.sum(coef * ww**ex))]

    sol = solve_ivp(rhs, (0.0, t), [X0**q], method="RK45", rtol=1e-12, atol=1e-14)
    if not sol.success:
        raise NumericalFailure(f"mass-bound ODE failed: {sol.message}")
    return float(max(sol.y[0, -1], 0.0) ** (1.0 / q))


def ode_mass_bound_series(X0: float, Y, me: MediumExponents, times: Sequence[float]) -> np.ndarray:
    return np.array([ode_mass_bound(X0, Y, me, t) for t in times])


@dataclass(frozen=True)
class RenormalizedBound:
    """Z(t)^{1-m1} = max(X~0, 1)^{1-m1} + (1-m1) D t bounds X~ = X / V(K) from above."""

    D: float
    m1: float
    Z0: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        q = 1.0 - self.m1
        return (self.Z0**q + q * self.D * t) ** (1.0 / q)


def renormalized_bound(X0: float, probe: LocalMassProbe, me: MediumExponents) -> RenormalizedBound:
    L = probe.lengths
    m = me.m
    D = math.fsum(ci ** (1.0 - mi) * Li ** (-2.0) for ci, mi, Li in zip(probe.axis_constants, m, L))
    return RenormalizedBound(D=D, m1=max(m), Z0=max(X0 / probe.volume, 1.0))


# ---------------------------------------------------------------------------
# checks on trajectories


def discrete_terms(u: ScalarField, probe: LocalMassProbe, phi, d2phi, me: MediumExponents):
    """X, sum_i int u^{m_i} d_ii phi and discrete Y_i on the field's own grid."""
    grid = u.grid
    pts = grid.points()
    w = grid.cell_volume
    p = phi(pts)
    X = float(np.sum(u.values * p) * w)
    lhs = 0.0
    Yd = []
    for i, mi in enumerate(me.m):
        d2 = d2phi(pts, i)
        lhs += float(np.sum(u.values**mi * d2) * w)
        mu = 1.0 / (1.0 - mi)
        with np.errstate(divide="ignore", invalid="ignore"):
            integrand = np.where(p > 0, (p ** (-mi) * np.abs(d2)) ** mu, 0.0)
        Yd.append(float(np.sum(integrand) * w))
    return X, lhs, tuple(Yd)


@dataclass
class LocalMassReport:
    times: list[float]
    X: list[float]
    bound: list[float]
    margin: list[float]
    holder_lhs: list[float]
    holder_rhs: list[float]
    holder_rhs_quadrature: list[float]
    renormalized: list[float]
    renormalized_D: float
    growth_exponent: Optional[float]
    growth_residual: Optional[float]
    growth_limit: float
    Y: tuple[float, ...]
    Y_discrete: tuple[float, ...]
    verdicts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_local_mass(traj, probe: LocalMassProbe, phi, d2phi, me: MediumExponents, tol: float = 1e-8) -> LocalMassReport:
    """Compare a trajectory's windowed mass with the ODE bound and check the
    Hölder step cell by cell (exact for the discrete sums)."""
    if not probe.box.inside(traj.fields[0].grid):
        raise ProbeError("probe box must lie inside the grid")
    t0 = traj.times[0]
    rows = [discrete_terms(f, probe, phi, d2phi, me) for f in traj.fields]
    X = [r[0] for r in rows]
    Yd = rows[0][2]
    lhs = [r[1] for r in rows]
    rhs = [math.fsum(x**mi * y ** (1 - mi) for mi, y in zip(me.m, Yd)) for x in X]
    rhs_q = [math.fsum(x**mi * y ** (1 - mi) for mi, y in zip(me.m, probe.Y)) for x in X]
    times = [t - t0 for t in traj.times]
    bound = list(ode_mass_bound_series(X[0], probe.Y, me, times))
    margin = [b - x for b, x in zip(bound, X)]
    rb = renormalized_bound(X[0], probe, me)
    Xt = [x / probe.volume for x in X]
    growth = growth_res = None
    pos = [(t, x) for t, x in zip(times, Xt) if t > 0 and x > 0]
    if len(pos) >= 3:
        lt = np.log([p[0] for p in pos])
        lx = np.log([p[1] for p in pos])
        A = np.vstack([lt, np.ones_like(lt)]).T
        coef, *_ = np.linalg.lstsq(A, lx, rcond=None)
        growth = float(coef[0])
        growth_res = float(np.sqrt(np.mean((A @ coef - lx) ** 2)))
    limit = 1.0 / (1.0 - max(me.m))
    rep = LocalMassReport(
        times=times,
        X=X,
        bound=bound,
        margin=margin,
        holder_lhs=lhs,
        holder_rhs=rhs,
        holder_rhs_quadrature=rhs_q,
        renormalized=[float(v) for v in rb(times)],
        renormalized_D=rb.D,
        growth_exponent=growth,
        growth_residual=growth_res,
        growth_limit=limit,
        Y=probe.Y,
        Y_discrete=Yd,
    )
    rep.verdicts = {
        "holder": all(a <= b + tol for a, b in zip(lhs, rhs)),
        "below_ode_bound": all(mg > 0 for mg in margin[1:]) and margin[0] >= 0,
        "below_renormalized": all(x <= z * (1 + 1e-12) for x, z in zip(Xt, rep.renormalized)),
        "growth_exponent": growth is None or growth <= 1.1 * limit,
    }
    return rep
