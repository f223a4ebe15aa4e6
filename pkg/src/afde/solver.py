"""Time steppers for u_t = sum_i (u^{m_i})_{x_i x_i} and for its rescaled
(confined) form v_tau = sum_i [(v^{m_i})_{y_i y_i} + alpha sigma_i (y_i v)_{y_i}],
a Cauchy driver with diagnostics and a steady-state driver for the
fundamental profiles F_M.

Both equations are written in flux form on cell-centred grids. The explicit
scheme is monotone under :func:`stable_dt`; the linearly implicit scheme lags
the diffusivity u^{m-1} and solves M-matrix systems, which keeps it positive
and conservative for any step.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack
from scipy.sparse.linalg import spsolve

from .errors import ConfigError, NumericalFailure
from .grid import ScalarField, TensorGrid, mass, second_difference, sup_norm
from .similarity import MediumExponents, SimilarityExponents

log = logging.getLogger(__name__)

SCHEMES = ("explicit", "implicit")
BOUNDARIES = ("zero-dirichlet", "barrier-dirichlet", "reflecting")
DRIFTS = ("hybrid", "upwind")

# sampler(points (..., N), time) -> values (...)
Sampler = Callable[[np.ndarray, float], np.ndarray]


@dataclass
class SolverConfig:
    scheme: str = "explicit"
    floor: Optional[float] = None  # absolute; None -> floor_rel * initial sup
    floor_rel: float = 1e-8
    theta: float = 0.9
    bc: str = "barrier-dirichlet"
    barrier: Optional[Sampler] = field(default=None, repr=False, compare=False)
    snapshots: tuple[float, ...] = ()
    steady_tol: float = 1e-4
    max_steps: int = 2_000_000
    drift: str = "hybrid"
    dt_rel: float = 0.01  # implicit physical: dt <= dt_rel * t
    dt_init: float = 1e-4
    dt_max: float = math.inf
    split: bool = True  # implicit: axis splitting (tridiagonal) vs one sparse solve

    def __post_init__(self):
        errs = []
        if self.scheme not in SCHEMES:
            errs.append(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.bc not in BOUNDARIES:
            errs.append(f"bc must be one of {BOUNDARIES}, got {self.bc!r}")
        if self.drift not in DRIFTS:
            errs.append(f"drift must be one of {DRIFTS}, got {self.drift!r}")
        if not 0.0 < self.theta <= 1.0:
            errs.append(f"theta must lie in (0, 1], got {self.theta}")
        if self.floor is not None and self.floor < 0:
            errs.append("floor must be >= 0")
        if self.floor_rel < 0:
            errs.append("floor_rel must be >= 0")
        snaps = tuple(float(s) for s in self.snapshots)
        if any(b <= a for a, b in zip(snaps, snaps[1:])):
            errs.append("snapshot times must be strictly increasing")
        self.snapshots = snaps
        if errs:
            raise ConfigError("; ".join(errs), errs)

    def replace(self, **kw) -> "SolverConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "barrier"}
        d["snapshots"] = list(self.snapshots)
        d["barrier"] = None if self.barrier is None else getattr(self.barrier, "__name__", "custom")
        return d


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    fields: list[ScalarField] = field(default_factory=list)
    mass: list[float] = field(default_factory=list)
    sup: list[float] = field(default_factory=list)
    # accumulated int_0^t int |d_i u^{m_i}|^2 per axis, at each snapshot
    dissipation: list[list[float]] = field(default_factory=list)
    # int u^{m_i+1}/(m_i+1) per axis, at each snapshot
    energy: list[list[float]] = field(default_factory=list)
    dt_history: list[float] = field(default_factory=list)
    floor: float = 0.0
    steps: int = 0

    def record(self, u: ScalarField, me: MediumExponents, dissipation: np.ndarray):
        self.times.append(float(u.time))
        self.fields.append(u.copy())
        self.mass.append(mass(u))
        self.sup.append(sup_norm(u))
        self.dissipation.append([float(d) for d in dissipation])
        vol = u.grid.cell_volume
        self.energy.append([float(np.sum(u.values ** (mi + 1)) * vol / (mi + 1)) for mi in me.m])

    def diagnostics(self) -> dict:
        return {
            "time": list(self.times),
            "mass": list(self.mass),
            "sup": list(self.sup),
            "dissipation": [list(d) for d in self.dissipation],
            "energy": [list(e) for e in self.energy],
            "floor": self.floor,
            "steps": self.steps,
        }


# ---------------------------------------------------------------------------
# constitutive function and boundary data


def phi(u: np.ndarray, m: float, eps: float) -> np.ndarray:
    """u^m above the floor, its tangent line below it (C^1, slope m eps^{m-1})."""
    if eps <= 0.0:
        return np.power(np.maximum(u, 0.0), m)
    return np.where(
        u >= eps,
        np.power(np.maximum(u, eps), m),
        m * eps ** (m - 1.0) * (u - eps) + eps**m,
    )


def phi_prime(u: np.ndarray, m: float, eps: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return m * np.power(np.maximum(u, eps), m - 1.0)


def lagged_diffusivity(u: np.ndarray, m: float, eps: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.power(np.maximum(u, eps), m - 1.0)


@dataclass
class _Ghosts:
    """Ghost-layer u-values per axis and side; ``None`` marks a reflecting face."""

    layers: list[tuple[Optional[np.ndarray], Optional[np.ndarray]]]


def _ghosts(grid: TensorGrid, cfg: SolverConfig, t: float) -> _Ghosts:
    layers = []
    for i in range(grid.ndim):
        if cfg.bc == "reflecting":
            layers.append((None, None))
            continue
        pair = []
        for side in (0, 1):
            pts = grid.ghost_points(i, side)
            if cfg.bc == "zero-dirichlet":
                g = np.zeros(pts.shape[:-1])
            else:
                if cfg.barrier is None:
                    raise ConfigError("barrier-dirichlet needs a barrier sampler")
                g = np.asarray(cfg.barrier(pts, t), dtype=float)
                if not np.all(np.isfinite(g)) or np.any(g < 0):
                    raise NumericalFailure("barrier sampler returned invalid ghost values")
            pair.append(g)
        layers.append(tuple(pair))
    return _Ghosts(layers)


def resolve_floor(u: ScalarField, cfg: SolverConfig) -> float:
    if cfg.floor is not None:
        return float(cfg.floor)
    return float(cfg.floor_rel * sup_norm(u))


def _drift_coefficients(se: Optional[SimilarityExponents], N: int) -> np.ndarray:
    if se is None:
        return np.zeros(N)
    return se.alpha * np.asarray(se.sigma)


# ---------------------------------------------------------------------------
# stability


def stable_dt(
    u: ScalarField,
    me: MediumExponents,
    cfg: SolverConfig,
    se: Optional[SimilarityExponents] = None,
    floor: Optional[float] = None,
) -> float:
    """Largest explicit step keeping the update a convex combination.

    dt = theta / sum_i (2 s_i / h_i^2 + c_i L_i / h_i) with
    s_i = max_cells m_i max(u, eps)^{m_i - 1} and drift c_i = alpha sigma_i
    (zero for the physical equation).
    """
    eps = resolve_floor(u, cfg) if floor is None else floor
    umin = float(u.values.min())
    if eps <= 0.0 and umin <= 0.0:
        raise ConfigError("explicit scheme with zero floor and a vanishing cell has unbounded diffusivity")
    grid = u.grid
    c = _drift_coefficients(se, grid.ndim)
    rate = 0.0
    base = max(umin, eps)
    for i, mi in enumerate(me.m):
        s_i = mi * base ** (mi - 1.0)
        h = grid.spacing[i]
        rate += 2.0 * s_i / h**2 + c[i] * grid.half_extent[i] / h
    return cfg.theta / rate


# ---------------------------------------------------------------------------
# explicit fluxes


def _face_drift(vL, vR, a, DL, DR, h, mode):
    """Drift flux a * v_face, upwind or (where monotone) centred."""
    up = np.where(a > 0, a * vL, a * vR)
    if mode == "upwind":
        return up
    ok = (DL / h + 0.5 * a >= 0) & (DR / h - 0.5 * a >= 0)
    return np.where(ok, 0.5 * a * (vL + vR), up)


def _explicit_rhs(vals, grid, me, c, eps, ghosts: _Ghosts, mode, dissipation=None, dt=0.0):
    rhs = np.zeros_like(vals)
    for i, mi in enumerate(me.m):
        lo, hi = ghosts.layers[i]
        w = phi(vals, mi, eps)
        h = grid.spacing[i]
        glo = None if lo is None else phi(lo, mi, eps)
        ghi = None if hi is None else phi(hi, mi, eps)
        rhs += second_difference(w, i, h, glo, ghi)
        if dissipation is not None:
            gw = np.diff(w, axis=i) / h
            dissipation[i] += dt * float(np.sum(gw * gw)) * grid.cell_volume
        if c[i] > 0:
            rhs += _drift_divergence(vals, i, grid, c[i], lo, hi, mi, eps, mode)
    return rhs


def _drift_divergence(vals, axis, grid, c, lo, hi, m, eps, mode):
    """Conservative c d_i(y_i v) with faces upwinded or centred (hybrid)."""
    h = grid.spacing[axis]
    n = vals.shape[axis]
    edge_lo = np.take(vals, [0], axis=axis)
    edge_hi = np.take(vals, [-1], axis=axis)
    vp = np.concatenate(
        [edge_lo if lo is None else lo.reshape(edge_lo.shape), vals, edge_hi if hi is None else hi.reshape(edge_hi.shape)],
        axis=axis,
    )
    vL = np.take(vp, range(0, n + 1), axis=axis)
    vR = np.take(vp, range(1, n + 2), axis=axis)
    shape = [1] * vals.ndim
    shape[axis] = -1
    a = (-c * grid.faces(axis)).reshape(shape)
    J = _face_drift(vL, vR, a, phi_prime(vL, m, eps), phi_prime(vR, m, eps), h, mode)
    # v_tau gains -(J_{j+1/2} - J_{j-1/2}) / h
    if lo is None:
        idx = [slice(None)] * vals.ndim
        idx[axis] = 0
        J[tuple(idx)] = 0.0
    if hi is None:
        idx = [slice(None)] * vals.ndim
        idx[axis] = -1
        J[tuple(idx)] = 0.0
    return -np.diff(J, axis=axis) / h


# ---------------------------------------------------------------------------
# implicit operator assembly


def _axis_faces(vals, axis, grid, m, c, eps, lo, hi, mode):
    """Face coefficients (A, B) with flux J_f = A v_left - B v_right.

    Returned arrays have ``n+1`` entries along ``axis``; reflecting boundary
    faces are zeroed. Also returns the padded values (ghosts included).
    """
    h = grid.spacing[axis]
    n = vals.shape[axis]
    edge_lo = np.take(vals, [0], axis=axis)
    edge_hi = np.take(vals, [-1], axis=axis)
    vp = np.concatenate(
        [edge_lo if lo is None else lo.reshape(edge_lo.shape), vals, edge_hi if hi is None else hi.reshape(edge_hi.shape)],
        axis=axis,
    )
    D = lagged_diffusivity(vp, m, eps)
    DL = np.take(D, range(0, n + 1), axis=axis)
    DR = np.take(D, range(1, n + 2), axis=axis)
    A = DL / h
    B = DR / h
    if c > 0:
        shape = [1] * vals.ndim
        shape[axis] = -1
        a = (-c * grid.faces(axis)).reshape(shape)
        if mode == "hybrid":
            ok = (m * DL / h + 0.5 * a >= 0) & (m * DR / h - 0.5 * a >= 0)
        else:
            ok = np.zeros(np.broadcast(DL, a).shape, dtype=bool)
        A = A + np.where(ok, 0.5 * a, np.maximum(a, 0.0))
        B = B + np.where(ok, -0.5 * a, np.maximum(-a, 0.0))
    A = np.array(np.broadcast_to(A, DL.shape))
    B = np.array(np.broadcast_to(B, DL.shape))
    idx0 = [slice(None)] * vals.ndim
    idx0[axis] = 0
    idxn = [slice(None)] * vals.ndim
    idxn[axis] = -1
    if lo is None:
        A[tuple(idx0)] = 0.0
        B[tuple(idx0)] = 0.0
    if hi is None:
        A[tuple(idxn)] = 0.0
        B[tuple(idxn)] = 0.0
    return A, B, vp


def _axis_tridiagonal(A, B, vp, axis, h, lo, hi):
    """Sub/main/super diagonals and boundary source of the axis operator L_i.

    (L v)_j = [A_{j-1/2} v_{j-1} - (B_{j-1/2} + A_{j+1/2}) v_j + B_{j+1/2} v_{j+1}] / h
    """
    n = vp.shape[axis] - 2
    Am = np.take(A, range(0, n), axis=axis)  # face j-1/2
    Bm = np.take(B, range(0, n), axis=axis)
    Ap = np.take(A, range(1, n + 1), axis=axis)  # face j+1/2
    Bp = np.take(B, range(1, n + 1), axis=axis)
    sub = Am / h
    diag = -(Bm + Ap) / h
    sup_ = Bp / h
    src = np.zeros(diag.shape)
    idx0 = [slice(None)] * diag.ndim
    idx0[axis] = slice(0, 1)
    idxn = [slice(None)] * diag.ndim
    idxn[axis] = slice(n - 1, n)
    if lo is not None:
        src[tuple(idx0)] += (np.take(A, [0], axis=axis) * np.take(vp, [0], axis=axis)) / h
    if hi is not None:
        src[tuple(idxn)] += (np.take(B, [n], axis=axis) * np.take(vp, [n + 1], axis=axis)) / h
    return sub, diag, sup_, src


def _solve_lines(sub, diag, sup_, rhs, axis):
    """Solve independent tridiagonal systems along ``axis`` in one LAPACK call."""
    moved = [np.moveaxis(a, axis, -1) for a in (sub, diag, sup_, rhs)]
    shape = moved[3].shape
    n = shape[-1]
    s, d, u, b = (np.ascontiguousarray(a).reshape(-1, n) for a in moved)
    dl = s[:, 1:].copy()
    du = u[:, :-1].copy()
    # decouple consecutive lines
    dl = np.concatenate([dl, np.zeros((dl.shape[0], 1))], axis=1).reshape(-1)[:-1]
    du = np.concatenate([du, np.zeros((du.shape[0], 1))], axis=1).reshape(-1)[:-1]
    _, _, _, x, info = lapack.dgtsv(dl, d.reshape(-1).copy(), du, b.reshape(-1).copy())
    if info != 0:
        raise NumericalFailure(f"tridiagonal solve failed (info={info})")
    return np.moveaxis(x.reshape(shape), -1, axis)


def _assemble_sparse(vals, grid, me, c, eps, ghosts: _Ghosts, mode):
    """Full operator L (CSR) and boundary source s such that dv/dt = L v + s."""
    size = vals.size
    diag_total = np.zeros(vals.shape)
    src_total = np.zeros(vals.shape)
    offs_data = []
    strides = np.cumprod((1,) + tuple(reversed(grid.shape)))[:-1][::-1]
    for i, mi in enumerate(me.m):
        lo, hi = ghosts.layers[i]
        A, B, vp = _axis_faces(vals, i, grid, mi, c[i], eps, lo, hi, mode)
        sub, diag, sup_, src = _axis_tridiagonal(A, B, vp, i, grid.spacing[i], lo, hi)
        diag_total += diag
        src_total += src
        stride = int(strides[i])
        # entry (j, j - stride) = sub_j, valid where index along axis > 0
        lower = np.array(sub)
        upper = np.array(sup_)
        idx0 = [slice(None)] * vals.ndim
        idx0[i] = 0
        lower[tuple(idx0)] = 0.0
        idxn = [slice(None)] * vals.ndim
        idxn[i] = -1
        upper[tuple(idxn)] = 0.0
        offs_data.append((-stride, lower.reshape(-1)[stride:]))
        offs_data.append((stride, upper.reshape(-1)[:-stride]))
    diags = [diag_total.reshape(-1)] + [d for _, d in offs_data]
    offsets = [0] + [o for o, _ in offs_data]
    L = sp.diags(diags, offsets, shape=(size, size), format="csc")
    return L, src_total


# ---------------------------------------------------------------------------
# single steps


def _step(u: ScalarField, dt: float, me, cfg: SolverConfig, se, eps: float, dissipation=None) -> ScalarField:
    grid = u.grid
    c = _drift_coefficients(se, grid.ndim)
    t = u.time
    vals = u.values
    if cfg.scheme == "explicit":
        ghosts = _ghosts(grid, cfg, t)
        new = vals + dt * _explicit_rhs(vals, grid, me, c, eps, ghosts, cfg.drift, dissipation, dt)
    elif cfg.split:
        new = vals
        ghosts = _ghosts(grid, cfg, t + dt)
        for i, mi in enumerate(me.m):
            lo, hi = ghosts.layers[i]
            A, B, vp = _axis_faces(new, i, grid, mi, c[i], eps, lo, hi, cfg.drift)
            sub, diag, sup_, src = _axis_tridiagonal(A, B, vp, i, grid.spacing[i], lo, hi)
            new = _solve_lines(-dt * sub, 1.0 - dt * diag, -dt * sup_, new + dt * src, i)
        if dissipation is not None:
            for i, mi in enumerate(me.m):
                gw = np.diff(phi(new, mi, eps), axis=i) / grid.spacing[i]
                dissipation[i] += dt * float(np.sum(gw * gw)) * grid.cell_volume
    else:
        ghosts = _ghosts(grid, cfg, t + dt)
        L, src = _assemble_sparse(vals, grid, me, c, eps, ghosts, cfg.drift)
        M = sp.identity(vals.size, format="csc") - dt * L
        new = spsolve(M, (vals + dt * src).reshape(-1)).reshape(vals.shape)
        if dissipation is not None:
            for i, mi in enumerate(me.m):
                gw = np.diff(phi(new, mi, eps), axis=i) / grid.spacing[i]
                dissipation[i] += dt * float(np.sum(gw * gw)) * grid.cell_volume
    if not np.all(np.isfinite(new)):
        raise NumericalFailure(f"non-finite values after step at t={t}")
    low = new.min()
    scale = max(float(np.abs(new).max()), 1e-300)
    if low < -1e-9 * scale:
        raise NumericalFailure(f"negative values ({low:.3e}) after step at t={t}; step too large")
    return ScalarField(grid, np.maximum(new, 0.0), t + dt)


def step_physical(u: ScalarField, dt: float, me: MediumExponents, cfg: SolverConfig, floor: Optional[float] = None) -> ScalarField:
    """One step of u_t = sum_i (u^{m_i})_{ii} (boundary data taken from ``cfg``)."""
    eps = resolve_floor(u, cfg) if floor is None else floor
    return _step(u, dt, me, cfg, None, eps)


def step_rescaled(
    v: ScalarField, dtau: float, me: MediumExponents, se: SimilarityExponents, cfg: SolverConfig, floor: Optional[float] = None
) -> ScalarField:
    """One step of the rescaled equation; ``v.time`` is tau."""
    eps = resolve_floor(v, cfg) if floor is None else floor
    return _step(v, dtau, me, cfg, se, eps)


# ---------------------------------------------------------------------------
# drivers


def _march(
    fields: Sequence[ScalarField],
    t_end: float,
    me: MediumExponents,
    cfg: SolverConfig,
    se: Optional[SimilarityExponents],
    floor: Optional[float] = None,
) -> list[Trajectory]:
    """Advance several fields with a common step sequence (needed for
    pairwise comparison and contraction checks)."""
    fields = [f.copy() for f in fields]
    t0 = fields[0].time
    if any(f.time != t0 or f.grid != fields[0].grid for f in fields):
        raise ConfigError("fields must share grid and start time")
    if cfg.floor is not None:
        eps = float(cfg.floor)
    elif floor is not None:
        eps = float(floor)
    else:
        eps = cfg.floor_rel * max(sup_norm(f) for f in fields)
    snaps = [s for s in cfg.snapshots if t0 < s <= t_end]
    if not snaps or snaps[-1] < t_end:
        snaps.append(t_end)
    trajs = [Trajectory(floor=eps) for _ in fields]
    diss = [np.zeros(me.N) for _ in fields]
    for tr, f, d in zip(trajs, fields, diss):
        tr.record(f, me, d)
    t = t0
    steps = 0
    k = 0
    while k < len(snaps):
        target = snaps[k]
        if cfg.scheme == "explicit":
            dt = min(stable_dt(f, me, cfg, se, eps) for f in fields)
        else:
            ref = abs(t) if se is None else 1.0
            dt = min(max(cfg.dt_rel * ref, cfg.dt_init), cfg.dt_max)
        dt = min(dt, cfg.dt_max)
        last = t + dt >= target * (1 - 1e-12) or target - (t + dt) < 1e-9 * max(abs(target), 1.0)
        if last:
            dt = target - t
        fields = [_step(f, dt, me, cfg, se, eps, d) for f, d in zip(fields, diss)]
        if last:
            for f in fields:
                f.time = target
        t = fields[0].time
        steps += 1
        for tr in trajs:
            tr.dt_history.append(dt)
        if steps > cfg.max_steps:
            raise NumericalFailure(f"max_steps={cfg.max_steps} exceeded at t={t}")
        if last:
            for tr, f, d in zip(trajs, fields, diss):
                tr.record(f, me, d)
            k += 1
    for tr in trajs:
        tr.steps = steps
    return trajs


def solve_cauchy(u0: ScalarField, t_end: float, me: MediumExponents, cfg: SolverConfig) -> Trajectory:
    """Adaptive stepping of the physical equation from ``u0.time`` to ``t_end``."""
    if not t_end > u0.time:
        raise ConfigError("t_end must exceed the initial time")
    return _march([u0], t_end, me, cfg, None)[0]


def solve_cauchy_many(fields: Sequence[ScalarField], t_end: float, me: MediumExponents, cfg: SolverConfig) -> list[Trajectory]:
    return _march(fields, t_end, me, cfg, None)


def evolve_rescaled(
    v0: ScalarField, tau_end: float, me: MediumExponents, se: SimilarityExponents, cfg: SolverConfig, floor: Optional[float] = None
) -> Trajectory:
    """Rescaled-equation driver; times in the trajectory are tau values."""
    return _march([v0], tau_end, me, cfg, se, floor)[0]


def evolve_rescaled_many(fields, tau_end, me, se, cfg, floor=None) -> list[Trajectory]:
    return _march(fields, tau_end, me, cfg, se, floor)


# ---------------------------------------------------------------------------
# steady profiles


@dataclass
class ProfileResult:
    profile: ScalarField
    mass: float
    increment: float  # L1 change per unit tau, relative
    residual: float  # ||L(F)F + s||_1 / ||F||_1
    iterations: int
    tau: float
    ssni_violation: float  # max increase along positive semi-axes / sup
    symmetry_defect: float  # before symmetrisation, relative to sup


def delta_datum(grid: TensorGrid, M: float) -> ScalarField:
    """Mass M spread over the 2^N cells around the origin."""
    vals = np.zeros(grid.shape)
    idx = tuple(slice(n // 2 - 1, n // 2 + 1) for n in grid.shape)
    vals[idx] = M / (2**grid.ndim * grid.cell_volume)
    return ScalarField(grid, vals, 0.0)


def symmetrize(vals: np.ndarray) -> np.ndarray:
    out = vals.copy()
    for axis in range(vals.ndim):
        out = 0.5 * (out + np.flip(out, axis=axis))
    return out


def ssni_violation(vals: np.ndarray) -> float:
    """Largest increase along any positive semi-axis direction, relative to sup."""
    worst = 0.0
    for axis in range(vals.ndim):
        n = vals.shape[axis]
        half = np.take(vals, range(n // 2, n), axis=axis)
        inc = np.diff(half, axis=axis)
        worst = max(worst, float(inc.max(initial=0.0)))
    return worst / float(vals.max())


def steady_residual(F: ScalarField, me, se, cfg: SolverConfig, eps: float) -> float:
    c = _drift_coefficients(se, F.grid.ndim)
    ghosts = _ghosts(F.grid, cfg, 0.0)
    r = _explicit_rhs(F.values, F.grid, me, c, eps, ghosts, cfg.drift)
    return float(np.sum(np.abs(r)) / np.sum(F.values))


def solve_profile(
    M: float,
    me: MediumExponents,
    se: SimilarityExponents,
    cfg: SolverConfig,
    grid: TensorGrid,
    initial: Optional[ScalarField] = None,
    dtau0: float = 0.05,
    dtau_max: float = 0.5,
) -> ProfileResult:
    """Steady state of the rescaled equation with mass M (pseudo-time marching).

    Uses the linearly implicit scheme without splitting, whose fixed points are
    exactly the discrete steady states. Converged when the relative L1 change
    per unit tau and the steady residual both drop below ``cfg.steady_tol``.
    """
    if not M > 0:
        raise ConfigError("profile mass must be positive")
    run = cfg.replace(scheme="implicit", split=False)
    v = delta_datum(grid, M) if initial is None else initial.copy()
    if initial is not None:
        v = v.with_values(v.values * (M / mass(v)))
    eps = float(cfg.floor) if cfg.floor is not None else cfg.floor_rel * sup_norm(v)
    c = _drift_coefficients(se, grid.ndim)
    ghosts = _ghosts(grid, run, 0.0)
    dtau = dtau0
    tau = 0.0
    incr = prev = math.inf
    res = math.inf
    it = 0
    for it in range(1, cfg.max_steps + 1):
        L, src = _assemble_sparse(v.values, grid, me, c, eps, ghosts, run.drift)
        Mx = sp.identity(v.values.size, format="csc") - dtau * L
        new = spsolve(Mx, (v.values + dtau * src).reshape(-1)).reshape(grid.shape)
        if not np.all(np.isfinite(new)) or not np.sum(new) > 0:
            raise NumericalFailure(f"profile iteration {it} produced non-finite or vanishing values")
        new = np.maximum(new, 0.0)
        incr = float(np.sum(np.abs(new - v.values)) / (dtau * np.sum(new)))
        v = ScalarField(grid, new, tau + dtau)
        tau += dtau
        log.debug("profile iter %d tau=%.3f dtau=%.3g increment=%.3e", it, tau, dtau, incr)
        if incr <= cfg.steady_tol:
            res = steady_residual(v, me, se, run, eps)
            if res <= cfg.steady_tol:
                break
        # the lagged-diffusivity iteration can cycle at large pseudo-steps
        dtau = max(0.5 * dtau, dtau0) if incr > prev else min(dtau * 1.25, dtau_max)
        prev = incr
    else:
        raise NumericalFailure(f"profile did not converge in {cfg.max_steps} iterations (increment {incr:.3e})")
    raw = v.values
    sym = symmetrize(raw)
    defect = float(np.max(np.abs(raw - sym)) / raw.max())
    F = ScalarField(grid, sym, tau)
    return ProfileResult(
        profile=F,
        mass=mass(F),
        increment=incr,
        residual=steady_residual(F, me, se, run, eps),
        iterations=it,
        tau=tau,
        ssni_violation=ssni_violation(sym),
        symmetry_defect=defect,
    )
