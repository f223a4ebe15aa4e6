"""Experiments: smoothing and spreading exponents, profile tails and the
mass-ladder collapse, global Harnack bounds, relative-error convergence,
L^p rates, semigroup properties and the local mass bound.

Runs that follow a solution over a decade in time are done in self-similar
variables on a fixed y-grid, i.e. on a physical mesh that expands like
t^{sigma_i alpha}. The observables are mapped back exactly:
sup u = s^{-alpha} sup v, widths_u = s^{a_i} widths_v, u / U_M = v / F_M and
t^{(p-1)alpha/p} ||u - U_M||_p = ||v - F_M||_p.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import __version__
from . import closed_forms as cf
from .errors import ConfigError
from .grid import Box, ScalarField, TensorGrid, box_weights, mass, sample, sup_norm
from .local_mass import build_bump, verify_local_mass
from .similarity import MediumExponents, SimilarityExponents, derive_similarity, validate_exponents
from .solver import (
    SolverConfig,
    evolve_rescaled,
    solve_cauchy,
    solve_cauchy_many,
    solve_profile,
)

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# reports and fits


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    intercept: float
    residual: float
    window: tuple[float, float]
    points: int

    def to_dict(self) -> dict:
        return {**dataclasses.asdict(self), "window": list(self.window)}

    @classmethod
    def from_dict(cls, d: dict) -> "PowerLawFit":
        return cls(d["exponent"], d["intercept"], d["residual"], tuple(d["window"]), d["points"])


class FitError(ValueError):
    pass


def fit_power_law(x, y, window: Optional[tuple[float, float]] = None) -> PowerLawFit:
    """Least squares of log y on log x; residual is the RMS misfit in log space."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise FitError("x and y differ in length")
    if window is not None:
        keep = (x >= window[0] * (1 - 1e-12)) & (x <= window[1] * (1 + 1e-12))
        x, y = x[keep], y[keep]
    if len(x) < 5:
        raise FitError(f"need at least 5 points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitError("power-law fits need positive data")
    if x.max() / x.min() < 4.0 - 1e-12:
        raise FitError("fit window must span at least a factor 4")
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = float(np.sqrt(np.mean((A @ coef - ly) ** 2)))
    return PowerLawFit(float(coef[0]), float(coef[1]), res, (float(x.min()), float(x.max())), int(len(x)))


@dataclass
class Verdict:
    passed: bool
    measured: object
    threshold: object
    note: str = ""

    def to_dict(self) -> dict:
        return {"passed": bool(self.passed), "measured": _jsonable(self.measured), "threshold": _jsonable(self.threshold), "note": self.note}


@dataclass
class ExperimentReport:
    name: str
    params: dict
    series: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts.values())

    def verdict(self, key: str, passed: bool, measured, threshold, note: str = "") -> None:
        self.verdicts[key] = Verdict(bool(passed), measured, threshold, note)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "artifact_version": __version__,
            "name": self.name,
            "params": _jsonable(self.params),
            "series": _jsonable(self.series),
            "fits": {k: f.to_dict() for k, f in self.fits.items()},
            "verdicts": {k: v.to_dict() for k, v in self.verdicts.items()},
            "provenance": _jsonable(self.provenance),
            "passed": self.passed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema_version')!r}")
        rep = cls(d["name"], d["params"], d["series"], provenance=d.get("provenance", {}))
        rep.fits = {k: PowerLawFit.from_dict(v) for k, v in d["fits"].items()}
        rep.verdicts = {k: Verdict(v["passed"], v["measured"], v["threshold"], v.get("note", "")) for k, v in d["verdicts"].items()}
        return rep


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _fit_verdict(rep: ExperimentReport, key: str, fit: PowerLawFit, target: float, rel_tol: float, max_residual: float = 0.05):
    err = abs(fit.exponent - target) / abs(target)
    rep.fits[key] = fit
    rep.verdict(
        key,
        err <= rel_tol and fit.residual < max_residual,
        {"exponent": fit.exponent, "relative_error": err, "residual": fit.residual},
        {"target": target, "rel_tol": rel_tol, "max_residual": max_residual},
    )


# ---------------------------------------------------------------------------
# shared helpers


def half_mass_width(v: ScalarField, axis: int) -> float:
    """Half-length of the smallest centred interval holding half the mass of
    the axis marginal (linear interpolation inside the crossing cell)."""
    grid = v.grid
    other = tuple(j for j in range(grid.ndim) if j != axis)
    marg = v.values.sum(axis=other) if other else v.values
    n = len(marg)
    sym = marg[n // 2 :] + marg[: n // 2][::-1]
    cum = np.cumsum(sym) / sym.sum()
    j = int(np.searchsorted(cum, 0.5))
    prev = cum[j - 1] if j > 0 else 0.0
    return float((j + (0.5 - prev) / (cum[j] - prev)) * grid.spacing[axis])


def _exponents(m: Sequence[float]) -> tuple[MediumExponents, SimilarityExponents]:
    me = validate_exponents(len(m), m)
    return me, derive_similarity(me)


def _log_interpolator(F: ScalarField):
    axes = [F.grid.centers(i) for i in range(F.grid.ndim)]
    I = RegularGridInterpolator(axes, np.log(F.values), method="cubic", bounds_error=False, fill_value=None)
    return lambda y: np.exp(I(y))


def quasi_radius(y: np.ndarray, se: SimilarityExponents) -> np.ndarray:
    """S(y) = sum_i |y_i|^{2 mu_i}; the mass rescaling multiplies it by k."""
    return np.sum(np.abs(y) ** (2.0 * np.asarray(se.mu)), axis=-1)


# ---------------------------------------------------------------------------
# smoothing and spreading


@dataclass
class SmoothingConfig:
    m: tuple[float, ...] = (0.8, 0.4)
    half_extent: tuple[float, ...] = (8.0, 16.0)
    cells: tuple[int, ...] = (256, 256)
    mass: float = 1.0
    box_side: float = 0.25
    t_shift: float = 0.01  # data sit at t = 0, the run starts at s = t + t_shift
    t_window: tuple[float, float] = (1.0, 10.0)
    snapshots: int = 11
    dtau: float = 0.01
    frame: str = "rescaled"  # or "physical"
    floor_rel: float = 1e-8
    sup_tol: float = 0.05
    width_tol: float = 0.07


def _box_data(grid: TensorGrid, side: float, M: float, scale: np.ndarray) -> np.ndarray:
    """Uniform data of mass M on |x_i| < side/2, sampled on the grid y = x / scale."""
    half = 0.5 * side / scale
    b = Box(tuple(-half), tuple(half))
    if not b.inside(grid):
        raise ConfigError("initial box does not fit in the grid; reduce box_side or raise t_shift")
    w = box_weights(grid, b)
    return w * M / (np.sum(w) * grid.cell_volume)


def exp_smoothing_and_spread(cfg: SmoothingConfig) -> ExperimentReport:
    t_start = time.perf_counter()
    me, se = _exponents(cfg.m)
    grid = TensorGrid(cfg.half_extent, cfg.cells)
    ts = np.geomspace(cfg.t_window[0], cfg.t_window[1], cfg.snapshots)
    rep = ExperimentReport("smoothing", dataclasses.asdict(cfg))
    a = np.asarray(se.a)
    if cfg.frame == "rescaled":
        s0 = cfg.t_shift
        # the similarity map preserves mass, so v0 is the box density on the y-grid
        vals = _box_data(grid, cfg.box_side, cfg.mass, s0**a)
        v0 = ScalarField(grid, vals, math.log(s0))
        taus = tuple(np.log(ts + cfg.t_shift))
        scfg = SolverConfig(scheme="implicit", bc="reflecting", snapshots=taus, dt_rel=cfg.dtau, dt_init=cfg.dtau, floor_rel=cfg.floor_rel)
        tr = evolve_rescaled(v0, taus[-1], me, se, scfg)
        fields = tr.fields[1:]
        s = np.exp(np.array(tr.times[1:]))
        sup = np.array(tr.sup[1:]) * s ** (-se.alpha)
        widths = [np.array([half_mass_width(f, i) for f in fields]) * s ** a[i] for i in range(me.N)]
    elif cfg.frame == "physical":
        u0 = ScalarField(grid, _box_data(grid, cfg.box_side, cfg.mass, np.ones(me.N)), 0.0)
        scfg = SolverConfig(scheme="implicit", bc="reflecting", snapshots=tuple(ts), dt_rel=cfg.dtau, dt_init=1e-4, floor_rel=cfg.floor_rel)
        tr = solve_cauchy(u0, float(ts[-1]), me, scfg)
        fields = tr.fields[1:]
        sup = np.array(tr.sup[1:])
        widths = [np.array([half_mass_width(f, i) for f in fields]) for i in range(me.N)]
    else:
        raise ConfigError(f"unknown frame {cfg.frame!r}")
    rep.series["t"] = list(ts)
    rep.series["sup"] = list(sup)
    rep.series["sup_times_t_alpha"] = list(sup * ts**se.alpha)
    rep.series["mass"] = list(tr.mass[1:])
    for i in range(me.N):
        rep.series[f"width_{i + 1}"] = list(widths[i])
    rep.provenance["similarity"] = se.table()
    rep.provenance["frame"] = cfg.frame
    rep.provenance["floor"] = tr.floor
    _fit_verdict(rep, "sup_slope", fit_power_law(ts, sup), -se.alpha, cfg.sup_tol)
    for i in range(me.N):
        _fit_verdict(rep, f"width_slope_{i + 1}", fit_power_law(ts, widths[i]), se.a[i], cfg.width_tol)
    rep.elapsed = time.perf_counter() - t_start
    return rep


# ---------------------------------------------------------------------------
# profiles, tails and the mass ladder


@dataclass
class ProfileTailConfig:
    m: tuple[float, ...] = (0.8, 0.4)
    ladder: tuple[float, ...] = (1.0, 4.0, 16.0, 64.0)
    ladder_half_extent: tuple[float, ...] = (12.0, 24.0)
    ladder_cells: tuple[int, ...] = (128, 512)
    ladder_floor: float = 1e-22
    tail_mass: float = 1.0
    tail_half_extent: tuple[float, ...] = (240.0, 64.0)
    tail_cells: tuple[int, ...] = (512, 128)
    tail_floor: float = 1e-26
    tail_window: tuple[float, float] = (0.2, 0.9)  # fractions of the half extent
    core_radius: float = 2.0
    annulus: tuple[float, float] = (10.0, 1000.0)  # range of S(y) = sum |y_i|^{2 mu_i}
    steady_tol: float = 1e-4
    tail_tol: float = 0.05
    band_max: float = 10.0
    ratio_slope_tol: float = 0.1
    collapse_tol: float = 0.03
    monotone_tol: float = 1e-8


def _axis_row(F: ScalarField, axis: int):
    """Positive half of the grid line nearest to axis ``axis``."""
    g = F.grid
    idx = [n // 2 for n in g.shape]
    idx[axis] = slice(None)
    c = g.centers(axis)
    row = F.values[tuple(idx)]
    pos = c > 0
    return c[pos], row[pos]


def exp_profile_and_tail(cfg: ProfileTailConfig) -> ExperimentReport:
    t_start = time.perf_counter()
    me, se = _exponents(cfg.m)
    rep = ExperimentReport("profile_tail", dataclasses.asdict(cfg))
    base = SolverConfig(bc="reflecting", steady_tol=cfg.steady_tol, max_steps=5000)

    # deep tails from one profile on a long box
    tg = TensorGrid(cfg.tail_half_extent, cfg.tail_cells)
    tres = solve_profile(cfg.tail_mass, me, se, base.replace(floor=cfg.tail_floor), tg)
    F = tres.profile
    cal = cf.surrogate_calibration(me)
    P = tg.points()
    ratio = ScalarField(tg, F.values / cf.partition_min(P, 1.0, me, se, cal))
    rep.provenance["tail_profile"] = {"iterations": tres.iterations, "residual": tres.residual, "mass": tres.mass, "ssni_violation": tres.ssni_violation}
    rep.provenance["calibration"] = {"C": list(cal.C), "K1": cal.K1, "K2": cal.K2, "surrogate": True}
    for i in range(me.N):
        y, f = _axis_row(F, i)
        lo = max(cfg.core_radius, cfg.tail_window[0] * tg.half_extent[i])
        hi = cfg.tail_window[1] * tg.half_extent[i]
        fit = fit_power_law(y, f, (lo, hi))
        _fit_verdict(rep, f"tail_exponent_{i + 1}", fit, -2.0 * se.mu[i], cfg.tail_tol)
        rep.series[f"tail_axis_{i + 1}"] = {"y": list(y), "F": list(f)}
        yr, r = _axis_row(ratio, i)
        rfit = fit_power_law(yr, r, (lo, hi))
        rep.fits[f"surrogate_ratio_{i + 1}"] = rfit
        rep.verdict(f"surrogate_ratio_slope_{i + 1}", abs(rfit.exponent) <= cfg.ratio_slope_tol, rfit.exponent, cfg.ratio_slope_tol,
                    "slope of log(F_M / partition surrogate) along the axis")
        rep.series[f"axis_constant_{i + 1}"] = float(r[(yr >= lo) & (yr <= hi)][-1])

    # band of F * sum |y_i|^{2 mu_i} outside the core, inside the trusted box
    S = quasi_radius(P, se)
    inside = np.all(np.abs(P) <= cfg.tail_window[1] * np.asarray(tg.half_extent), axis=-1)
    outer = inside & (S >= cfg.annulus[0])
    band = F.values[outer] * S[outer]
    rep.series["band"] = {"K1": float(band.min()), "K2": float(band.max())}
    rep.verdict("band_ratio", band.max() / band.min() <= cfg.band_max, float(band.max() / band.min()), cfg.band_max,
                "F_M(y) * sum_i |y_i|^{2 mu_i} over the outer region")

    # mass ladder on a common grid
    lg = TensorGrid(cfg.ladder_half_extent, cfg.ladder_cells)
    profiles = {}
    info = {}
    initial = None
    for M in sorted(cfg.ladder):
        res = solve_profile(M, me, se, base.replace(floor=cfg.ladder_floor), lg, initial=initial)
        profiles[M] = res.profile
        info[M] = {"iterations": res.iterations, "residual": res.residual, "mass": res.mass, "ssni_violation": res.ssni_violation}
    rep.provenance["ladder_profiles"] = info
    Ms = sorted(profiles)
    mono = min(float(np.min(profiles[b].values - profiles[a].values)) for a, b in zip(Ms, Ms[1:]))
    rep.verdict("ladder_monotone", mono >= -cfg.monotone_tol, mono, -cfg.monotone_tol, "min over y of F_{M2} - F_{M1}, M1 < M2")
    LP = lg.points()
    LS = quasi_radius(LP, se)
    sel = (LS >= cfg.annulus[0]) & (LS <= cfg.annulus[1])
    y = LP[sel]
    M_ref = Ms[0]
    collapsed = {}
    for M in Ms:
        k = (M_ref / M) ** (1.0 / se.beta)
        G = cf.mass_rescale(_log_interpolator(profiles[M]), k, se)
        collapsed[M] = G(y)
    worst = 0.0
    for a in Ms:
        for b in Ms:
            if a < b:
                worst = max(worst, float(np.max(np.abs(collapsed[b] / collapsed[a] - 1.0))))
    rep.series["collapse_pairwise_max"] = worst
    rep.verdict("collapse", worst <= cfg.collapse_tol, worst, cfg.collapse_tol,
                f"max relative gap of k F_M(k^gamma y) across the ladder on {cfg.annulus[0]} <= S(y) <= {cfg.annulus[1]}")
    rep.elapsed = time.perf_counter() - t_start
    return rep


# ---------------------------------------------------------------------------
# isotropic profile check


@dataclass
class IsotropicProfileConfig:
    m: float = 0.5
    N: int = 2
    mass: float = 1.0
    half_extent: float = 8.0
    cells: int = 128
    floor: float = 1e-14
    steady_tol: float = 1e-4
    tol: float = 0.02
    ssni_tol: float = 1e-6


def exp_isotropic_profile(cfg: IsotropicProfileConfig) -> ExperimentReport:
    """Profile solve against the closed form whose constant C is fitted so that
    its mass on the same box matches the computed profile."""
    from scipy.optimize import brentq

    t_start = time.perf_counter()
    me, se = _exponents((cfg.m,) * cfg.N)
    grid = TensorGrid.uniform(cfg.N, cfg.half_extent, cfg.cells)
    res = solve_profile(cfg.mass, me, se, SolverConfig(bc="reflecting", floor=cfg.floor, steady_tol=cfg.steady_tol, max_steps=5000), grid)
    F = res.profile

    def box_mass(C):
        return mass(sample(lambda p: cf.isotropic_profile(p, cfg.m, cfg.N, C), grid))

    C_whole = cf.isotropic_C_for_mass(cfg.m, cfg.N, res.mass)
    C = brentq(lambda c: box_mass(c) - res.mass, C_whole * 1e-3, C_whole * 1e3, xtol=1e-14, rtol=1e-14)
    exact = sample(lambda p: cf.isotropic_profile(p, cfg.m, cfg.N, C), grid)
    inner = tuple(slice(n // 4, 3 * n // 4) for n in grid.shape)
    err = float(np.max(np.abs(F.values - exact.values)[inner]) / np.max(exact.values[inner]))
    rep = ExperimentReport("isotropic_profile", dataclasses.asdict(cfg))
    rep.provenance.update({"C_box": C, "C_whole_space": C_whole, "iterations": res.iterations})
    rep.verdict("inner_linf", err <= cfg.tol, err, cfg.tol, "relative L-infinity error on the inner half-box")
    rep.verdict("ssni", res.ssni_violation <= cfg.ssni_tol, res.ssni_violation, cfg.ssni_tol)
    rep.verdict("steady_residual", res.residual <= cfg.steady_tol and res.increment <= cfg.steady_tol,
                {"residual": res.residual, "increment": res.increment}, cfg.steady_tol)
    rep.verdict("mass", abs(res.mass / cfg.mass - 1) <= 0.005, res.mass, cfg.mass)
    rep.elapsed = time.perf_counter() - t_start
    return rep


# ---------------------------------------------------------------------------
# relaxation runs (global Harnack, relative error, L^p rates)


@dataclass
class RelaxConfig:
    m: tuple[float, ...] = (0.8, 0.4)
    half_extent: tuple[float, ...] = (12.0, 24.0)
    cells: tuple[int, ...] = (96, 384)
    mass: float = 1.0
    data: tuple[str, ...] = ("bump",)
    delay: float = 0.1
    bump_center: tuple[float, ...] = (1.0, 1.5)
    bump_radii: tuple[float, ...] = (1.5, 2.0)
    t_data: float = 1.0
    T: float = 2.0
    factor: float = 10.0
    snapshots: int = 14
    dtau: float = 0.02
    floor: float = 1e-22
    core_k: float = 2.0
    clip: float = 1e-300
    exact_tol: float = 0.02
    delay_exponent_tol: float = 0.2
    core_slack: float = 0.2


def _initial_data(kind: str, cfg: RelaxConfig, me, se, grid, F1: ScalarField) -> np.ndarray:
    P = grid.points()
    if kind == "exact":
        return F1.values.copy()
    if kind == "delayed":
        # U_M(x, t_data + h) written in the variables of t_data
        s = (cfg.t_data + cfg.delay) / cfg.t_data
        F = _log_interpolator(F1)
        return s ** (-se.alpha) * F(P * s ** (-np.asarray(se.a)))
    if kind == "bump":
        c = np.asarray(cfg.bump_center)
        r = np.asarray(cfg.bump_radii)
        q = np.sum(((P - c) / r) ** 2, axis=-1)
        b = np.clip(1.0 - q, 0.0, None) ** 2
        b *= cfg.mass / (b.sum() * grid.cell_volume)
        # tails below a VSS slice: clip with the partition surrogate
        V = cf.partition_min(P, cfg.t_data, me, se, cf.surrogate_calibration(me))
        return np.minimum(b, V)
    raise ConfigError(f"unknown data kind {kind!r}")


@dataclass
class GhpConfig(RelaxConfig):
    data: tuple[str, ...] = ("bump", "exact", "delayed")


@dataclass
class AcreConfig(RelaxConfig):
    data: tuple[str, ...] = ("bump", "delayed")


@dataclass
class RelaxRun:
    kind: str
    t: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    E: np.ndarray
    E_core: np.ndarray
    L1: np.ndarray
    L2: np.ndarray
    mass: np.ndarray
    clipped_cells: int


def relax_run(kind: str, cfg: RelaxConfig) -> RelaxRun:
    me, se = _exponents(cfg.m)
    grid = TensorGrid(cfg.half_extent, cfg.cells)
    pcfg = SolverConfig(bc="reflecting", floor=cfg.floor, max_steps=5000)
    F1 = solve_profile(cfg.mass, me, se, pcfg, grid).profile
    v0 = ScalarField(grid, _initial_data(kind, cfg, me, se, grid, F1), 0.0)
    t = np.geomspace(cfg.T, cfg.factor * cfg.T, cfg.snapshots)
    taus = tuple(np.log(t / cfg.t_data))
    rcfg = SolverConfig(scheme="implicit", split=False, bc="reflecting", floor=cfg.floor, snapshots=taus, dt_rel=cfg.dtau, dt_init=cfg.dtau)
    tr = evolve_rescaled(v0, taus[-1], me, se, rcfg)
    # comparison profile carries the mass measured at the first comparison time
    M = tr.mass[1]
    F = F1 if kind == "exact" else solve_profile(M, me, se, pcfg, grid, initial=F1).profile
    P = grid.points()
    core = np.all(np.abs(P) <= cfg.core_k, axis=-1)
    ok = F.values >= cfg.clip
    out = {k: [] for k in ("C1", "C2", "E", "E_core", "L1", "L2")}
    for f in tr.fields[1:]:
        R = f.values[ok] / F.values[ok]
        out["C1"].append(R.min())
        out["C2"].append(R.max())
        out["E"].append(np.max(np.abs(R - 1.0)))
        out["E_core"].append(np.max(np.abs(f.values[core & ok] / F.values[core & ok] - 1.0)))
        d = np.abs(f.values - F.values)
        out["L1"].append(np.sum(d) * grid.cell_volume)
        out["L2"].append(np.sqrt(np.sum(d * d) * grid.cell_volume))
    return RelaxRun(kind, t, *(np.array(out[k]) for k in ("C1", "C2", "E", "E_core", "L1", "L2")),
                    mass=np.array(tr.mass[1:]), clipped_cells=int(np.sum(~ok)))


def _trend(x: np.ndarray) -> float:
    """Slope of x against log t index (least squares); sign gives the trend."""
    k = np.arange(len(x), dtype=float)
    return float(np.polyfit(k, x, 1)[0])


def _store_run(rep: ExperimentReport, run: RelaxRun):
    rep.series[run.kind] = {
        "t": list(run.t), "C1": list(run.C1), "C2": list(run.C2), "E": list(run.E), "E_core": list(run.E_core),
        "L1": list(run.L1), "L2": list(run.L2), "mass": list(run.mass), "clipped_cells": run.clipped_cells,
    }


def exp_ghp(cfg: RelaxConfig) -> ExperimentReport:
    t_start = time.perf_counter()
    rep = ExperimentReport("ghp", dataclasses.asdict(cfg))
    for kind in cfg.data:
        run = relax_run(kind, cfg)
        _store_run(rep, run)
        if kind == "exact":
            dev = float(max(np.max(np.abs(run.C1 - 1)), np.max(np.abs(run.C2 - 1))))
            rep.verdict("exact_slice", dev <= cfg.exact_tol, dev, cfg.exact_tol, "max |C - 1| for exact-slice data")
            continue
        bounded = bool(np.all(run.C1 > 0) and np.all(run.C1 <= 1) and np.all(run.C2 >= 1) and np.all(np.isfinite(run.C2)))
        rep.verdict(f"{kind}_bounds", bounded, {"C1_min": float(run.C1.min()), "C2_max": float(run.C2.max())}, "0 < C1 <= 1 <= C2 < inf")
        rep.verdict(f"{kind}_C1_trend", _trend(run.C1) >= 0, _trend(run.C1), "nondecreasing trend")
        rep.verdict(f"{kind}_C2_trend", _trend(run.C2) <= 0, _trend(run.C2), "nonincreasing trend")
        spread = run.C2 / run.C1
        rep.verdict(f"{kind}_tightening", _trend(spread) <= 0 and spread[-1] <= spread[0], {"C2/C1 first": float(spread[0]), "last": float(spread[-1]), "trend": _trend(spread)},
                    "nonincreasing trend")
    rep.elapsed = time.perf_counter() - t_start
    return rep


def exp_acre(cfg: RelaxConfig) -> ExperimentReport:
    t_start = time.perf_counter()
    rep = ExperimentReport("acre", dataclasses.asdict(cfg))
    for kind in cfg.data:
        run = relax_run(kind, cfg)
        _store_run(rep, run)
        rep.verdict(f"{kind}_halving", run.E[-1] <= 0.5 * run.E[0], {"E(T)": float(run.E[0]), "E(10T)": float(run.E[-1])}, "E(10T) <= E(T)/2")
        f_all = fit_power_law(run.t, run.E)
        f_core = fit_power_law(run.t, run.E_core)
        rep.fits[f"{kind}_E"] = f_all
        rep.fits[f"{kind}_E_core"] = f_core
        core_drop = run.E_core[-1] / run.E_core[0]
        all_drop = run.E[-1] / run.E[0]
        rep.verdict(f"{kind}_core", core_drop <= all_drop * (1 + cfg.core_slack), {"core": float(core_drop), "global": float(all_drop)},
                    {"max_core_over_global": 1 + cfg.core_slack},
                    "decade decay factor of the inner-core error vs the global one; equal rates count as a pass within the slack")
        if kind == "delayed":
            err = abs(f_all.exponent + 1.0)
            rep.verdict("delayed_exponent", err <= cfg.delay_exponent_tol and f_all.residual < 0.05,
                        {"exponent": f_all.exponent, "residual": f_all.residual}, {"target": -1.0, "abs_tol": cfg.delay_exponent_tol})
            mu = np.asarray(_exponents(cfg.m)[1].mu)
            rep.series["delayed_surrogate"] = list(((1 + cfg.delay / run.t) ** mu.max() - 1))
    rep.elapsed = time.perf_counter() - t_start
    return rep


# ---------------------------------------------------------------------------
# semigroup properties and L^p rates


@dataclass
class SemigroupConfig:
    m: tuple[float, ...] = (0.8, 0.4)
    pairs: int = 20
    half_extent: float = 4.0
    cells: int = 32
    t_end: float = 0.1
    snapshots: int = 5
    bc: str = "reflecting"
    seed: int = 0
    contraction_tol: float = 1e-10
    order_tol: float = 1e-12
    mass_tol: float = 0.01
    rates: RelaxConfig = field(default_factory=RelaxConfig)


def _random_field(rng: np.random.Generator, grid: TensorGrid) -> np.ndarray:
    # a few random bumps on a small positive background
    P = grid.points()
    vals = np.full(grid.shape, 0.01 + 0.05 * rng.random())
    for _ in range(3):
        c = rng.uniform(-0.6, 0.6, grid.ndim) * np.asarray(grid.half_extent)
        r = rng.uniform(0.3, 1.2, grid.ndim)
        vals += rng.uniform(0.2, 2.0) * np.exp(-np.sum(((P - c) / r) ** 2, axis=-1))
    return vals


def exp_rates_and_semigroup(cfg: SemigroupConfig) -> ExperimentReport:
    t_start = time.perf_counter()
    me, se = _exponents(cfg.m)
    rep = ExperimentReport("rates_semigroup", dataclasses.asdict(cfg))
    rng = np.random.default_rng(cfg.seed)
    grid = TensorGrid.uniform(me.N, cfg.half_extent, cfg.cells)
    snaps = tuple(np.linspace(cfg.t_end / cfg.snapshots, cfg.t_end, cfg.snapshots))
    scfg = SolverConfig(scheme="explicit", bc=cfg.bc, snapshots=snaps)
    worst_contraction = -np.inf
    worst_order = np.inf
    worst_mass = 0.0
    for p in range(cfg.pairs):
        u0 = _random_field(rng, grid)
        if p % 2 == 0:
            v0 = u0 + rng.uniform(0.0, 0.5) * _random_field(rng, grid)  # ordered pair
        else:
            v0 = _random_field(rng, grid)
        tu, tv = solve_cauchy_many([ScalarField(grid, u0), ScalarField(grid, v0)], cfg.t_end, me, scfg)
        d0 = float(np.sum(np.abs(u0 - v0)) * grid.cell_volume)
        for fu, fv in zip(tu.fields[1:], tv.fields[1:]):
            d = float(np.sum(np.abs(fu.values - fv.values)) * grid.cell_volume)
            worst_contraction = max(worst_contraction, d - d0)
            if p % 2 == 0:
                worst_order = min(worst_order, float(np.min(fv.values - fu.values)))
        for tr in (tu, tv):
            worst_mass = max(worst_mass, abs(tr.mass[-1] / tr.mass[0] - 1))
    rep.verdict("l1_contraction", worst_contraction <= cfg.contraction_tol, worst_contraction, cfg.contraction_tol,
                "max over pairs and snapshots of ||S u - S v||_1 - ||u0 - v0||_1")
    rep.verdict("order_preservation", worst_order >= -cfg.order_tol, worst_order, -cfg.order_tol)
    rep.verdict("mass_conservation", worst_mass <= cfg.mass_tol, worst_mass, cfg.mass_tol)

    run = relax_run("bump", cfg.rates)
    _store_run(rep, run)
    for p, series in ((1, run.L1), (2, run.L2)):
        # ||v - F||_p equals t^{(p-1) alpha / p} ||u - U_M||_p
        steps = np.diff(series)
        rep.verdict(f"lp_rate_{p}", bool(np.all(steps < 0)), {"first": float(series[0]), "last": float(series[-1]), "max_step": float(steps.max())},
                    "strictly decreasing")
    rep.elapsed = time.perf_counter() - t_start
    return rep


# ---------------------------------------------------------------------------
# 1D benchmark


@dataclass
class BenchmarkConfig:
    m: float = 0.5
    C: float = 1.0
    half_extent: float = 20.0
    h: float = 0.05
    t0: float = 1.0
    t1: float = 2.0
    l1_tol: float = 1e-2
    refinement_ratio: float = 1.7
    mass_drift_tol: float = 1e-10
    theta: float = 0.9


def _barenblatt_run(cfg: BenchmarkConfig, h: float, bc: str):
    me = validate_exponents(1, [cfg.m])
    n = int(round(2 * cfg.half_extent / h))
    grid = TensorGrid((cfg.half_extent,), (n,))

    def exact(p, t):
        return cf.barenblatt_solution_1d(p[..., 0], t, cfg.m, cfg.C)

    exact.__name__ = "barenblatt_1d"
    u0 = sample(lambda p: exact(p, cfg.t0), grid, cfg.t0)
    scfg = SolverConfig(scheme="explicit", bc=bc, barrier=exact if bc == "barrier-dirichlet" else None, theta=cfg.theta)
    tr = solve_cauchy(u0, cfg.t1, me, scfg)
    ref = sample(lambda p: exact(p, cfg.t1), grid, cfg.t1)
    err = float(np.sum(np.abs(tr.fields[-1].values - ref.values)) / np.sum(ref.values))
    return tr, err


def exp_barenblatt_benchmark(cfg: BenchmarkConfig) -> ExperimentReport:
    t_start = time.perf_counter()
    rep = ExperimentReport("barenblatt_benchmark", dataclasses.asdict(cfg))
    tr, e1 = _barenblatt_run(cfg, cfg.h, "barrier-dirichlet")
    _, e2 = _barenblatt_run(cfg, cfg.h / 2, "barrier-dirichlet")
    tr_ref, _ = _barenblatt_run(cfg, cfg.h, "reflecting")
    drift = abs(tr_ref.mass[-1] / tr_ref.mass[0] - 1)
    rep.series.update({"l1_error": [e1, e2], "h": [cfg.h, cfg.h / 2], "steps": tr.steps, "floor": tr.floor})
    rep.verdict("l1_error", e1 <= cfg.l1_tol, e1, cfg.l1_tol, "relative L1 error at t1")
    rep.verdict("refinement", e1 / e2 >= cfg.refinement_ratio, e1 / e2, cfg.refinement_ratio, "error ratio when h is halved")
    rep.verdict("mass_drift_reflecting", drift <= cfg.mass_drift_tol, drift, cfg.mass_drift_tol)
    energy = np.array(tr_ref.energy)
    rep.series["energy"] = energy.tolist()
    rep.verdict("energy_monotone", bool(np.all(np.diff(energy, axis=0) <= 1e-12)), float(np.max(np.diff(energy, axis=0))), 0.0,
                "int u^{m+1}/(m+1) nonincreasing with reflecting walls")
    rep.elapsed = time.perf_counter() - t_start
    return rep


# ---------------------------------------------------------------------------
# local mass


@dataclass
class LocalMassConfig:
    m: tuple[float, ...] = (0.8, 0.4)
    half_extent: tuple[float, ...] = (6.0, 6.0)
    cells: tuple[int, ...] = (128, 128)
    probe_lower: tuple[float, ...] = (0.5, -1.0)
    probe_upper: tuple[float, ...] = (2.5, 1.0)
    bump_radius: float = 0.5
    mass: float = 1.0
    t_end: float = 2.0
    snapshots: int = 12
    scaling_factor: float = 4.0
    scaling_tol: float = 0.005
    quadrature_nodes: int = 512  # per axis on the base box
    holder_tol: float = 1e-8
    growth_slack: float = 0.1


def direct_Y(box: Box, me: MediumExponents, k: Sequence[float], spacing: Sequence[float]) -> tuple[float, ...]:
    """Y_i by a midpoint tensor rule with fixed physical node spacing, without
    using the product structure of the integrand. A stretched box gets more
    nodes, so comparing boxes tests the scaling law against quadrature error."""
    _, phi, d2phi = build_bump(box, me, k)
    n = [max(4, int(round(Li / hi))) for Li, hi in zip(box.lengths, spacing)]
    axes = [box.lower[i] + (np.arange(n[i]) + 0.5) * box.lengths[i] / n[i] for i in range(me.N)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    w = box.volume / math.prod(n)
    p = phi(pts)
    out = []
    for i, mi in enumerate(me.m):
        d2 = d2phi(pts, i)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(p > 0, (p ** (-mi) * np.abs(d2)) ** (1.0 / (1.0 - mi)), 0.0)
        out.append(float(np.sum(f) * w))
    return tuple(out)


def exp_local_mass(cfg: LocalMassConfig) -> ExperimentReport:
    t_start = time.perf_counter()
    me, se = _exponents(cfg.m)
    rep = ExperimentReport("local_mass", dataclasses.asdict(cfg))
    box = Box(cfg.probe_lower, cfg.probe_upper)
    probe, phi, d2phi = build_bump(box, me)

    # Y_i ∝ V(K) L_i^{-2 mu_i}: stretch each axis in turn and measure Y by
    # direct quadrature of the unfactorised integrand on each box
    spacing = [Li / cfg.quadrature_nodes for Li in box.lengths]
    Y0 = direct_Y(box, me, probe.k, spacing)
    worst = 0.0
    rows = []
    for i in range(me.N):
        for f in (2.0, cfg.scaling_factor):
            hi = list(box.upper)
            hi[i] = box.lower[i] + f * box.lengths[i]
            Y2 = direct_Y(Box(box.lower, tuple(hi)), me, probe.k, spacing)
            for j in range(me.N):
                law = f * (f ** (-2.0 * se.mu[i]) if j == i else 1.0)
                err = abs(Y2[j] / Y0[j] / law - 1.0)
                rows.append({"axis_stretched": i + 1, "factor": f, "Y_index": j + 1, "ratio": Y2[j] / Y0[j], "law": law})
                worst = max(worst, err)
    rep.series["y_scaling"] = rows
    rep.provenance["Y_direct"] = list(Y0)
    rep.verdict("y_scaling", worst <= cfg.scaling_tol, worst, cfg.scaling_tol, f"box lengths stretched up to {cfg.scaling_factor}x")

    grid = TensorGrid(cfg.half_extent, cfg.cells)
    P = grid.points()
    b = np.clip(1.0 - np.sum(P**2, axis=-1) / cfg.bump_radius**2, 0.0, None) ** 2
    b *= cfg.mass / (b.sum() * grid.cell_volume)
    snaps = tuple(np.geomspace(cfg.t_end / 2 ** (cfg.snapshots - 1), cfg.t_end, cfg.snapshots))
    tr = solve_cauchy(ScalarField(grid, b), cfg.t_end, me, SolverConfig(scheme="implicit", bc="reflecting", snapshots=snaps, dt_rel=0.01, dt_init=1e-5))
    lm = verify_local_mass(tr, probe, phi, d2phi, me, tol=cfg.holder_tol)
    rep.series.update({
        "t": lm.times, "X": lm.X, "bound": lm.bound, "margin": lm.margin, "holder_lhs": lm.holder_lhs,
        "holder_rhs": lm.holder_rhs, "holder_rhs_quadrature": lm.holder_rhs_quadrature, "renormalized": lm.renormalized,
    })
    rep.provenance.update({"Y": list(probe.Y), "Y_discrete": list(lm.Y_discrete), "k": list(probe.k), "renormalized_D": lm.renormalized_D})
    gaps = [a - c for a, c in zip(lm.holder_lhs, lm.holder_rhs)]
    gap = max(gaps[1:]) if len(gaps) > 1 else gaps[0]
    ok = all(g <= cfg.holder_tol for g in gaps)
    rep.verdict("holder", ok, gap, cfg.holder_tol, "max of lhs - rhs over snapshots after t0 (discrete Y); t0 checked too")
    rep.verdict("below_ode_bound", lm.verdicts["below_ode_bound"], min(lm.margin[1:]), 0.0, "min margin after t0")
    limit = lm.growth_limit * (1 + cfg.growth_slack)
    rep.verdict("growth_exponent", lm.growth_exponent is not None and lm.growth_exponent <= limit, lm.growth_exponent, limit)
    rep.elapsed = time.perf_counter() - t_start
    return rep


EXPERIMENTS = {
    "benchmark": (BenchmarkConfig, exp_barenblatt_benchmark),
    "smoothing": (SmoothingConfig, exp_smoothing_and_spread),
    "isotropic_profile": (IsotropicProfileConfig, exp_isotropic_profile),
    "profile_tail": (ProfileTailConfig, exp_profile_and_tail),
    "ghp": (GhpConfig, exp_ghp),
    "acre": (AcreConfig, exp_acre),
    "rates": (SemigroupConfig, exp_rates_and_semigroup),
    "local_mass": (LocalMassConfig, exp_local_mass),
}
