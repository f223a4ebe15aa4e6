"""Cell-centred tensor-product grids, nonnegative fields and the discrete
calculus shared by the solvers and the experiments.

Cell counts are even, so no cell centre sits on a coordinate hyperplane and
profiles that are singular at the origin can be sampled directly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

MAX_DIM = 3


@dataclass(frozen=True)
class TensorGrid:
    half_extent: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        L = tuple(float(v) for v in self.half_extent)
        n = tuple(int(v) for v in self.cells)
        object.__setattr__(self, "half_extent", L)
        object.__setattr__(self, "cells", n)
        if len(L) != len(n) or not 1 <= len(n) <= MAX_DIM:
            raise ValueError(f"need 1..{MAX_DIM} axes with matching L and n, got {L}, {n}")
        for i, (Li, ni) in enumerate(zip(L, n)):
            if not (np.isfinite(Li) and Li > 0):
                raise ValueError(f"axis {i}: half extent must be positive, got {Li}")
            if ni < 4 or ni % 2:
                raise ValueError(f"axis {i}: cell count must be even and >= 4, got {ni}")

    @classmethod
    def uniform(cls, N: int, L: float, n: int) -> "TensorGrid":
        return cls((L,) * N, (n,) * N)

    @property
    def ndim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(2.0 * L / n for L, n in zip(self.half_extent, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def centers(self, axis: int) -> np.ndarray:
        L, n, h = self.half_extent[axis], self.cells[axis], self.spacing[axis]
        return -L + (np.arange(n) + 0.5) * h

    def faces(self, axis: int) -> np.ndarray:
        L, n, h = self.half_extent[axis], self.cells[axis], self.spacing[axis]
        return -L + np.arange(n + 1) * h

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays, one per axis (``ij`` indexing)."""
        return tuple(np.meshgrid(*[self.centers(i) for i in range(self.ndim)], indexing="ij", sparse=True))

    def points(self) -> np.ndarray:
        """Cell centres as an array of shape (*shape, N)."""
        full = np.meshgrid(*[self.centers(i) for i in range(self.ndim)], indexing="ij")
        return np.stack(full, axis=-1)

    def ghost_points(self, axis: int, side: int) -> np.ndarray:
        """Centres of the ghost layer beyond face ``side`` (0 low, 1 high) of ``axis``.

        Shape is the grid shape with ``axis`` of length 1, plus a trailing N.
        """
        L, h = self.half_extent[axis], self.spacing[axis]
        coords = [self.centers(i) for i in range(self.ndim)]
        coords[axis] = np.array([-L - 0.5 * h if side == 0 else L + 0.5 * h])
        full = np.meshgrid(*coords, indexing="ij")
        return np.stack(full, axis=-1)

    def scaled(self, factors: Sequence[float]) -> "TensorGrid":
        return TensorGrid(tuple(L * f for L, f in zip(self.half_extent, factors)), self.cells)

    def padded(self, layers: int) -> "TensorGrid":
        """Same spacing, ``layers`` extra cells on every side of every axis."""
        h = self.spacing
        return TensorGrid(
            tuple(L + layers * hi for L, hi in zip(self.half_extent, h)),
            tuple(n + 2 * layers for n in self.cells),
        )

    def crop_slices(self, layers: int) -> tuple[slice, ...]:
        return tuple(slice(layers, n - layers) for n in self.cells)

    def to_dict(self) -> dict:
        return {"L": list(self.half_extent), "n": list(self.cells)}


@dataclass
class ScalarField:
    grid: TensorGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        if np.any(v < 0.0):
            raise ValueError(f"field has negative values (min {v.min():.3e})")
        self.values = v

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy(), self.time)

    def with_values(self, values: np.ndarray, time: Optional[float] = None) -> "ScalarField":
        return ScalarField(self.grid, values, self.time if time is None else time)


@dataclass(frozen=True)
class Box:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"invalid box {lo} x {hi}")

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.lower, self.upper))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def inside(self, grid: TensorGrid) -> bool:
        return all(-L <= a and b <= L for a, b, L in zip(self.lower, self.upper, grid.half_extent))


PointFunction = Callable[[np.ndarray], np.ndarray]


def sample(f: PointFunction, grid: TensorGrid, t: float = 0.0) -> ScalarField:
    """Evaluate ``f`` at every cell centre (points passed as (..., N))."""
    vals = np.asarray(f(grid.points()), dtype=float)
    vals = np.broadcast_to(vals, grid.shape).copy()
    if not np.all(np.isfinite(vals)):
        raise ValueError("sampled function is not finite at some cell centre")
    if np.any(vals < 0.0):
        worst = vals.min()
        if worst < -1e-12 * max(1.0, np.abs(vals).max()):
            raise ValueError(f"sampled function is negative (min {worst:.3e})")
        vals = np.maximum(vals, 0.0)
    return ScalarField(grid, vals, t)


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=float)


def mass(u: ScalarField) -> float:
    return float(np.sum(u.values) * u.grid.cell_volume)


def lp_norm(u: ScalarField, p: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    vals = np.abs(u.values)
    return float((np.sum(vals**p) * u.grid.cell_volume) ** (1.0 / p))


def sup_norm(u: ScalarField) -> float:
    return float(np.max(np.abs(u.values)))


def lp_distance(u: ScalarField, v: ScalarField, p: float = 1.0) -> float:
    """L^p distance of two fields on the same grid (p = inf allowed)."""
    d = np.abs(u.values - v.values)
    if np.isinf(p):
        return float(d.max())
    return float((np.sum(d**p) * u.grid.cell_volume) ** (1.0 / p))


def box_weights(grid: TensorGrid, box: Box) -> np.ndarray:
    """Fraction of every cell covered by ``box`` (tensor product of 1D overlaps)."""
    w = None
    for i in range(grid.ndim):
        f = grid.faces(i)
        lo = np.clip(f[:-1], box.lower[i], box.upper[i])
        hi = np.clip(f[1:], box.lower[i], box.upper[i])
        wi = (hi - lo) / grid.spacing[i]
        shape = [1] * grid.ndim
        shape[i] = -1
        wi = wi.reshape(shape)
        w = wi if w is None else w * wi
    return np.broadcast_to(w, grid.shape)


def local_mass(u: ScalarField, box: Box) -> float:
    return float(np.sum(u.values * box_weights(u.grid, box)) * u.grid.cell_volume)


def _pad_axis(w: np.ndarray, axis: int, lo, hi) -> np.ndarray:
    """Append ghost layers along ``axis``; ``None`` copies the edge (zero flux)."""
    edge_lo = np.take(w, [0], axis=axis)
    edge_hi = np.take(w, [-1], axis=axis)
    first = edge_lo if lo is None else np.broadcast_to(_as_layer(lo, w, axis), edge_lo.shape)
    last = edge_hi if hi is None else np.broadcast_to(_as_layer(hi, w, axis), edge_hi.shape)
    return np.concatenate([first, w, last], axis=axis)


def second_difference(w, axis: int, h: float, ghost_lo=None, ghost_hi=None) -> np.ndarray:
    """(w_{j-1} - 2 w_j + w_{j+1}) / h^2 along ``axis``.

    Ghost layers default to copies of the edge values, i.e. a reflecting
    (zero-flux) boundary.
    """
    wp = _pad_axis(_values(w), axis, ghost_lo, ghost_hi)
    return np.diff(wp, n=2, axis=axis) / h**2


def upwind_drift_divergence(
    v, axis: int, grid: TensorGrid, c: float, ghost_lo=None, ghost_hi=None
) -> np.ndarray:
    """Donor-cell discretisation of c * d/dy_i (y_i v).

    The transport velocity -c y points toward the origin, so every face takes
    the value of its outer neighbour. Boundary faces carry no flux unless a
    ghost layer is supplied, in which case the inflow is c |y_face| * ghost.
    """
    if c < 0:
        raise ValueError("drift coefficient must be nonnegative")
    vals = _values(v)
    h = grid.spacing[axis]
    yf = grid.faces(axis)
    shape = [1] * vals.ndim
    shape[axis] = -1
    n = vals.shape[axis]
    left = np.take(vals, range(0, n - 1), axis=axis)
    right = np.take(vals, range(1, n), axis=axis)
    yi = yf[1:-1].reshape(shape)
    upwind = np.where(yi < 0, left, right)
    flux = c * yi * upwind
    zero = np.zeros_like(np.take(vals, [0], axis=axis))
    lo = zero if ghost_lo is None else c * yf[0] * np.broadcast_to(_as_layer(ghost_lo, vals, axis), zero.shape)
    hi = zero if ghost_hi is None else c * yf[-1] * np.broadcast_to(_as_layer(ghost_hi, vals, axis), zero.shape)
    flux = np.concatenate([lo, flux, hi], axis=axis)
    return np.diff(flux, axis=axis) / h


def _as_layer(g, vals: np.ndarray, axis: int) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim == vals.ndim - 1:
        g = np.expand_dims(g, axis)
    return g


def write_snapshot_csv(u: ScalarField, path) -> Path:
    """Header ``x1,...,xN,u``; one row per cell in lexicographic index order."""
    path = Path(path)
    pts = u.grid.points().reshape(-1, u.grid.ndim)
    vals = u.values.reshape(-1)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(u.grid.ndim)] + ["u"])
        for p, v in zip(pts, vals):
            w.writerow([f"{c:.17g}" for c in p] + [f"{v:.17g}"])
    return path


def read_snapshot_csv(path, grid: TensorGrid, time: float = 0.0) -> ScalarField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (int(np.prod(grid.shape)), grid.ndim + 1):
        raise ValueError(f"snapshot {path} does not match grid {grid.to_dict()}")
    return ScalarField(grid, data[:, -1].reshape(grid.shape), time)
