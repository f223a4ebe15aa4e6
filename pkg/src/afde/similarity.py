"""Exponent hypotheses, self-similar scaling algebra and the change to
self-similar variables for u_t = sum_i (u^{m_i})_{x_i x_i}."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import math

import numpy as np

from .grid import ScalarField


class ExponentError(ValueError):
    """Raised when an exponent set violates the fast-diffusion hypotheses.

    ``violations`` holds one human-readable message per failed constraint.
    """

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class MediumExponents:
    m: tuple[float, ...]

    @property
    def N(self) -> int:
        return len(self.m)

    @property
    def mbar(self) -> float:
        return math.fsum(self.m) / self.N

    @property
    def mcrit(self) -> float:
        return 1.0 - 2.0 / self.N

    def as_array(self) -> np.ndarray:
        return np.asarray(self.m, dtype=float)


def validate_exponents(N: int, m: Sequence[float]) -> MediumExponents:
    """Check (H1) 0 < m_i < 1 and (H2) sum m_i > N - 2.

    All violated constraints are collected before raising, so a caller gets
    the complete list in one pass.
    """
    errors: list[str] = []
    if int(N) != N or N < 1:
        errors.append(f"N must be a positive integer, got {N!r}")
        raise ExponentError(errors)
    m = tuple(float(v) for v in m)
    if len(m) != N:
        errors.append(f"expected {N} exponents, got {len(m)}")
        raise ExponentError(errors)
    for i, mi in enumerate(m, start=1):
        if not (0.0 < mi < 1.0):
            errors.append(f"H1 violated on axis {i}: m_{i}={mi} not in (0, 1)")
    total = math.fsum(m)
    if not total > N - 2:
        errors.append(f"H2 violated: sum(m)={total!r} <= N-2={N - 2}")
    if errors:
        raise ExponentError(errors)
    return MediumExponents(m)


@dataclass(frozen=True)
class SimilarityExponents:
    alpha: float
    sigma: tuple[float, ...]
    a: tuple[float, ...]
    gamma: tuple[float, ...]
    mu: tuple[float, ...]
    delta: tuple[float, ...]
    beta: float

    @property
    def N(self) -> int:
        return len(self.sigma)

    @property
    def spread(self) -> np.ndarray:
        """Per-axis growth exponents sigma_i * alpha of the support."""
        return np.asarray(self.a)

    def table(self) -> dict:
        return {
            "alpha": self.alpha,
            "sigma": list(self.sigma),
            "a": list(self.a),
            "gamma": list(self.gamma),
            "mu": list(self.mu),
            "delta": list(self.delta),
            "beta": self.beta,
        }


def derive_similarity(me: MediumExponents) -> SimilarityExponents:
    N, mbar = me.N, me.mbar
    alpha = N / (N * (mbar - 1.0) + 2.0)
    sigma = tuple(1.0 / N + (mbar - mi) / 2.0 for mi in me.m)
    a = tuple(s * alpha for s in sigma)
    gamma = tuple((1.0 - mi) / 2.0 for mi in me.m)
    mu = tuple(1.0 / (1.0 - mi) for mi in me.m)
    delta = tuple(2.0 * s * alpha * u - alpha for s, u in zip(sigma, mu))
    beta = 1.0 - N * (1.0 - mbar) / 2.0

    beta_mass = 1.0 - math.fsum(gamma)
    assert math.isclose(beta, beta_mass, rel_tol=1e-12, abs_tol=1e-15), (beta, beta_mass)
    assert beta > 0.0 and alpha > 0.0
    for d, u in zip(delta, mu):
        assert math.isclose(d, u, rel_tol=1e-12), (d, u)
    return SimilarityExponents(alpha, sigma, a, gamma, mu, delta, beta)


@dataclass(frozen=True)
class RescaleMap:
    se: SimilarityExponents
    t0: float = 0.0

    def __post_init__(self):
        if not self.t0 >= 0.0:
            raise ValueError(f"time shift t0 must be >= 0, got {self.t0}")


def to_selfsimilar(u: ScalarField, rmap: RescaleMap) -> tuple[ScalarField, float]:
    """Map u(., t) (t taken from ``u.time``) to v(., tau).

    v(y) = (t+t0)^alpha u(x), y_i = x_i (t+t0)^(-sigma_i alpha); the grid is
    rescaled with the values, so discrete mass is preserved.
    """
    s = u.time + rmap.t0
    if not s > 0.0:
        raise ValueError(f"shifted time t + t0 = {s} must be positive")
    se = rmap.se
    factors = tuple(s ** (-ai) for ai in se.a)
    grid = u.grid.scaled(factors)
    tau = math.log(s)
    return ScalarField(grid, u.values * s**se.alpha, tau), tau


def from_selfsimilar(v: ScalarField, rmap: RescaleMap) -> tuple[ScalarField, float]:
    """Inverse of :func:`to_selfsimilar`; ``v.time`` is tau."""
    se = rmap.se
    s = math.exp(v.time)
    t = s - rmap.t0
    factors = tuple(s**ai for ai in se.a)
    grid = v.grid.scaled(factors)
    return ScalarField(grid, v.values * s ** (-se.alpha), t), t


def rescale_points(x: np.ndarray, s: float, se: SimilarityExponents) -> np.ndarray:
    """y_i = x_i s^(-sigma_i alpha) for points of shape (..., N)."""
    return np.asarray(x, dtype=float) * s ** (-np.asarray(se.a))


__all__ = [
    "ExponentError",
    "MediumExponents",
    "SimilarityExponents",
    "RescaleMap",
    "validate_exponents",
    "derive_similarity",
    "to_selfsimilar",
    "from_selfsimilar",
    "rescale_points",
]
