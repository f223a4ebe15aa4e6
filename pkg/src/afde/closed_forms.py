"""Explicit profiles and bounds: Barenblatt profiles, 1D very singular
solutions, the partition (min over axes) surrogate for the anisotropic VSS,
sandwich bounds, mass-change rescaling, level lines and time ratios.

Points are arrays of shape (..., N); everything is vectorised over the
leading dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .similarity import MediumExponents, SimilarityExponents

Profile = Callable[[np.ndarray], np.ndarray]


def barenblatt_coefficient_1d(m: float) -> float:
    """Quadratic coefficient that makes (C + k y^2)^(-1/(1-m)) a 1D profile.

    Equals alpha(1-m)/(2m) with alpha = 1/(1+m).
    """
    return (1.0 - m) / (2.0 * m * (1.0 + m))


def printed_coefficient_1d(m: float) -> float:
    """(1-m)/(2(1+m)): the value displayed in the source text, kept for the
    regression test showing that it does not solve u_t = (u^m)_xx."""
    return (1.0 - m) / (2.0 * (1.0 + m))


def vss_constant_1d(m: float, coefficient: Optional[float] = None) -> float:
    """C(m;1) = k^(-1/(1-m)): the 1D VSS amplitude at |y| = 1."""
    k = barenblatt_coefficient_1d(m) if coefficient is None else coefficient
    return k ** (-1.0 / (1.0 - m))


def barenblatt_profile_1d(y, m: float, C: float, coefficient: Optional[float] = None):
    y = np.asarray(y, dtype=float)
    if not 0.0 < m < 1.0:
        raise ValueError(f"m must lie in (0, 1), got {m}")
    if C < 0:
        raise ValueError("C must be nonnegative")
    if C == 0 and np.any(y == 0):
        raise ValueError("profile with C = 0 is singular at y = 0")
    k = barenblatt_coefficient_1d(m) if coefficient is None else coefficient
    return (C + k * y * y) ** (-1.0 / (1.0 - m))


def barenblatt_mass_1d(m: float, C: float, coefficient: Optional[float] = None) -> float:
    """Integral of the 1D profile over the real line (closed form via Beta)."""
    from scipy.special import beta as beta_fn

    k = barenblatt_coefficient_1d(m) if coefficient is None else coefficient
    p = 1.0 / (1.0 - m)
    # int (C + k y^2)^-p dy = C^(1/2 - p) k^(-1/2) B(1/2, p - 1/2)
    return C ** (0.5 - p) * k ** (-0.5) * beta_fn(0.5, p - 0.5)


def barenblatt_C_for_mass_1d(m: float, M: float) -> float:
    p = 1.0 / (1.0 - m)
    return (M / barenblatt_mass_1d(m, 1.0)) ** (1.0 / (0.5 - p))


def barenblatt_solution_1d(x, t: float, m: float, C: float):
    """U(x,t) = t^-alpha F(x t^-alpha) with alpha = 1/(1+m)."""
    alpha = 1.0 / (1.0 + m)
    return t ** (-alpha) * barenblatt_profile_1d(np.asarray(x) * t ** (-alpha), m, C)


def vss_1d(x, t: float, m: float, coefficient: Optional[float] = None):
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise ValueError("the 1D VSS is singular at x = 0")
    if not t > 0:
        raise ValueError("t must be positive")
    return vss_constant_1d(m, coefficient) * t ** (1.0 / (1.0 - m)) * np.abs(x) ** (-2.0 / (1.0 - m))


def isotropic_coefficient(m: float, N: int) -> float:
    alpha = N / (N * (m - 1.0) + 2.0)
    return alpha * (1.0 - m) / (2.0 * m * N)


def isotropic_profile(y, m: float, N: int, C: float, power: Optional[float] = None):
    """(C + alpha(1-m)/(2mN) |y|^2)^power with power = -1/(1-m) by default.

    ``power`` exists so that other exponents can be checked against the
    stationary residual; only the default solves the profile equation.
    """
    if not (0.0 < m < 1.0 and m > 1.0 - 2.0 / N):
        raise ValueError(f"m={m} outside the admissible range for N={N}")
    if not C > 0:
        raise ValueError("C must be positive")
    y = np.asarray(y, dtype=float)
    r2 = np.sum(y * y, axis=-1)
    p = -1.0 / (1.0 - m) if power is None else power
    return (C + isotropic_coefficient(m, N) * r2) ** p


def isotropic_mass(m: float, N: int, C: float) -> float:
    """Mass of the isotropic profile: pi^(N/2) k^(-N/2) C^(N/2-p) G(p-N/2)/G(p)."""
    from scipy.special import gamma as G

    k = isotropic_coefficient(m, N)
    p = 1.0 / (1.0 - m)
    return np.pi ** (N / 2) * k ** (-N / 2) * C ** (N / 2 - p) * G(p - N / 2) / G(p)


def isotropic_C_for_mass(m: float, N: int, M: float) -> float:
    p = 1.0 / (1.0 - m)
    return (M / isotropic_mass(m, N, 1.0)) ** (1.0 / (N / 2 - p))


def residual_stationary(F: Profile, me: MediumExponents, se: SimilarityExponents, y, h: float):
    """Central-difference value of sum_i [(F^{m_i})_{y_i y_i} + alpha sigma_i (y_i F)_{y_i}].

    ``y`` may hold many points (shape (..., N)); O(h^2) consistent.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    y = np.asarray(y, dtype=float)
    total = np.zeros(y.shape[:-1])
    for i, (mi, s) in enumerate(zip(me.m, se.sigma)):
        e = np.zeros(y.shape[-1])
        e[i] = h
        f0, fp, fm = F(y), F(y + e), F(y - e)
        if np.any(np.asarray(f0) <= 0) or np.any(np.asarray(fp) <= 0) or np.any(np.asarray(fm) <= 0):
            raise ValueError("profile is not positive near the evaluation point")
        diff2 = (fp**mi - 2.0 * f0**mi + fm**mi) / h**2
        drift = ((y[..., i] + h) * fp - (y[..., i] - h) * fm) / (2.0 * h)
        total = total + diff2 + se.alpha * s * drift
    return total


def residual_evolution_1d(U: Callable, m: float, x, t: float, h: float, dt: float):
    """u_t - (u^m)_xx by central differences for a solution U(x, t)."""
    x = np.asarray(x, dtype=float)
    ut = (U(x, t + dt) - U(x, t - dt)) / (2.0 * dt)
    uxx = (U(x + h, t) ** m - 2.0 * U(x, t) ** m + U(x - h, t) ** m) / h**2
    return ut - uxx


@dataclass(frozen=True)
class VssCalibration:
    """Axis amplitudes C_i, sandwich constants K1 <= K2 and an optional
    table of sphere values (directions, values)."""

    C: tuple[float, ...]
    K1: float
    K2: float
    sphere_directions: Optional[np.ndarray] = field(default=None, compare=False)
    sphere_values: Optional[np.ndarray] = field(default=None, compare=False)
    surrogate: bool = True

    def __post_init__(self):
        if any(not (0 < c < np.inf) for c in self.C):
            raise ValueError("axis constants must be positive and finite")
        if not 0 < self.K1 <= self.K2:
            raise ValueError("need 0 < K1 <= K2")
        if self.sphere_values is not None and np.any(np.asarray(self.sphere_values) <= 0):
            raise ValueError("sphere values must be positive")


def surrogate_calibration(me: MediumExponents) -> VssCalibration:
    """C_i = C(m_i;1); K1 = min C_i and K2 = N max C_i bracket the partition surrogate."""
    C = tuple(vss_constant_1d(mi) for mi in me.m)
    return VssCalibration(C=C, K1=min(C), K2=me.N * max(C), surrogate=True)


def _axis_terms(x, t, se: SimilarityExponents, cal: VssCalibration) -> np.ndarray:
    x = np.abs(np.asarray(x, dtype=float))
    mu = np.asarray(se.mu)
    C = np.asarray(cal.C)
    with np.errstate(divide="ignore"):
        terms = C * t**mu * np.where(x > 0, x, np.nan) ** (-2.0 * mu)
    return np.where(x > 0, terms, np.inf)


def partition_min(x, t: float, me: MediumExponents, se: SimilarityExponents, cal: VssCalibration):
    """min over axes with x_i != 0 of C_i t^{mu_i} |x_i|^{-2 mu_i}."""
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    if np.any(np.all(x == 0, axis=-1)):
        raise ValueError("partition surrogate is singular at x = 0")
    return np.min(_axis_terms(x, t, se, cal), axis=-1)


def active_axis(x, t: float, se: SimilarityExponents, cal: VssCalibration) -> np.ndarray:
    """Index attaining the partition minimum; ties go to the smallest index."""
    return np.argmin(_axis_terms(x, t, se, cal), axis=-1)


def partition_profile(me: MediumExponents, se: SimilarityExponents, cal: VssCalibration, t: float = 1.0) -> Profile:
    return lambda y: partition_min(y, t, me, se, cal)


def sandwich_bound(y, me: MediumExponents, K: float, se: Optional[SimilarityExponents] = None):
    """K / sum_i |y_i|^{2 mu_i}."""
    y = np.asarray(y, dtype=float)
    if np.any(np.all(y == 0, axis=-1)):
        raise ValueError("sandwich bound is singular at y = 0")
    mu = 1.0 / (1.0 - me.as_array())
    return K / np.sum(np.abs(y) ** (2.0 * mu), axis=-1)


def mass_rescale(F: Profile, k: float, se: SimilarityExponents) -> Profile:
    """y -> k F(k^{gamma_1} y_1, ..., k^{gamma_N} y_N); multiplies mass by k^beta."""
    if not k > 0:
        raise ValueError("k must be positive")
    scale = k ** np.asarray(se.gamma)
    return lambda y: k * F(np.asarray(y, dtype=float) * scale)


def sphere_value(omega, me, se, cal: VssCalibration):
    """C(omega) from the calibration table (nearest direction) or, when no
    table is present, from the partition surrogate on the sphere."""
    omega = np.asarray(omega, dtype=float)
    if cal.sphere_values is None:
        return partition_min(omega, 1.0, me, se, cal)
    dirs = np.asarray(cal.sphere_directions)
    idx = np.argmax(omega.reshape(-1, omega.shape[-1]) @ dirs.T, axis=-1)
    return np.asarray(cal.sphere_values)[idx].reshape(omega.shape[:-1])


def level_line(omega, L: float, me: MediumExponents, se: SimilarityExponents, cal: Optional[VssCalibration]):
    """Point on the level set {F = L} along the scaling curve through omega."""
    if cal is None:
        raise ValueError("level lines need a calibration (sphere table or axis constants)")
    omega = np.asarray(omega, dtype=float)
    if not np.allclose(np.linalg.norm(omega, axis=-1), 1.0, atol=1e-12):
        raise ValueError("omega must be a unit vector")
    if not L > 0:
        raise ValueError("level must be positive")
    C = np.asarray(sphere_value(omega, me, se, cal))[..., None]
    g = np.asarray(se.gamma)
    return omega * C**g * L ** (-g)


def vss_time_ratio(x, t: float, me: MediumExponents, se: SimilarityExponents, cal: VssCalibration):
    """t dV/dt / V for the partition surrogate: mu of the active axis."""
    if np.any(np.all(np.asarray(x) == 0, axis=-1)):
        raise ValueError("time ratio undefined at x = 0")
    return np.asarray(se.mu)[active_axis(x, t, se, cal)]


def delayed_relative_error(x, t: float, h: float, me, se, cal: VssCalibration):
    """(V(x,t+h) - V(x,t)) / (h V(x,t)) for the partition surrogate."""
    if not (t > 0 and h > 0):
        raise ValueError("t and h must be positive")
    v0 = partition_min(x, t, me, se, cal)
    v1 = partition_min(x, t + h, me, se, cal)
    return (v1 - v0) / (h * v0)
