"""Numerics for the anisotropic fast diffusion equation
u_t = sum_i (u^{m_i})_{x_i x_i}: exponents, closed forms, solvers, local mass
bounds and long-time experiments."""

__version__ = "0.1.0"

from .errors import ConfigError, NumericalFailure, VerificationFailure  # noqa: E402
from .similarity import derive_similarity, validate_exponents  # noqa: E402

__all__ = ["ConfigError", "NumericalFailure", "VerificationFailure", "derive_similarity", "validate_exponents", "__version__"]
