"""Closed-form error bounds and probability floors for NNLS recovery.

Every function here is a pure scalar formula. The driving constant is

    K(p, eta) = sqrt(2 log(sqrt(2) p / (sqrt(pi) eta)))

(natural log), the Gaussian tail level that makes p simultaneous one-sided
tail events fail with probability at most eta. The bounds take the two
design-condition values as inputs: nu (orthant-restricted l1-eigenvalue
lower bound) and phi (cone-restricted compatibility value, squared scale).
They do not recompute them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import CoefficientVector, as_vector


@dataclass(frozen=True)
class BoundInputs:
    """Problem-size and condition parameters shared by the bound formulas.

    eta is the allowed failure probability; the guarantees are stated for
    eta in (0, 1/3), values outside only warn so the formulas stay usable
    in plots.
    """

    p: int
    n: int
    s: int
    sigma: float
    eta: float
    nu: float
    phi: float

    def __post_init__(self):
        if self.p < 1 or self.n < 1 or self.s < 1:
            raise ValueError("p, n, s must be positive integers")
        if self.s > self.p:
            raise ValueError("s cannot exceed p")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if self.eta >= 1.0 / 3.0:
            warnings.warn("eta >= 1/3: outside the guaranteed range, formula still evaluated")
        if self.nu <= 0 or self.phi <= 0:
            raise ValueError("nu and phi must be positive")


def gaussian_tail_constant(p: int, eta: float) -> float:
    """K(p, eta) = sqrt(2 log(sqrt(2) p / (sqrt(pi) eta))), clipped at zero.

    Strictly increasing in p and decreasing in eta. For very large eta the
    squared value goes negative; the root is clipped to 0 with a warning.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    if eta <= 0:
        raise ValueError("eta must be positive")
    if eta >= 1.0 / 3.0:
        warnings.warn("eta >= 1/3: outside the guaranteed range, formula still evaluated")
    k_sq = 2.0 * math.log(math.sqrt(2.0) * p / (math.sqrt(math.pi) * eta))
    if k_sq < 0:
        warnings.warn("tail constant squared is negative at this eta; returning 0")
        return 0.0
    return math.sqrt(k_sq)


def coefficient_l1_bound(inp: BoundInputs) -> float:
    """High-probability bound on ||beta_hat - beta*||_1:
    K (5/nu + 4/sqrt(phi)) s sigma / sqrt(n)."""
    k = gaussian_tail_constant(inp.p, inp.eta)
    return k * (5.0 / inp.nu + 4.0 / math.sqrt(inp.phi)) * inp.s * inp.sigma / math.sqrt(inp.n)


def min_signal_threshold(inp: BoundInputs) -> float:
    """Smallest on-support coefficient size the l1 guarantee asks for:
    K sigma / sqrt(n phi)."""
    k = gaussian_tail_constant(inp.p, inp.eta)
    return k * inp.sigma / math.sqrt(inp.n * inp.phi)


def support_recovery_betamin(inp: BoundInputs) -> float:
    """Signal level at which the s largest fitted coefficients recover the
    support: exactly twice coefficient_l1_bound."""
    return 2.0 * coefficient_l1_bound(inp)


def oracle_prediction_bound(inp: BoundInputs) -> float:
    """Bound on ||X(beta_oracle - beta_hat)||_2^2:
    2 K^2 sigma^2 (5/nu + 2/sqrt(phi)) s.

    The compatibility coefficient here is 2/sqrt(phi), half the one in the
    l1 bound.
    """
    k = gaussian_tail_constant(inp.p, inp.eta)
    return 2.0 * k * k * inp.sigma**2 * (5.0 / inp.nu + 2.0 / math.sqrt(inp.phi)) * inp.s


def residual_gradient_threshold(C: float, sigma: float, n: int) -> float:
    """Level C sigma sqrt(n) that the off-support residual inner products
    stay below with probability at least 1 - p(1 - Phi(C))."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if sigma < 0 or C < 0:
        raise ValueError("C and sigma must be nonnegative")
    return C * sigma * math.sqrt(n)


def gaussian_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def joint_recovery_floor(p: int, s: int, C: float) -> float:
    """1 - (p + s)(1 - Phi(C)): floor for the joint sign-and-gradient event."""
    return 1.0 - (p + s) * (1.0 - gaussian_cdf(C))


def oracle_coincidence_floor(s: int, C: float) -> float:
    """1 - s(1 - Phi(C)): floor for restricted OLS matching the oracle."""
    return 1.0 - s * (1.0 - gaussian_cdf(C))


def gradient_event_floor(p: int, C: float) -> float:
    """1 - p(1 - Phi(C)): floor for all off-support gradients staying small."""
    return 1.0 - p * (1.0 - gaussian_cdf(C))


def top_s_support(beta_hat, s: int) -> np.ndarray:
    """Indices of the s largest |beta_hat| entries, lower index wins ties."""
    v = beta_hat.values if isinstance(beta_hat, CoefficientVector) else as_vector(beta_hat)
    if s < 0 or s > v.size:
        raise ValueError(f"s must lie in [0, {v.size}]")
    order = np.argsort(-np.abs(v), kind="stable")
    return np.sort(order[:s])
