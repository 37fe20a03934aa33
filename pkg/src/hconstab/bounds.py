"""Closed-form stability and generalization-gap constants.

All quantities are simple functions of the five regularity constants, the
context-row bound g_max, and the SGD hyperparameters. The growth factor
(1 + eta C)^T is evaluated in log space so iteration counts in the
thousands report +inf (with a warning) instead of crashing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import BoundOverflowWarning
from .regularity import RegularityConstants

_EXP_OVERFLOW = math.log(float.fromhex("0x1.fffffffffffffp+1023"))


@dataclass(frozen=True)
class BoundInputs:
    constants: RegularityConstants
    g_max: float
    eta: float
    T: int
    n: int
    delta: float = 0.05

    def __post_init__(self):
        if not self.g_max >= 0.0:
            raise ValueError("g_max must be nonnegative")
        if not self.eta > 0.0:
            raise ValueError("eta must be positive")
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")


def lemma1_constant(c: RegularityConstants, g_max: float) -> float:
    """Same-sample gradient-difference coefficient
    (alpha_ell nu_sigma + nu_ell alpha_sigma^2) g_max^2."""
    return (c.alpha_ell * c.nu_sigma + c.nu_ell * c.alpha_sigma**2) * g_max**2


def lemma2_constant(c: RegularityConstants, g_max: float) -> float:
    """Worst-case gradient-difference bound 2 alpha_ell alpha_sigma g_max."""
    return 2.0 * c.alpha_ell * c.alpha_sigma * g_max


def kappa0(b: BoundInputs) -> float:
    """Parameter-drift constant C' ((1 + eta C)^T - 1) / C.

    Evaluated as C' expm1(T log1p(eta C)) / C; the C -> 0 limit is
    eta C' T. Overflow returns +inf with a BoundOverflowWarning.
    """
    c = lemma1_constant(b.constants, b.g_max)
    c_prime = lemma2_constant(b.constants, b.g_max)
    if b.T == 0:
        return 0.0
    if c == 0.0:
        return b.eta * c_prime * b.T
    exponent = b.T * math.log1p(b.eta * c)
    if exponent > _EXP_OVERFLOW:
        warnings.warn(
            f"drift constant overflowed (T ln(1+eta C) = {exponent:.3g}); "
            "reporting +inf",
            BoundOverflowWarning,
            stacklevel=2,
        )
        return math.inf
    return c_prime * math.expm1(exponent) / c


def kappa(b: BoundInputs) -> float:
    """Uniform-stability constant alpha_ell alpha_sigma g_max kappa0."""
    return b.constants.alpha_ell * b.constants.alpha_sigma * b.g_max * kappa0(b)


def gap_bound(b: BoundInputs) -> float:
    """High-probability generalization-gap bound
    kappa/n + (2 kappa + gamma_ell)/sqrt(n) * sqrt(ln(1/delta)/2)."""
    k = kappa(b)
    if math.isinf(k):
        return math.inf
    spread = (2.0 * k + b.constants.gamma_ell) / math.sqrt(b.n)
    return k / b.n + spread * math.sqrt(math.log(1.0 / b.delta) / 2.0)


def gap_perturbation_bound(b: BoundInputs) -> float:
    """Bounded-difference constant (2 kappa + gamma_ell) / n."""
    k = kappa(b)
    if math.isinf(k):
        return math.inf
    return (2.0 * k + b.constants.gamma_ell) / b.n
