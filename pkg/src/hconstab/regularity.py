"""Activations and losses together with their regularity constants.

Every bound in the analysis is driven by five numbers: the Lipschitz and
smoothness constants of the activation (alpha_sigma, nu_sigma) and the
Lipschitz, smoothness, and range constants of the loss (alpha_ell, nu_ell,
gamma_ell). Each activation/loss implemented here reports its tightest
known constants.

The smoothness constants of sigmoid and tanh are the suprema of the second
derivatives, sqrt(3)/18 and 4*sqrt(3)/9; the grid-maximization oracle that
double-checks these closed forms lives in tests/test_regularity.py.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import LabelOutOfRangeError

NU_SIGMOID = math.sqrt(3.0) / 18.0
NU_TANH = 4.0 * math.sqrt(3.0) / 9.0


@dataclass(frozen=True)
class RegularityConstants:
    alpha_sigma: float
    nu_sigma: float
    alpha_ell: float
    nu_ell: float
    gamma_ell: float


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------


class Sigmoid:
    name = "sigmoid"

    def value(self, x):
        return expit(x)

    def deriv(self, x):
        s = expit(x)
        return s * (1.0 - s)

    def scalar_value_deriv(self, x: float) -> tuple[float, float]:
        # overflow-safe branch; used by the sequential SGD hot loop
        if x >= 0.0:
            z = math.exp(-x)
            s = 1.0 / (1.0 + z)
        else:
            z = math.exp(x)
            s = z / (1.0 + z)
        return s, s * (1.0 - s)

    def constants(self) -> tuple[float, float]:
        return 0.25, NU_SIGMOID


class Tanh:
    name = "tanh"

    def value(self, x):
        return np.tanh(x)

    def deriv(self, x):
        t = np.tanh(x)
        return 1.0 - t * t

    def scalar_value_deriv(self, x: float) -> tuple[float, float]:
        t = math.tanh(x)
        return t, 1.0 - t * t

    def constants(self) -> tuple[float, float]:
        return 1.0, NU_TANH


class Elu:
    """Exponential linear unit with unit negative-branch scale."""

    name = "elu"

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))
        return out if out.ndim else float(out)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0.0, 1.0, np.exp(np.minimum(x, 0.0)))
        return out if out.ndim else float(out)

    def scalar_value_deriv(self, x: float) -> tuple[float, float]:
        if x > 0.0:
            return x, 1.0
        return math.expm1(x), math.exp(x)

    def constants(self) -> tuple[float, float]:
        return 1.0, 1.0


@dataclass(frozen=True)
class SmoothedRelu:
    """C1 ramp: 0 below -eps, (x+eps)^2/(4 eps) on [-eps, eps], x above.

    The quadratic knee has value 0 and slope 0 at -eps, value eps and
    slope 1 at +eps, so both the function and its derivative are
    continuous; the second derivative of the knee is 1/(2 eps).
    """

    epsilon: float

    name = "smoothed-relu"

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        t = np.clip(x, -self.epsilon, self.epsilon)
        knee = (t + self.epsilon) ** 2 / (4.0 * self.epsilon)
        out = np.where(x > self.epsilon, x, knee)
        return out if out.ndim else float(out)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        out = np.clip((x + self.epsilon) / (2.0 * self.epsilon), 0.0, 1.0)
        return out if out.ndim else float(out)

    def scalar_value_deriv(self, x: float) -> tuple[float, float]:
        eps = self.epsilon
        if x > eps:
            return x, 1.0
        if x < -eps:
            return 0.0, 0.0
        return (x + eps) ** 2 / (4.0 * eps), (x + eps) / (2.0 * eps)

    def constants(self) -> tuple[float, float]:
        return 1.0, 1.0 / (2.0 * self.epsilon)


Activation = Sigmoid | Tanh | Elu | SmoothedRelu


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def _check_labels(y, lo: float, hi: float) -> None:
    if np.any(np.asarray(y) < lo) or np.any(np.asarray(y) > hi):
        raise LabelOutOfRangeError(f"label outside [{lo}, {hi}]")


@dataclass(frozen=True)
class ClippedBce:
    """Binary cross-entropy -y ln(yhat) with yhat clipped to [clip, 1].

    Clipping bounds the loss by ln(1/clip) and restores Lipschitz
    continuity. Below the clip the loss is constant in yhat, so the
    reported derivative there is 0; at the clip boundary the one-sided
    interior derivative -y/clip is used.
    """

    clip: float

    name = "clipped-bce"

    def __post_init__(self):
        if not 0.0 < self.clip < 1.0:
            raise ValueError("clip must lie in (0, 1)")

    @property
    def label_range(self) -> tuple[float, float]:
        return 0.0, 1.0

    @property
    def prediction_range(self) -> tuple[float, float]:
        """Domain on which the Lipschitz/smoothness constants are tight;
        outside it the clipped loss is constant."""
        return self.clip, 1.0

    def value(self, y_hat, y):
        _check_labels(y, 0.0, 1.0)
        c = np.clip(y_hat, self.clip, 1.0)
        out = -np.asarray(y, dtype=float) * np.log(c)
        return out if out.ndim else float(out)

    def deriv(self, y_hat, y):
        _check_labels(y, 0.0, 1.0)
        y_hat = np.asarray(y_hat, dtype=float)
        inside = (y_hat >= self.clip) & (y_hat <= 1.0)
        out = np.where(
            inside, -np.asarray(y, dtype=float) / np.clip(y_hat, self.clip, 1.0), 0.0
        )
        return out if out.ndim else float(out)

    def scalar_value(self, y_hat: float, y: float) -> float:
        c = min(max(y_hat, self.clip), 1.0)
        return -y * math.log(c)

    def scalar_deriv(self, y_hat: float, y: float) -> float:
        if self.clip <= y_hat <= 1.0:
            return -y / y_hat
        return 0.0

    def constants(self) -> tuple[float, float, float]:
        return 1.0 / self.clip, 1.0 / self.clip**2, math.log(1.0 / self.clip)


@dataclass(frozen=True)
class Squared:
    """Squared error on a bounded label interval.

    Predictions are clamped to [y_min, y_max] before evaluation; the
    derivative is the interior formula 2 (clamp(yhat) - y), which is
    continuous in the raw prediction.
    """

    y_min: float
    y_max: float

    name = "squared"

    def __post_init__(self):
        if not self.y_min < self.y_max:
            raise ValueError("y_min must be < y_max")

    @property
    def label_range(self) -> tuple[float, float]:
        return self.y_min, self.y_max

    @property
    def prediction_range(self) -> tuple[float, float]:
        return self.y_min, self.y_max

    def value(self, y_hat, y):
        _check_labels(y, self.y_min, self.y_max)
        c = np.clip(y_hat, self.y_min, self.y_max)
        out = (c - np.asarray(y, dtype=float)) ** 2
        return out if out.ndim else float(out)

    def deriv(self, y_hat, y):
        _check_labels(y, self.y_min, self.y_max)
        c = np.clip(y_hat, self.y_min, self.y_max)
        out = 2.0 * (c - np.asarray(y, dtype=float))
        return out if out.ndim else float(out)

    def scalar_value(self, y_hat: float, y: float) -> float:
        c = min(max(y_hat, self.y_min), self.y_max)
        return (c - y) ** 2

    def scalar_deriv(self, y_hat: float, y: float) -> float:
        c = min(max(y_hat, self.y_min), self.y_max)
        return 2.0 * (c - y)

    def constants(self) -> tuple[float, float, float]:
        rng = self.y_max - self.y_min
        return 2.0 * rng, 2.0, rng * rng


Loss = ClippedBce | Squared


def regularity_constants(act: Activation, loss: Loss) -> RegularityConstants:
    a_s, n_s = act.constants()
    a_l, n_l, g_l = loss.constants()
    return RegularityConstants(
        alpha_sigma=a_s, nu_sigma=n_s, alpha_ell=a_l, nu_ell=n_l, gamma_ell=g_l
    )


def activation_from_name(name: str, epsilon: float = 0.1) -> Activation:
    table = {
        "sigmoid": lambda: Sigmoid(),
        "tanh": lambda: Tanh(),
        "elu": lambda: Elu(),
        "smoothed-relu": lambda: SmoothedRelu(epsilon),
    }
    if name not in table:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(table)}")
    return table[name]()


def loss_from_name(
    name: str, clip: float = 0.1, y_min: float = 0.0, y_max: float = 1.0
) -> Loss:
    table = {
        "clipped-bce": lambda: ClippedBce(clip),
        "squared": lambda: Squared(y_min, y_max),
    }
    if name not in table:
        raise ValueError(f"unknown loss {name!r}; choose from {sorted(table)}")
    return table[name]()
