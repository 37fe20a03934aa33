"""Deterministic single-sample SGD, including lockstep paired training.

Every source of randomness flows through numpy's PCG64 generator seeded
from explicit 64-bit integers, so any run is bit-reproducible from its
seeds. `derive_seed` is the single seed-splitting rule used everywhere:
sub-seeds are drawn from SeedSequence([master, *path]) where the path is a
tuple of nonnegative integers identifying the consumer. The paired runner
trains two one-sample-apart training sets under the same sampling sequence
and the same initial parameters, tracing the parameter drift and checking
the per-step gradient inequalities the drift analysis relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import (
    DimensionMismatchError,
    IndexOutOfRangeError,
    LabelOutOfRangeError,
    NonFiniteParameterError,
    NotAUnitPerturbationError,
)
from .model import Theta, VertexContext
from .regularity import Activation, Loss, RegularityConstants
from .bounds import lemma1_constant, lemma2_constant

GENERATOR_NAME = "numpy-pcg64"


class Sample(NamedTuple):
    vertex: int
    label: float


@dataclass(frozen=True)
class TrainingSet:
    samples: tuple[Sample, ...]

    def __post_init__(self):
        if not self.samples:
            raise ValueError("training set must be non-empty")

    @property
    def n(self) -> int:
        return len(self.samples)

    def vertices(self) -> np.ndarray:
        return np.array([s.vertex for s in self.samples], dtype=np.int64)

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=float)


@dataclass(frozen=True)
class Randomization:
    """The SGD sampling sequence (i_1, ..., i_T), fixed by (seed, n, T)."""

    seed: int
    sequence: np.ndarray


@dataclass(frozen=True)
class SgdConfig:
    eta: float
    T: int
    init_seed: int = 0
    init_scale: float = 0.1
    record_trajectory: bool = False

    def __post_init__(self):
        if not (self.eta > 0.0 and math.isfinite(self.eta)):
            raise ValueError("eta must be positive and finite")
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        if not (self.init_scale >= 0.0 and math.isfinite(self.init_scale)):
            raise ValueError("init_scale must be nonnegative and finite")


def derive_seed(master: int, *path: int) -> int:
    """Documented seed-splitting rule: SeedSequence([master, *path])."""
    ss = np.random.SeedSequence([int(master), *[int(p) for p in path]])
    return int(ss.generate_state(1, np.uint64)[0])


def draw_randomization(n: int, T: int, seed: int) -> Randomization:
    """T uniform draws from [0, n) with replacement, PCG64-seeded."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if T < 0:
        raise ValueError("T must be nonnegative")
    rng = np.random.default_rng(seed)
    seq = rng.integers(0, n, size=T, dtype=np.int64)
    return Randomization(seed=int(seed), sequence=seq)


def init_params(
    shape: tuple[int, int, int], seed: int, scale: float
) -> Theta:
    """Uniform [-scale, scale] initialization of (Q_V, Q_E), output dim O."""
    f_v, f_e, o = shape
    rng = np.random.default_rng(seed)
    return Theta(
        q_v=rng.uniform(-scale, scale, size=(f_v, o)),
        q_e=rng.uniform(-scale, scale, size=(f_e, o)),
    )


def _prepare(ctx: VertexContext, s: TrainingSet, loss: Loss):
    verts = s.vertices()
    if verts.size and (verts.min() < 0 or verts.max() >= ctx.n_vertices):
        bad = verts[(verts < 0) | (verts >= ctx.n_vertices)][0]
        raise IndexOutOfRangeError(int(bad), ctx.n_vertices)
    labels = s.labels()
    lo, hi = loss.label_range
    if labels.size and (labels.min() < lo or labels.max() > hi):
        raise LabelOutOfRangeError(f"training label outside [{lo}, {hi}]")
    rows = ctx.stacked_rows()[verts]
    return rows, labels


def _unstack(w: np.ndarray, f_v: int) -> Theta:
    return Theta(q_v=w[:f_v, None].copy(), q_e=w[f_v:, None].copy())


def sgd_loop(
    rows: np.ndarray,
    labels: np.ndarray,
    w0: np.ndarray,
    sequence: np.ndarray,
    eta: float,
    act: Activation,
    loss: Loss,
    record: bool = False,
) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Core update loop on precomputed per-sample context rows.

    rows[i] is the stacked context row of training sample i; w0 is the
    stacked parameter vector. Raises NonFiniteParameterError with the
    step index when a run diverges.
    """
    w = w0.astype(float).copy()
    trajectory = None
    if record:
        trajectory = np.empty((len(sequence) + 1, w.size))
        trajectory[0] = w
    for t in range(len(sequence)):
        i = sequence[t]
        g = rows[i]
        d = float(g @ w)
        if not math.isfinite(d):
            raise NonFiniteParameterError(t)
        y_hat, slope = act.scalar_value_deriv(d)
        step = eta * loss.scalar_deriv(y_hat, labels[i]) * slope
        if not math.isfinite(step):
            raise NonFiniteParameterError(t)
        w -= step * g
        if trajectory is not None:
            trajectory[t + 1] = w
    if not np.isfinite(w).all():
        raise NonFiniteParameterError(len(sequence))
    return w, trajectory


def sgd_train(
    ctx: VertexContext,
    theta0: Theta,
    s: TrainingSet,
    a: Randomization,
    cfg: SgdConfig,
    act: Activation,
    loss: Loss,
) -> tuple[Theta, Optional[np.ndarray]]:
    """Run exactly T single-sample updates in the order given by `a`.

    Returns the final parameters and, when cfg.record_trajectory is set,
    the (T+1, F_V+F_E) array of stacked parameter vectors after each step.
    """
    if theta0.output_dim != 1:
        raise DimensionMismatchError("training is implemented for O = 1")
    if len(a.sequence) != cfg.T:
        raise DimensionMismatchError(
            f"randomization has {len(a.sequence)} indices, config says T={cfg.T}"
        )
    rows, labels = _prepare(ctx, s, loss)
    w0 = theta0.stacked()[:, 0]
    w, trajectory = sgd_loop(
        rows, labels, w0, a.sequence, cfg.eta, act, loss,
        record=cfg.record_trajectory,
    )
    return _unstack(w, theta0.q_v.shape[0]), trajectory


@dataclass
class LemmaCheckStats:
    """Per-step inequality counters accumulated over paired SGD runs.

    Excess values are the largest observed LHS - RHS; a negative excess
    means the inequality held with margin everywhere.
    """

    tol: float = 1e-9
    steps: int = 0
    lemma1_checked: int = 0
    lemma1_violations: int = 0
    lemma1_max_excess: float = -math.inf
    lemma2_checked: int = 0
    lemma2_violations: int = 0
    lemma2_max_excess: float = -math.inf
    recursion_checked: int = 0
    recursion_violations: int = 0
    recursion_max_excess: float = -math.inf

    def merge(self, other: "LemmaCheckStats") -> None:
        self.steps += other.steps
        self.lemma1_checked += other.lemma1_checked
        self.lemma1_violations += other.lemma1_violations
        self.lemma1_max_excess = max(self.lemma1_max_excess, other.lemma1_max_excess)
        self.lemma2_checked += other.lemma2_checked
        self.lemma2_violations += other.lemma2_violations
        self.lemma2_max_excess = max(self.lemma2_max_excess, other.lemma2_max_excess)
        self.recursion_checked += other.recursion_checked
        self.recursion_violations += other.recursion_violations
        self.recursion_max_excess = max(
            self.recursion_max_excess, other.recursion_max_excess
        )

    @property
    def all_hold(self) -> bool:
        return (
            self.lemma1_violations == 0
            and self.lemma2_violations == 0
            and self.recursion_violations == 0
        )


@dataclass
class PairedRunResult:
    theta: Theta
    theta_prime: Theta
    delta_norms: np.ndarray  # length T+1, ||theta_t - theta'_t||
    i_star: int
    t_star: Optional[int]  # first step sampling i_star, None if never
    checks: Optional[LemmaCheckStats] = None


def _find_perturbed_index(s: TrainingSet, s_prime: TrainingSet) -> int:
    if s.n != s_prime.n:
        raise NotAUnitPerturbationError(
            f"training sets have different sizes {s.n} and {s_prime.n}"
        )
    diff = [i for i, (a, b) in enumerate(zip(s.samples, s_prime.samples)) if a != b]
    if len(diff) != 1:
        raise NotAUnitPerturbationError(
            f"training sets differ in {len(diff)} positions, expected exactly 1"
        )
    return diff[0]


def paired_train(
    ctx: VertexContext,
    theta0: Theta,
    s: TrainingSet,
    s_prime: TrainingSet,
    a: Randomization,
    cfg: SgdConfig,
    act: Activation,
    loss: Loss,
    check_constants: Optional[RegularityConstants] = None,
    check_tol: float = 1e-9,
) -> PairedRunResult:
    """Train on S and S' in lockstep under one sampling sequence.

    The two sets must differ in exactly one position i*. The drift
    ||theta_t - theta'_t|| is recorded at every step; before the first
    occurrence of i* it must be exactly zero (identical arithmetic on
    identical data). With check_constants given, the same-sample and
    cross-sample gradient inequalities and the per-step drift recursion
    are verified at every step and tallied in the returned stats.
    """
    if theta0.output_dim != 1:
        raise DimensionMismatchError("training is implemented for O = 1")
    if len(a.sequence) != cfg.T:
        raise DimensionMismatchError(
            f"randomization has {len(a.sequence)} indices, config says T={cfg.T}"
        )
    i_star = _find_perturbed_index(s, s_prime)
    rows, labels = _prepare(ctx, s, loss)
    rows_p, labels_p = _prepare(ctx, s_prime, loss)

    w = theta0.stacked()[:, 0].astype(float).copy()
    w_p = w.copy()
    f_v = theta0.q_v.shape[0]
    eta = cfg.eta

    stats = None
    c1 = c2 = single_bound = None
    if check_constants is not None:
        stats = LemmaCheckStats(tol=check_tol)
        c1 = lemma1_constant(check_constants, ctx.g_max)
        c2 = lemma2_constant(check_constants, ctx.g_max)
        single_bound = 0.5 * c2  # alpha_ell alpha_sigma g_max

    delta_norms = np.empty(cfg.T + 1)
    delta_norms[0] = 0.0
    t_star = None

    for t in range(cfg.T):
        i = int(a.sequence[t])
        hit = i == i_star
        if hit and t_star is None:
            t_star = t

        g = rows[i]
        d = float(g @ w)
        if not math.isfinite(d):
            raise NonFiniteParameterError(t)
        y_hat, slope = act.scalar_value_deriv(d)
        grad = (loss.scalar_deriv(y_hat, labels[i]) * slope) * g

        g_p = rows_p[i]
        d_p = float(g_p @ w_p)
        if not math.isfinite(d_p):
            raise NonFiniteParameterError(t)
        y_hat_p, slope_p = act.scalar_value_deriv(d_p)
        grad_p = (loss.scalar_deriv(y_hat_p, labels_p[i]) * slope_p) * g_p

        if stats is not None:
            stats.steps += 1
            prev_delta = delta_norms[t]
            diff = float(np.linalg.norm(grad - grad_p))
            excess2 = max(
                float(np.linalg.norm(grad)) - single_bound,
                float(np.linalg.norm(grad_p)) - single_bound,
                diff - c2,
            )
            stats.lemma2_checked += 1
            stats.lemma2_max_excess = max(stats.lemma2_max_excess, excess2)
            if excess2 > check_tol:
                stats.lemma2_violations += 1
            if not hit:
                stats.lemma1_checked += 1
                excess1 = diff - c1 * prev_delta
                stats.lemma1_max_excess = max(stats.lemma1_max_excess, excess1)
                if excess1 > check_tol:
                    stats.lemma1_violations += 1

        w = w - eta * grad
        w_p = w_p - eta * grad_p
        dn = float(np.linalg.norm(w - w_p))
        delta_norms[t + 1] = dn

        if t_star is None and dn != 0.0:
            raise AssertionError(
                f"nonzero parameter drift at step {t} before the first "
                f"occurrence of the perturbed sample"
            )
        if stats is not None:
            stats.recursion_checked += 1
            allowed = (1.0 + eta * c1) * delta_norms[t] + (eta * c2 if hit else 0.0)
            excess_r = dn - allowed
            stats.recursion_max_excess = max(stats.recursion_max_excess, excess_r)
            if excess_r > check_tol:
                stats.recursion_violations += 1

    if not (np.isfinite(w).all() and np.isfinite(w_p).all()):
        raise NonFiniteParameterError(cfg.T)
    return PairedRunResult(
        theta=_unstack(w, f_v),
        theta_prime=_unstack(w_p, f_v),
        delta_norms=delta_norms,
        i_star=i_star,
        t_star=t_star,
        checks=stats,
    )
