"""Stability and generalization-gap studies on labeled hypergraph datasets.

The sampling distribution behind the theory is realized as the uniform
distribution over the labeled vertex pool: training sets are prefixes of a
seed-shuffled pool, the test loss is the exact mean over the held-out
vertices, and the expectation over SGD randomizations is proxied by R
independent trials whose sub-seeds derive from one master seed. Grid
order, trial seeds, and aggregation order are all fixed by the config, so
parallel execution cannot change any output.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bounds import BoundInputs, gap_bound, kappa, kappa0
from .data_io import LabeledHypergraphDataset
from .errors import (
    IndexOutOfRangeError,
    NonFiniteParameterError,
    SameSampleError,
)
from .hypergraph import NormalizedIncidence, Scale, spectral_norm
from .model import VertexContext, build_vertex_context
from .regularity import Activation, Loss, regularity_constants
from .trainer import (
    LemmaCheckStats,
    Sample,
    SgdConfig,
    TrainingSet,
    derive_seed,
    draw_randomization,
    init_params,
    paired_train,
    sgd_loop,
    sgd_train,
)


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float
    train_fractions: tuple[float, ...]
    split_seed: int = 1

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        for f in self.train_fractions:
            if not 0.0 < f <= 1.0:
                raise ValueError("train fractions must lie in (0, 1]")
            if f + self.test_fraction > 1.0 + 1e-12:
                raise ValueError(
                    f"train fraction {f} overlaps the test fraction"
                )


@dataclass(frozen=True)
class PoolSplit:
    """Shuffled labeled pool: fixed test block plus a nested train pool."""

    test: np.ndarray
    train_pool: np.ndarray
    pool_size: int

    def train_subset(self, fraction: float) -> np.ndarray:
        k = round(fraction * self.pool_size)
        if k < 1 or k > len(self.train_pool):
            raise ValueError(
                f"train fraction {fraction} asks for {k} of "
                f"{len(self.train_pool)} available vertices"
            )
        return self.train_pool[:k]


def make_split(dataset: LabeledHypergraphDataset, spec: SplitSpec) -> PoolSplit:
    pool = dataset.labeled_vertices()
    rng = np.random.default_rng(spec.split_seed)
    perm = rng.permutation(pool)
    n_test = round(spec.test_fraction * len(pool))
    if n_test < 1 or n_test >= len(pool):
        raise ValueError("test fraction leaves an empty test or train pool")
    return PoolSplit(
        test=perm[:n_test], train_pool=perm[n_test:], pool_size=len(pool)
    )


@dataclass(frozen=True)
class GapRecord:
    n: int
    alpha: float
    eta: float
    normalization: str
    trials: int
    gap_mean: float
    gap_std: float
    train_loss_mean: float
    test_loss_mean: float
    kappa: float
    theoretical_bound: float
    failed_trials: int


@dataclass(frozen=True)
class EpochTrace:
    epoch: int
    train_loss: float
    test_loss: float


@dataclass(frozen=True)
class ExperimentConfig:
    epochs: int = 200
    init_scale: float = 0.1
    master_seed: int = 42
    delta: float = 0.05
    jobs: int = 1


def trial_seeds(
    master: int, n: int, alpha: float, eta: float, trial: int
) -> tuple[int, int]:
    """(init_seed, sampling_seed) for one trial of one grid cell.

    The path encodes the cell by value, not grid position, so any command
    evaluating the same (n, alpha, eta) cell reuses the same seeds; raw
    and normalized runs are deliberately paired on identical seeds.
    """
    akey = round(alpha * 1_000_000)
    ekey = round(eta * 1_000_000_000)
    return (
        derive_seed(master, n, akey, ekey, trial, 0),
        derive_seed(master, n, akey, ekey, trial, 1),
    )


def vertex_context_for(
    dataset: LabeledHypergraphDataset,
    alpha: float,
    scale: Scale = Scale.NORMALIZED,
) -> VertexContext:
    ni = NormalizedIncidence.build(dataset.hypergraph, scale)
    return build_vertex_context(ni, dataset.x_v, dataset.x_e, alpha)


def training_set(dataset: LabeledHypergraphDataset, vertices) -> TrainingSet:
    return TrainingSet(
        samples=tuple(
            Sample(int(v), float(dataset.labels[v])) for v in vertices
        )
    )


def perturb(s: TrainingSet, i_star: int, replacement: Sample) -> TrainingSet:
    """Copy of S with position i_star replaced; the replacement must differ."""
    if not 0 <= i_star < s.n:
        raise IndexOutOfRangeError(i_star, s.n, what="sample")
    if replacement == s.samples[i_star]:
        raise SameSampleError(
            f"replacement equals the original sample at position {i_star}"
        )
    samples = list(s.samples)
    samples[i_star] = replacement
    return TrainingSet(samples=tuple(samples))


def _mean_loss(rows, labels, w, act: Activation, loss: Loss) -> float:
    return float(np.mean(loss.value(act.value(rows @ w), labels)))


def _gap_trial(payload):
    """One independent training run; top-level so worker pools can run it."""
    (train_rows, train_labels, test_rows, test_labels, eta, t_total,
     init_seed, samp_seed, init_scale, act, loss, f_v, f_e) = payload
    theta0 = init_params((f_v, f_e, 1), init_seed, init_scale)
    rand = draw_randomization(len(train_labels), t_total, samp_seed)
    try:
        w, _ = sgd_loop(
            train_rows, train_labels, theta0.stacked()[:, 0],
            rand.sequence, eta, act, loss,
        )
    except NonFiniteParameterError:
        return None
    train_loss = float(np.mean(loss.value(act.value(train_rows @ w), train_labels)))
    test_loss = float(np.mean(loss.value(act.value(test_rows @ w), test_labels)))
    return train_loss, test_loss


def gap_experiment(
    dataset: LabeledHypergraphDataset,
    split: SplitSpec,
    alphas: Sequence[float],
    etas: Sequence[float],
    R: int,
    xcfg: ExperimentConfig,
    act: Activation,
    loss: Loss,
    normalization: Scale = Scale.NORMALIZED,
) -> list[GapRecord]:
    """Gap statistics over the (train fraction, alpha, eta) grid.

    Each cell averages R independent runs; rows come out in deterministic
    grid order (fractions outer, then alphas, then etas). Diverged runs
    are excluded from the means and counted in failed_trials.
    """
    if R < 1:
        raise ValueError("R must be at least 1")
    pool_split = make_split(dataset, split)
    constants = regularity_constants(act, loss)
    contexts: dict[float, VertexContext] = {}
    f_v, f_e = dataset.x_v.cols, dataset.x_e.cols

    payloads = []
    cells = []
    for fraction in split.train_fractions:
        train_idx = pool_split.train_subset(fraction)
        s = training_set(dataset, train_idx)
        n = s.n
        train_labels = s.labels()
        for alpha in alphas:
            if alpha not in contexts:
                contexts[alpha] = vertex_context_for(dataset, alpha, normalization)
            ctx = contexts[alpha]
            rows_all = ctx.stacked_rows()
            train_rows = rows_all[s.vertices()]
            test_rows = rows_all[pool_split.test]
            test_labels = dataset.labels[pool_split.test]
            for eta in etas:
                t_total = xcfg.epochs * n
                cells.append((n, alpha, eta, ctx))
                for r in range(R):
                    init_seed, samp_seed = trial_seeds(
                        xcfg.master_seed, n, alpha, eta, r
                    )
                    payloads.append(
                        (train_rows, train_labels, test_rows, test_labels,
                         eta, t_total, init_seed, samp_seed, xcfg.init_scale,
                         act, loss, f_v, f_e)
                    )

    if xcfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=xcfg.jobs) as pool:
            outcomes = list(pool.map(_gap_trial, payloads, chunksize=1))
    else:
        outcomes = [_gap_trial(p) for p in payloads]

    records = []
    for c, (n, alpha, eta, ctx) in enumerate(cells):
        cell_outcomes = outcomes[c * R:(c + 1) * R]
        ok = [o for o in cell_outcomes if o is not None]
        failed = R - len(ok)
        t_total = xcfg.epochs * n
        b = BoundInputs(
            constants=constants, g_max=ctx.g_max, eta=eta, T=t_total,
            n=n, delta=xcfg.delta,
        )
        kap = kappa(b)
        bound = gap_bound(b)
        if ok:
            train_losses = np.array([o[0] for o in ok])
            test_losses = np.array([o[1] for o in ok])
            gaps = test_losses - train_losses
            gap_mean = float(np.mean(gaps))
            gap_std = float(np.std(gaps, ddof=1)) if len(ok) > 1 else 0.0
            train_mean = float(np.mean(train_losses))
            test_mean = float(np.mean(test_losses))
        else:
            gap_mean = gap_std = train_mean = test_mean = math.nan
        records.append(
            GapRecord(
                n=n, alpha=alpha, eta=eta,
                normalization=normalization.value,
                trials=len(ok), gap_mean=gap_mean, gap_std=gap_std,
                train_loss_mean=train_mean, test_loss_mean=test_mean,
                kappa=kap, theoretical_bound=bound, failed_trials=failed,
            )
        )
    return records


def epoch_trace_experiment(
    dataset: LabeledHypergraphDataset,
    split: SplitSpec,
    fraction: float,
    alpha: float,
    eta: float,
    epochs: int,
    R: int,
    xcfg: ExperimentConfig,
    act: Activation,
    loss: Loss,
    normalization: Scale = Scale.NORMALIZED,
) -> list[EpochTrace]:
    """Per-epoch train/test losses averaged over R runs.

    One epoch is one cycle of n SGD steps; epoch 0 reports the losses of
    the random initialization. Seeds match gap_experiment's, so the final
    epoch reproduces the corresponding gap record.
    """
    pool_split = make_split(dataset, split)
    train_idx = pool_split.train_subset(fraction)
    s = training_set(dataset, train_idx)
    n = s.n
    ctx = vertex_context_for(dataset, alpha, normalization)
    rows_all = ctx.stacked_rows()
    train_rows = rows_all[s.vertices()]
    train_labels = s.labels()
    test_rows = rows_all[pool_split.test]
    test_labels = dataset.labels[pool_split.test]
    t_total = epochs * n

    sum_train = np.zeros(epochs + 1)
    sum_test = np.zeros(epochs + 1)
    completed = 0
    for r in range(R):
        init_seed, samp_seed = trial_seeds(xcfg.master_seed, n, alpha, eta, r)
        theta0 = init_params(
            (dataset.x_v.cols, dataset.x_e.cols, 1), init_seed, xcfg.init_scale
        )
        rand = draw_randomization(n, t_total, samp_seed)
        cfg = SgdConfig(
            eta=eta, T=t_total, init_seed=init_seed,
            init_scale=xcfg.init_scale, record_trajectory=True,
        )
        try:
            _, trajectory = sgd_train(ctx, theta0, s, rand, cfg, act, loss)
        except NonFiniteParameterError:
            continue
        snapshots = trajectory[::n]  # (epochs + 1, F)
        d_train = train_rows @ snapshots.T
        d_test = test_rows @ snapshots.T
        sum_train += np.mean(
            loss.value(act.value(d_train), train_labels[:, None]), axis=0
        )
        sum_test += np.mean(
            loss.value(act.value(d_test), test_labels[:, None]), axis=0
        )
        completed += 1
    if completed == 0:
        return [
            EpochTrace(epoch=e, train_loss=math.nan, test_loss=math.nan)
            for e in range(epochs + 1)
        ]
    return [
        EpochTrace(
            epoch=e,
            train_loss=float(sum_train[e] / completed),
            test_loss=float(sum_test[e] / completed),
        )
        for e in range(epochs + 1)
    ]


@dataclass(frozen=True)
class NormalizationComparison:
    traces_normalized: list[EpochTrace]
    traces_raw: list[EpochTrace]
    mu_normalized: float
    mu_raw: float
    bound_normalized: float
    bound_raw: float

    @property
    def final_gap_normalized(self) -> float:
        last = self.traces_normalized[-1]
        return last.test_loss - last.train_loss

    @property
    def final_gap_raw(self) -> float:
        last = self.traces_raw[-1]
        return last.test_loss - last.train_loss


def normalization_comparison(
    dataset: LabeledHypergraphDataset,
    split: SplitSpec,
    fraction: float,
    alpha: float,
    eta: float,
    epochs: int,
    R: int,
    xcfg: ExperimentConfig,
    act: Activation,
    loss: Loss,
) -> NormalizationComparison:
    """Identical-seed epoch traces under normalized and raw incidence.

    Raw-mode bounds are computed from mu(H); raw-mode divergence is an
    expected outcome and shows up as NaN trace entries, not an error.
    """
    traces = {}
    mus = {}
    bounds_ = {}
    constants = regularity_constants(act, loss)
    pool_split = make_split(dataset, split)
    n = len(pool_split.train_subset(fraction))
    for scale in (Scale.NORMALIZED, Scale.RAW):
        traces[scale] = epoch_trace_experiment(
            dataset, split, fraction, alpha, eta, epochs, R, xcfg, act, loss,
            normalization=scale,
        )
        ni = NormalizedIncidence.build(dataset.hypergraph, scale)
        mus[scale] = spectral_norm(ni)
        ctx = vertex_context_for(dataset, alpha, scale)
        b = BoundInputs(
            constants=constants, g_max=ctx.g_max, eta=eta,
            T=epochs * n, n=n, delta=xcfg.delta,
        )
        bounds_[scale] = gap_bound(b)
    return NormalizationComparison(
        traces_normalized=traces[Scale.NORMALIZED],
        traces_raw=traces[Scale.RAW],
        mu_normalized=mus[Scale.NORMALIZED],
        mu_raw=mus[Scale.RAW],
        bound_normalized=bounds_[Scale.NORMALIZED],
        bound_raw=bounds_[Scale.RAW],
    )


@dataclass
class StabilityReport:
    n: int
    trials: int
    probes: int
    empirical_max: float
    stability_bound: float  # kappa / n
    kappa: float
    kappa0: float
    mean_final_drift: float
    drift_bound: float  # kappa0 / n
    per_probe_means: np.ndarray
    checks: LemmaCheckStats
    failed_runs: int


def stability_trial(
    ctx: VertexContext,
    s: TrainingSet,
    i_star: int,
    replacement: Sample,
    probes: Sequence[Sample],
    R: int,
    eta: float,
    T: int,
    init_scale: float,
    act: Activation,
    loss: Loss,
    master_seed: int,
    check_tol: float = 1e-9,
) -> StabilityReport:
    """Empirical uniform-stability measurement against kappa / n.

    Trains S and its one-sample perturbation S' under R shared
    randomizations, averages the per-probe loss differences over the
    randomizations, and reports the worst probe alongside the bound. The
    per-step gradient inequality counters from all paired runs are merged
    into one stats block.
    """
    if R < 1:
        raise ValueError("R must be at least 1")
    if not probes:
        raise ValueError("need at least one probe")
    s_prime = perturb(s, i_star, replacement)
    constants = regularity_constants(act, loss)
    n = s.n
    f_v = ctx.A.shape[1]
    f_e = ctx.B.shape[1]
    rows_all = ctx.stacked_rows()
    probe_rows = rows_all[[p.vertex for p in probes]]
    probe_labels = np.array([p.label for p in probes])

    totals = LemmaCheckStats(tol=check_tol)
    probe_diff_sum = np.zeros(len(probes))
    drift_sum = 0.0
    failed = 0
    completed = 0
    for r in range(R):
        init_seed, samp_seed = trial_seeds(master_seed, n, ctx.alpha, eta, r)
        theta0 = init_params((f_v, f_e, 1), init_seed, init_scale)
        rand = draw_randomization(n, T, samp_seed)
        cfg = SgdConfig(eta=eta, T=T, init_seed=init_seed, init_scale=init_scale)
        try:
            result = paired_train(
                ctx, theta0, s, s_prime, rand, cfg, act, loss,
                check_constants=constants, check_tol=check_tol,
            )
        except NonFiniteParameterError:
            failed += 1
            continue
        totals.merge(result.checks)
        drift_sum += result.delta_norms[-1]
        w = result.theta.stacked()[:, 0]
        w_p = result.theta_prime.stacked()[:, 0]
        losses = loss.value(act.value(probe_rows @ w), probe_labels)
        losses_p = loss.value(act.value(probe_rows @ w_p), probe_labels)
        probe_diff_sum += losses - losses_p
        completed += 1

    b = BoundInputs(constants=constants, g_max=ctx.g_max, eta=eta, T=T, n=n)
    k0 = kappa0(b)
    k = kappa(b)
    if completed:
        per_probe = probe_diff_sum / completed
        empirical_max = float(np.max(np.abs(per_probe)))
        mean_drift = drift_sum / completed
    else:
        per_probe = np.full(len(probes), math.nan)
        empirical_max = math.nan
        mean_drift = math.nan
    return StabilityReport(
        n=n, trials=completed, probes=len(probes),
        empirical_max=empirical_max, stability_bound=k / n,
        kappa=k, kappa0=k0, mean_final_drift=mean_drift,
        drift_bound=k0 / n, per_probe_means=per_probe,
        checks=totals, failed_runs=failed,
    )
