"""Command-line entry point with reproducible configuration.

Every subcommand resolves one RunConfig from (defaults < config file <
flags), echoes the resolved config into the metadata header of each
output file, and derives all randomness from the master seed. Re-running
any command with the same config and seed produces byte-identical files.

Exit codes: 0 success, 1 error, 2 success with warnings (overflowed
bounds, excluded diverged trials, or an empirically violated bound).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import data_io
from .bounds import (
    BoundInputs,
    gap_bound,
    gap_perturbation_bound,
    kappa,
    kappa0,
    lemma1_constant,
    lemma2_constant,
)
from .data_io import (
    LabeledHypergraphDataset,
    build_cocitation,
    export_csv,
    format_metadata,
    load_dataset,
    save_dataset,
    synth_planted,
)
from .errors import HconstabError
from .experiments import (
    ExperimentConfig,
    SplitSpec,
    epoch_trace_experiment,
    gap_experiment,
    make_split,
    normalization_comparison,
    stability_trial,
    training_set,
    vertex_context_for,
)
from .features import FeatureMatrix, column_normalize
from .hypergraph import NormalizedIncidence, Scale, spectral_norm
from .model import grad_vertex, preactivation_vertex
from .regularity import (
    activation_from_name,
    loss_from_name,
    regularity_constants,
)
from .trainer import Sample, derive_seed, init_params

ENV_OUT_DIR = "HCONSTAB_OUTDIR"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_WARNINGS = 2


@dataclass(frozen=True)
class RunConfig:
    dataset: str | None = None
    pairs: str | None = None
    name: str | None = None
    synth_n: int = 200
    synth_m: int = 150
    synth_classes: int = 2
    synth_homophily: float = 0.9
    synth_noise: float = 0.1
    synth_seed: int = 7
    activation: str = "sigmoid"
    act_epsilon: float = 0.1
    loss: str = "squared"
    bce_clip: float = 0.1
    y_min: float = 0.0
    y_max: float = 1.0
    alpha: float = 0.9
    alphas: tuple = (0.5, 0.7, 0.9)
    eta: float = 0.01
    etas: tuple = (0.005, 0.01, 0.02)
    epochs: int = 200
    steps: int = 200
    test_fraction: float = 0.3
    train_fraction: float = 0.5
    train_fractions: tuple = (0.3, 0.4, 0.5, 0.6, 0.7)
    split_seed: int = 1
    trials: int = 10
    probes: int = 50
    i_star: int = 0
    master_seed: int = 42
    init_scale: float = 0.1
    normalization: str = "normalized"
    delta: float = 0.05
    normalize_features: bool = True
    normalize_edge_features: bool = True
    drop_isolated: bool = False
    emit_plot_script: bool = False
    corrupt_g_max: float = 1.0  # verify-command fault-injection hook
    out_dir: str = "."
    jobs: int = 1

    def echo(self) -> dict:
        """Resolved config as JSON-safe dict; excludes fields that do not
        affect results (output location, worker count)."""
        d = dataclasses.asdict(self)
        d.pop("out_dir")
        d.pop("jobs")
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}


def _parse_floats(text: str) -> tuple:
    return tuple(float(x) for x in text.split(",") if x.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hconstab",
        description="Hypergraph collaborative network stability workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("configuration")
    g.add_argument("--config", help="JSON config file; flags override it")
    g.add_argument("--dataset", help="path to a .hgd.json dataset")
    g.add_argument("--name", help="dataset name for synth/ingest outputs")
    g.add_argument("--synth-n", type=int)
    g.add_argument("--synth-m", type=int)
    g.add_argument("--synth-classes", type=int)
    g.add_argument("--synth-homophily", type=float)
    g.add_argument("--synth-noise", type=float)
    g.add_argument("--synth-seed", type=int)
    g.add_argument("--activation",
                   choices=["sigmoid", "tanh", "elu", "smoothed-relu"])
    g.add_argument("--act-epsilon", type=float)
    g.add_argument("--loss", choices=["squared", "clipped-bce"])
    g.add_argument("--bce-clip", type=float)
    g.add_argument("--y-min", type=float)
    g.add_argument("--y-max", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--alphas", type=_parse_floats, metavar="A1,A2,...")
    g.add_argument("--eta", type=float)
    g.add_argument("--etas", type=_parse_floats, metavar="E1,E2,...")
    g.add_argument("--epochs", type=int)
    g.add_argument("--steps", type=int, help="SGD iteration count T")
    g.add_argument("--test-fraction", type=float)
    g.add_argument("--train-fraction", type=float)
    g.add_argument("--train-fractions", type=_parse_floats, metavar="F1,F2,...")
    g.add_argument("--split-seed", type=int)
    g.add_argument("--trials", type=int, help="independent randomizations R")
    g.add_argument("--probes", type=int)
    g.add_argument("--i-star", type=int)
    g.add_argument("--master-seed", type=int)
    g.add_argument("--init-scale", type=float)
    g.add_argument("--normalization", choices=["normalized", "raw"])
    g.add_argument("--delta", type=float)
    g.add_argument("--normalize-features",
                   action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--normalize-edge-features",
                   action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--drop-isolated",
                   action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--emit-plot-script",
                   action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--corrupt-g-max", type=float, help=argparse.SUPPRESS)
    g.add_argument("--out-dir")
    g.add_argument("--jobs", type=int)
    g.add_argument("--pairs", help="citation pair file for ingest")

    for name, help_text in [
        ("bounds", "print every closed-form constant for the config"),
        ("train", "run one training and record its epoch trace"),
        ("stability", "paired-run uniform-stability measurement"),
        ("gap-sweep", "gap statistics over the fraction/alpha/eta grid"),
        ("epochs", "per-epoch train/test loss trace"),
        ("norm-compare", "normalized vs raw incidence comparison"),
        ("synth", "generate a planted-partition dataset file"),
        ("ingest", "build a dataset file from citation pairs"),
        ("verify", "run the full invariant suite"),
    ]:
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    from_file: dict = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            from_file = json.load(fh)
        unknown = set(from_file) - {f.name for f in dataclasses.fields(RunConfig)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    merged = {}
    for f in dataclasses.fields(RunConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            merged[f.name] = flag_value
        elif f.name in from_file:
            value = from_file[f.name]
            merged[f.name] = tuple(value) if isinstance(value, list) else value
    if "out_dir" not in merged and os.environ.get(ENV_OUT_DIR):
        merged["out_dir"] = os.environ[ENV_OUT_DIR]
    return RunConfig(**merged)


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------


def _activation(cfg: RunConfig):
    return activation_from_name(cfg.activation, cfg.act_epsilon)


def _loss(cfg: RunConfig):
    return loss_from_name(cfg.loss, cfg.bce_clip, cfg.y_min, cfg.y_max)


def _scale(cfg: RunConfig) -> Scale:
    return Scale(cfg.normalization)


def _split_spec(cfg: RunConfig) -> SplitSpec:
    return SplitSpec(
        test_fraction=cfg.test_fraction,
        train_fractions=tuple(cfg.train_fractions),
        split_seed=cfg.split_seed,
    )


def _xcfg(cfg: RunConfig) -> ExperimentConfig:
    return ExperimentConfig(
        epochs=cfg.epochs,
        init_scale=cfg.init_scale,
        master_seed=cfg.master_seed,
        delta=cfg.delta,
        jobs=cfg.jobs,
    )


def resolve_dataset(cfg: RunConfig) -> LabeledHypergraphDataset:
    """Load the configured dataset or synthesize the default one, then
    apply the configured per-matrix feature normalization."""
    if cfg.dataset:
        d = load_dataset(cfg.dataset)
    else:
        d = synth_planted(
            n=cfg.synth_n, m=cfg.synth_m, classes=cfg.synth_classes,
            homophily=cfg.synth_homophily, feature_noise=cfg.synth_noise,
            seed=cfg.synth_seed, name=cfg.name,
        )
    x_v = column_normalize(d.x_v) if cfg.normalize_features else d.x_v
    x_e = column_normalize(d.x_e) if cfg.normalize_edge_features else d.x_e
    if x_v is not d.x_v or x_e is not d.x_e:
        d = dataclasses.replace(d, x_v=x_v, x_e=x_e)
    return d


def _metadata(cfg: RunConfig) -> dict:
    return {
        "master_seed": cfg.master_seed,
        "generator": data_io.GENERATOR_NAME,
        "config": cfg.echo(),
    }


def _out_path(cfg: RunConfig, filename: str) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return os.path.join(cfg.out_dir, filename)


def _write_table_csv(path: str, metadata: dict, columns: list[str], rows: list[dict]):
    lines = format_metadata(metadata)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(data_io._fmt(row[c]) for c in columns))
    data_io._atomic_write(path, "\n".join(lines) + "\n")


def _context(cfg: RunConfig, dataset: LabeledHypergraphDataset, alpha: float):
    ctx = vertex_context_for(dataset, alpha, _scale(cfg))
    if cfg.corrupt_g_max != 1.0:
        ctx = dataclasses.replace(ctx, g_max=ctx.g_max * cfg.corrupt_g_max)
    return ctx


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_bounds(cfg: RunConfig) -> int:
    dataset = resolve_dataset(cfg)
    act, loss = _activation(cfg), _loss(cfg)
    constants = regularity_constants(act, loss)
    scale = _scale(cfg)
    ni = NormalizedIncidence.build(dataset.hypergraph, scale)
    mu = spectral_norm(ni)
    ctx = _context(cfg, dataset, cfg.alpha)
    split = make_split(dataset, _split_spec(cfg))
    n = len(split.train_subset(cfg.train_fraction))
    b = BoundInputs(
        constants=constants, g_max=ctx.g_max, eta=cfg.eta, T=cfg.steps,
        n=n, delta=cfg.delta,
    )
    values = {
        "mu": mu,
        "g_max": ctx.g_max,
        "alpha_sigma": constants.alpha_sigma,
        "nu_sigma": constants.nu_sigma,
        "alpha_ell": constants.alpha_ell,
        "nu_ell": constants.nu_ell,
        "gamma_ell": constants.gamma_ell,
        "lemma1_C": lemma1_constant(constants, ctx.g_max),
        "lemma2_C_prime": lemma2_constant(constants, ctx.g_max),
        "kappa0": kappa0(b),
        "kappa": kappa(b),
        "gap_bound": gap_bound(b),
        "gap_perturbation_bound": gap_perturbation_bound(b),
        "n": n,
        "T": cfg.steps,
        "eta": cfg.eta,
        "delta": cfg.delta,
        "alpha": cfg.alpha,
        "normalization": scale.value,
    }
    width = max(len(k) for k in values)
    for key, val in values.items():
        print(f"{key:<{width}}  {data_io._fmt(val)}")
    _write_table_csv(
        _out_path(cfg, "bounds.csv"), _metadata(cfg),
        list(values.keys()), [values],
    )
    if math.isinf(values["gap_bound"]):
        print("warning: gap bound overflowed to +inf")
        return EXIT_WARNINGS
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    dataset = resolve_dataset(cfg)
    traces = epoch_trace_experiment(
        dataset, _split_spec(cfg), cfg.train_fraction, cfg.alpha, cfg.eta,
        cfg.epochs, 1, _xcfg(cfg), _activation(cfg), _loss(cfg),
        normalization=_scale(cfg),
    )
    export_csv(traces, _out_path(cfg, "train_trace.csv"), _metadata(cfg))
    last = traces[-1]
    print(
        f"final epoch {last.epoch}: train_loss={last.train_loss:.6g} "
        f"test_loss={last.test_loss:.6g} gap={last.test_loss - last.train_loss:.6g}"
    )
    if math.isnan(last.train_loss):
        print("warning: the training run diverged")
        return EXIT_WARNINGS
    return EXIT_OK


def _stability_inputs(cfg: RunConfig, dataset: LabeledHypergraphDataset):
    split = make_split(dataset, _split_spec(cfg))
    train_idx = split.train_subset(cfg.train_fraction)
    s = training_set(dataset, train_idx)
    # replacement comes from the held-out pool, so it always differs
    repl_vertex = int(split.test[0])
    replacement = Sample(repl_vertex, float(dataset.labels[repl_vertex]))
    pool = dataset.labeled_vertices()
    rng = np.random.default_rng(derive_seed(cfg.master_seed, 424242))
    k = min(cfg.probes, len(pool))
    probe_vertices = rng.choice(pool, size=k, replace=False)
    probes = [Sample(int(v), float(dataset.labels[v])) for v in probe_vertices]
    return s, replacement, probes


def cmd_stability(cfg: RunConfig) -> int:
    dataset = resolve_dataset(cfg)
    act, loss = _activation(cfg), _loss(cfg)
    ctx = _context(cfg, dataset, cfg.alpha)
    s, replacement, probes = _stability_inputs(cfg, dataset)
    report = stability_trial(
        ctx, s, cfg.i_star, replacement, probes, cfg.trials, cfg.eta,
        cfg.steps, cfg.init_scale, act, loss, cfg.master_seed,
    )
    margin = report.stability_bound - report.empirical_max
    print(f"n={report.n} T={cfg.steps} eta={cfg.eta} trials={report.trials}")
    print(f"empirical max |E_A[loss diff]| = {report.empirical_max:.6g}")
    print(f"stability bound kappa/n       = {report.stability_bound:.6g}")
    print(f"margin                        = {margin:.6g}")
    print(f"mean final drift              = {report.mean_final_drift:.6g}")
    print(f"drift bound kappa0/n          = {report.drift_bound:.6g}")
    ck = report.checks
    print(
        "per-step checks: "
        f"lemma1 {ck.lemma1_checked - ck.lemma1_violations}/{ck.lemma1_checked}, "
        f"lemma2 {ck.lemma2_checked - ck.lemma2_violations}/{ck.lemma2_checked}, "
        f"recursion {ck.recursion_checked - ck.recursion_violations}/"
        f"{ck.recursion_checked}"
    )
    columns = [
        "n", "T", "eta", "trials", "probes", "empirical_max",
        "stability_bound", "margin", "kappa", "kappa0", "mean_final_drift",
        "drift_bound", "lemma1_checked", "lemma1_violations",
        "lemma2_checked", "lemma2_violations", "recursion_checked",
        "recursion_violations", "failed_runs",
    ]
    row = {
        "n": report.n, "T": cfg.steps, "eta": cfg.eta,
        "trials": report.trials, "probes": report.probes,
        "empirical_max": report.empirical_max,
        "stability_bound": report.stability_bound, "margin": margin,
        "kappa": report.kappa, "kappa0": report.kappa0,
        "mean_final_drift": report.mean_final_drift,
        "drift_bound": report.drift_bound,
        "lemma1_checked": ck.lemma1_checked,
        "lemma1_violations": ck.lemma1_violations,
        "lemma2_checked": ck.lemma2_checked,
        "lemma2_violations": ck.lemma2_violations,
        "recursion_checked": ck.recursion_checked,
        "recursion_violations": ck.recursion_violations,
        "failed_runs": report.failed_runs,
    }
    _write_table_csv(
        _out_path(cfg, "stability.csv"), _metadata(cfg), columns, [row]
    )
    warn = False
    if report.failed_runs:
        print(f"warning: {report.failed_runs} diverged runs excluded")
        warn = True
    if not ck.all_hold or (
        not math.isnan(report.empirical_max)
        and report.empirical_max > report.stability_bound
    ):
        print("FALSIFICATION: an inequality was violated; see counters above")
        warn = True
    return EXIT_WARNINGS if warn else EXIT_OK


def cmd_gap_sweep(cfg: RunConfig) -> int:
    dataset = resolve_dataset(cfg)
    records = gap_experiment(
        dataset, _split_spec(cfg), list(cfg.alphas), list(cfg.etas),
        cfg.trials, _xcfg(cfg), _activation(cfg), _loss(cfg),
        normalization=_scale(cfg),
    )
    export_csv(records, _out_path(cfg, "gap_sweep.csv"), _metadata(cfg))
    warn = False
    for rec in records:
        if math.isfinite(rec.theoretical_bound) and not math.isnan(rec.gap_mean):
            if rec.gap_mean > rec.theoretical_bound:
                print(
                    f"FALSIFICATION: gap_mean {rec.gap_mean:.6g} exceeds bound "
                    f"{rec.theoretical_bound:.6g} at n={rec.n} "
                    f"alpha={rec.alpha} eta={rec.eta}"
                )
                warn = True
        if math.isinf(rec.theoretical_bound):
            warn = True
        if rec.failed_trials:
            print(
                f"warning: {rec.failed_trials} diverged trials at n={rec.n} "
                f"alpha={rec.alpha} eta={rec.eta}"
            )
            warn = True
    print(f"wrote {len(records)} records to gap_sweep.csv")
    if cfg.emit_plot_script:
        _emit_gap_plot_script(cfg)
    return EXIT_WARNINGS if warn else EXIT_OK


def cmd_epochs(cfg: RunConfig) -> int:
    dataset = resolve_dataset(cfg)
    traces = epoch_trace_experiment(
        dataset, _split_spec(cfg), cfg.train_fraction, cfg.alpha, cfg.eta,
        cfg.epochs, cfg.trials, _xcfg(cfg), _activation(cfg), _loss(cfg),
        normalization=_scale(cfg),
    )
    export_csv(traces, _out_path(cfg, "epoch_trace.csv"), _metadata(cfg))
    last = traces[-1]
    print(
        f"final epoch {last.epoch}: train={last.train_loss:.6g} "
        f"test={last.test_loss:.6g} gap={last.test_loss - last.train_loss:.6g}"
    )
    if cfg.emit_plot_script:
        _emit_epoch_plot_script(cfg, "epoch_trace.csv", "epoch_trace.gp")
    return EXIT_WARNINGS if math.isnan(last.train_loss) else EXIT_OK


def cmd_norm_compare(cfg: RunConfig) -> int:
    dataset = resolve_dataset(cfg)
    comparison = normalization_comparison(
        dataset, _split_spec(cfg), cfg.train_fraction, cfg.alpha, cfg.eta,
        cfg.epochs, cfg.trials, _xcfg(cfg), _activation(cfg), _loss(cfg),
    )
    meta = _metadata(cfg)
    export_csv(
        comparison.traces_normalized,
        _out_path(cfg, "epoch_trace_normalized.csv"),
        {**meta, "normalization": "normalized"},
    )
    export_csv(
        comparison.traces_raw,
        _out_path(cfg, "epoch_trace_raw.csv"),
        {**meta, "normalization": "raw"},
    )
    print(f"mu normalized = {comparison.mu_normalized:.6g}")
    print(f"mu raw        = {comparison.mu_raw:.6g}")
    print(f"final gap normalized = {comparison.final_gap_normalized:.6g}")
    print(f"final gap raw        = {comparison.final_gap_raw:.6g}")
    print(f"bound normalized = {data_io._fmt(comparison.bound_normalized)}")
    print(f"bound raw        = {data_io._fmt(comparison.bound_raw)}")
    if cfg.emit_plot_script:
        _emit_norm_plot_script(cfg)
    warn = (
        math.isnan(comparison.final_gap_raw)
        or math.isinf(comparison.bound_raw)
        or math.isinf(comparison.bound_normalized)
    )
    if warn:
        print("warning: raw-mode run diverged or a bound overflowed")
    return EXIT_WARNINGS if warn else EXIT_OK


def cmd_synth(cfg: RunConfig) -> int:
    dataset = synth_planted(
        n=cfg.synth_n, m=cfg.synth_m, classes=cfg.synth_classes,
        homophily=cfg.synth_homophily, feature_noise=cfg.synth_noise,
        seed=cfg.synth_seed, name=cfg.name,
    )
    path = _out_path(cfg, f"{dataset.name}.hgd.json")
    save_dataset(dataset, path)
    print(
        f"wrote {path}: {dataset.hypergraph.n_vertices} vertices, "
        f"{dataset.hypergraph.n_edges} hyperedges"
    )
    return EXIT_OK


def cmd_ingest(cfg: RunConfig) -> int:
    if not cfg.pairs:
        raise ValueError("ingest needs --pairs FILE with one "
                         "'citing cited' pair per line")
    pairs = []
    with open(cfg.pairs, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ValueError(
                    f"{cfg.pairs}:{line_no}: expected 'citing cited'"
                )
            pairs.append((parts[0], parts[1]))
    hg, index = build_cocitation(pairs, drop_isolated=cfg.drop_isolated)
    # no vertex features in a bare citation list: fall back to a constant
    # column; hyperedge features default to member means
    x_v = column_normalize(
        FeatureMatrix(np.ones((hg.n_vertices, 1)))
    )
    member_mean = np.stack(
        [x_v.data[list(e)].mean(axis=0) for e in hg.edges]
    )
    x_e = column_normalize(FeatureMatrix(member_mean))
    dataset = LabeledHypergraphDataset(
        hypergraph=hg, x_v=x_v, x_e=x_e,
        labels=np.full(hg.n_vertices, math.nan),
        name=cfg.name or "ingested",
    )
    path = _out_path(cfg, f"{dataset.name}.hgd.json")
    save_dataset(dataset, path)
    print(
        f"wrote {path}: {hg.n_vertices} documents, {hg.n_edges} hyperedges"
    )
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    dataset = resolve_dataset(cfg)
    act, loss = _activation(cfg), _loss(cfg)
    constants = regularity_constants(act, loss)
    checks: dict[str, dict] = {}

    def record(name: str, passed: bool, detail: str):
        checks[name] = {"passed": bool(passed), "detail": detail}

    # spectral contract of the normalized incidence operator
    ni = NormalizedIncidence.build(dataset.hypergraph, Scale.NORMALIZED)
    mu = spectral_norm(ni)
    record(
        "spectral_norm_contract",
        mu <= 1.0 + 1e-10 and abs(mu - 1.0) <= 1e-8,
        f"mu={mu!r}",
    )
    v = np.sqrt(ni.degs.d_v.astype(float))
    v /= np.linalg.norm(v)
    residual = float(np.linalg.norm(ni.matvec(ni.rmatvec(v)) - v))
    record(
        "dominant_eigenvector_residual", residual <= 1e-10, f"residual={residual!r}"
    )
    x = np.sqrt(ni.degs.d_e.astype(float))
    relation = float(
        np.linalg.norm(ni.matvec(x) - np.sqrt(ni.degs.d_v.astype(float)))
    )
    record(
        "matvec_eigen_relation", relation <= 1e-10, f"deviation={relation!r}"
    )

    # context-row and gradient-norm bounds (the fault-injection hook
    # scales g_max, so these are the checks it trips)
    ctx = _context(cfg, dataset, cfg.alpha)
    row_norms = np.linalg.norm(ctx.stacked_rows(), axis=1)
    worst = float(np.max(row_norms))
    record(
        "context_row_bound",
        worst <= ctx.g_max + 1e-9,
        f"max row norm {worst!r} vs g_max {ctx.g_max!r}",
    )

    rng = np.random.default_rng(derive_seed(cfg.master_seed, 515151))
    f_v, f_e = dataset.x_v.cols, dataset.x_e.cols
    grad_cap = constants.alpha_ell * constants.alpha_sigma * ctx.g_max
    lo, hi = loss.label_range
    worst_grad = 0.0
    worst_fd = 0.0
    worst_lip = 0.0
    for _ in range(40):
        theta = init_params(
            (f_v, f_e, 1), int(rng.integers(1 << 62)), cfg.init_scale
        )
        v_idx = int(rng.integers(dataset.hypergraph.n_vertices))
        y = float(rng.uniform(max(lo, 0.0), min(hi, 1.0)))
        grad = grad_vertex(ctx, theta, v_idx, act, loss, y)
        worst_grad = max(worst_grad, grad.norm())
        fd = _fd_gradient(ctx, theta, v_idx, act, loss, y)
        denom = max(np.linalg.norm(fd), 1e-12)
        an = np.concatenate([grad.q_v[:, 0], grad.q_e[:, 0]])
        worst_fd = max(worst_fd, float(np.linalg.norm(fd - an)) / denom)
        theta2 = init_params(
            (f_v, f_e, 1), int(rng.integers(1 << 62)), cfg.init_scale
        )
        d1 = float(preactivation_vertex(ctx, theta, v_idx)[0])
        d2 = float(preactivation_vertex(ctx, theta2, v_idx)[0])
        dtheta = float(
            np.sqrt(
                np.sum((theta.q_v - theta2.q_v) ** 2)
                + np.sum((theta.q_e - theta2.q_e) ** 2)
            )
        )
        if dtheta > 0:
            worst_lip = max(worst_lip, abs(d1 - d2) / dtheta)
    record(
        "gradient_norm_bound",
        worst_grad <= grad_cap + 1e-9,
        f"max grad norm {worst_grad!r} vs alpha_ell*alpha_sigma*g_max {grad_cap!r}",
    )
    record(
        "gradient_finite_difference",
        worst_fd <= 1e-6,
        f"max relative error {worst_fd!r}",
    )
    record(
        "preactivation_lipschitz",
        worst_lip <= ctx.g_max + 1e-9,
        f"max |d - d'|/|dtheta| {worst_lip!r} vs g_max {ctx.g_max!r}",
    )

    # short paired runs exercising the per-step inequalities
    s, replacement, probes = _stability_inputs(cfg, dataset)
    report = stability_trial(
        ctx, s, cfg.i_star, replacement, probes, min(cfg.trials, 5), cfg.eta,
        min(cfg.steps, 200), cfg.init_scale, act, loss, cfg.master_seed,
    )
    ck = report.checks
    record(
        "paired_lemma1",
        ck.lemma1_violations == 0,
        f"{ck.lemma1_violations} violations in {ck.lemma1_checked} steps",
    )
    record(
        "paired_lemma2",
        ck.lemma2_violations == 0,
        f"{ck.lemma2_violations} violations in {ck.lemma2_checked} steps",
    )
    record(
        "paired_drift_recursion",
        ck.recursion_violations == 0,
        f"{ck.recursion_violations} violations in {ck.recursion_checked} steps",
    )
    record(
        "expected_drift_bound",
        report.mean_final_drift <= report.drift_bound + 1e-9,
        f"mean drift {report.mean_final_drift!r} vs {report.drift_bound!r}",
    )

    passed = all(c["passed"] for c in checks.values())
    summary = {"passed": passed, "checks": checks}
    path = _out_path(cfg, "verify_summary.json")
    data_io._atomic_write(path, json.dumps(summary, indent=1, sort_keys=True) + "\n")
    for name, c in checks.items():
        print(f"{'PASS' if c['passed'] else 'FAIL'} {name}: {c['detail']}")
    if not passed:
        first = next(n for n, c in checks.items() if not c["passed"])
        print(f"verification failed at check: {first}")
        return EXIT_ERROR
    print("all invariant checks passed")
    return EXIT_OK


def _fd_gradient(ctx, theta, v, act, loss, y, h: float = 1e-6):
    """Central finite differences of the per-vertex loss over theta."""
    base = np.concatenate([theta.q_v[:, 0], theta.q_e[:, 0]])
    row = ctx.row(v)

    def loss_at(w):
        return loss.value(float(np.asarray(act.value(float(row @ w)))), y)

    out = np.empty_like(base)
    for k in range(base.size):
        w_plus, w_minus = base.copy(), base.copy()
        w_plus[k] += h
        w_minus[k] -= h
        out[k] = (loss_at(w_plus) - loss_at(w_minus)) / (2.0 * h)
    return out


# ---------------------------------------------------------------------------
# Plot scripts (gnuplot command files)
# ---------------------------------------------------------------------------

_GP_PREAMBLE = (
    "set datafile separator ','\n"
    "set datafile commentschars '#'\n"
    "set key outside\n"
)


def _emit_gap_plot_script(cfg: RunConfig) -> None:
    text = (
        _GP_PREAMBLE
        + "set xlabel 'training set size n'\n"
        + "set ylabel 'generalization gap'\n"
        + "plot 'gap_sweep.csv' using 1:6 with points title 'gap mean'\n"
    )
    data_io._atomic_write(_out_path(cfg, "gap_sweep.gp"), text)


def _emit_epoch_plot_script(cfg: RunConfig, csv_name: str, gp_name: str) -> None:
    text = (
        _GP_PREAMBLE
        + "set xlabel 'epoch'\n"
        + "set ylabel 'loss'\n"
        + f"plot '{csv_name}' using 1:2 with lines title 'train', \\\n"
        + f"     '{csv_name}' using 1:3 with lines title 'test'\n"
    )
    data_io._atomic_write(_out_path(cfg, gp_name), text)


def _emit_norm_plot_script(cfg: RunConfig) -> None:
    text = (
        _GP_PREAMBLE
        + "set xlabel 'epoch'\n"
        + "set ylabel 'generalization gap'\n"
        + "plot 'epoch_trace_normalized.csv' using 1:($3-$2) with lines "
        + "title 'normalized', \\\n"
        + "     'epoch_trace_raw.csv' using 1:($3-$2) with lines title 'raw'\n"
    )
    data_io._atomic_write(_out_path(cfg, "norm_compare.gp"), text)


COMMANDS = {
    "bounds": cmd_bounds,
    "train": cmd_train,
    "stability": cmd_stability,
    "gap-sweep": cmd_gap_sweep,
    "epochs": cmd_epochs,
    "norm-compare": cmd_norm_compare,
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (HconstabError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
