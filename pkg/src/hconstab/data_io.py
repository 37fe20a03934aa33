"""Dataset ingestion, synthetic generation, and result serialization.

Datasets travel as a single JSON document (extension .hgd.json) holding
the edge lists, dense feature matrices, and labels (null where missing).
Result CSVs carry a '#'-prefixed metadata header (master seed, generator
name, config echo) followed by a fixed column schema; floats are printed
with 17 significant digits so a write/read round trip is exact.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import (
    DatasetParseError,
    DatasetSchemaError,
    DegenerateInstanceError,
    EmptyEdgeError,
    HconstabError,
)
from .features import FeatureMatrix, column_normalize
from .hypergraph import Hypergraph, from_edge_lists
from .trainer import GENERATOR_NAME, derive_seed

GAP_COLUMNS = (
    "n,alpha,eta,normalization,trials,gap_mean,gap_std,"
    "train_loss_mean,test_loss_mean,kappa,theoretical_bound,failed_trials"
).split(",")
EPOCH_COLUMNS = ["epoch", "train_loss", "test_loss"]

_SYNTH_RETRY_LIMIT = 20


@dataclass(frozen=True)
class LabeledHypergraphDataset:
    hypergraph: Hypergraph
    x_v: FeatureMatrix
    x_e: FeatureMatrix
    labels: np.ndarray  # float, NaN where missing
    name: str

    def __post_init__(self):
        if self.x_v.rows != self.hypergraph.n_vertices:
            raise DatasetSchemaError(
                f"vertex features have {self.x_v.rows} rows for "
                f"{self.hypergraph.n_vertices} vertices"
            )
        if self.x_e.rows != self.hypergraph.n_edges:
            raise DatasetSchemaError(
                f"edge features have {self.x_e.rows} rows for "
                f"{self.hypergraph.n_edges} edges"
            )
        if self.labels.shape != (self.hypergraph.n_vertices,):
            raise DatasetSchemaError("labels must be one value per vertex")

    @property
    def label_mask(self) -> np.ndarray:
        """True where a vertex carries a label."""
        return ~np.isnan(self.labels)

    def labeled_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.label_mask)


# ---------------------------------------------------------------------------
# JSON dataset files
# ---------------------------------------------------------------------------


def save_dataset(d: LabeledHypergraphDataset, path: str | os.PathLike) -> None:
    doc = {
        "name": d.name,
        "n_vertices": d.hypergraph.n_vertices,
        "edges": [list(e) for e in d.hypergraph.edges],
        "vertex_features": d.x_v.data.tolist(),
        "edge_features": d.x_e.data.tolist(),
        "labels": [None if math.isnan(v) else v for v in d.labels.tolist()],
    }
    _atomic_write(path, json.dumps(doc, indent=1) + "\n")


def load_dataset(path: str | os.PathLike) -> LabeledHypergraphDataset:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetParseError(f"{path}: {exc}") from None
    except OSError as exc:
        raise DatasetParseError(f"{path}: {exc}") from None

    required = {
        "name",
        "n_vertices",
        "edges",
        "vertex_features",
        "edge_features",
        "labels",
    }
    missing = required - set(doc)
    if missing:
        raise DatasetSchemaError(f"{path}: missing fields {sorted(missing)}")

    hg = from_edge_lists(doc["edges"], int(doc["n_vertices"]))
    labels = np.array(
        [math.nan if v is None else float(v) for v in doc["labels"]], dtype=float
    )
    try:
        return LabeledHypergraphDataset(
            hypergraph=hg,
            x_v=FeatureMatrix(np.asarray(doc["vertex_features"], dtype=float)),
            x_e=FeatureMatrix(np.asarray(doc["edge_features"], dtype=float)),
            labels=labels,
            name=str(doc["name"]),
        )
    except (ValueError, TypeError) as exc:
        raise DatasetSchemaError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# Co-citation construction
# ---------------------------------------------------------------------------


def build_cocitation(
    citations: Iterable[tuple[object, object]],
    drop_isolated: bool = False,
) -> tuple[Hypergraph, dict]:
    """One hyperedge per citing document, containing its cited documents.

    Document identifiers (any hashable) are mapped to contiguous vertex
    indices in sorted order; the returned dict maps identifier -> index.
    Documents that cite nothing produce no hyperedge; documents cited by
    nobody are isolated and follow the drop_isolated policy.
    """
    pairs = list(citations)
    if not pairs:
        raise EmptyEdgeError(0)
    docs = sorted({d for pair in pairs for d in pair}, key=repr)
    index = {doc: i for i, doc in enumerate(docs)}
    cited_by_doc: dict = {}
    for citing, cited in pairs:
        cited_by_doc.setdefault(citing, set()).add(index[cited])
    edges = [sorted(cited_by_doc[doc]) for doc in docs if doc in cited_by_doc]
    hg = from_edge_lists(edges, len(docs), drop_isolated=drop_isolated)
    if hg.n_vertices != len(docs):
        covered = np.zeros(len(docs), dtype=bool)
        for e in edges:
            covered[e] = True
        index = {
            docs[old]: new for new, old in enumerate(np.flatnonzero(covered))
        }
    return hg, index


# ---------------------------------------------------------------------------
# Synthetic planted-partition generator
# ---------------------------------------------------------------------------


def synth_planted(
    n: int,
    m: int,
    classes: int = 2,
    homophily: float = 0.9,
    feature_noise: float = 0.1,
    seed: int = 0,
    name: Optional[str] = None,
    edge_size_range: tuple[int, int] = (4, 16),
) -> LabeledHypergraphDataset:
    """Class-structured random hypergraph with learnable labels.

    Vertices draw i.i.d. uniform class labels, encoded evenly over [0, 1]
    (0/1 for two classes). Each hyperedge picks a home class and fills a
    random fraction `homophily` of its slots from that class, the rest
    uniformly from the other classes. Vertex features are the one-hot
    class vector plus Gaussian noise, column-normalized; hyperedge
    features are the member means of the raw vertex features,
    column-normalized. Instances leaving some vertex isolated are redrawn
    from a derived seed up to a retry limit.
    """
    if classes < 2:
        raise ValueError("need at least 2 classes")
    if n < classes:
        raise ValueError("need n >= classes")
    if m < 1:
        raise ValueError("need m >= 1")
    if not 0.5 < homophily <= 1.0:
        raise ValueError("homophily must lie in (0.5, 1]")
    if feature_noise < 0.0:
        raise ValueError("feature_noise must be nonnegative")

    for attempt in range(_SYNTH_RETRY_LIMIT):
        rng = np.random.default_rng(derive_seed(seed, attempt))
        result = _synth_once(rng, n, m, classes, homophily, edge_size_range)
        if result is not None:
            edges, labels_cls = result
            break
    else:
        raise DegenerateInstanceError(
            f"isolated vertices persisted through {_SYNTH_RETRY_LIMIT} redraws"
        )

    hg = from_edge_lists(edges, n)
    rng_feat = np.random.default_rng(derive_seed(seed, 1_000_003))
    raw = np.eye(classes)[labels_cls] + feature_noise * rng_feat.standard_normal(
        (n, classes)
    )
    x_v = column_normalize(FeatureMatrix(raw))
    member_mean = np.stack([raw[list(e)].mean(axis=0) for e in hg.edges])
    x_e = column_normalize(FeatureMatrix(member_mean))
    labels = labels_cls.astype(float) / (classes - 1)
    return LabeledHypergraphDataset(
        hypergraph=hg,
        x_v=x_v,
        x_e=x_e,
        labels=labels,
        name=name or f"planted-n{n}-m{m}-c{classes}-s{seed}",
    )


def _synth_once(rng, n, m, classes, homophily, size_range):
    labels_cls = rng.integers(0, classes, size=n)
    by_class = [np.flatnonzero(labels_cls == c) for c in range(classes)]
    if any(len(b) == 0 for b in by_class):
        return None
    lo, hi = size_range
    hi = min(hi, n)
    edges = []
    for _ in range(m):
        home = int(rng.integers(0, classes))
        size = int(rng.integers(lo, hi + 1))
        from_home = int(np.sum(rng.random(size) < homophily))
        pool_home = by_class[home]
        pool_other = np.flatnonzero(labels_cls != home)
        members: set[int] = set()
        take_home = min(from_home, len(pool_home))
        if take_home:
            members.update(
                rng.choice(pool_home, size=take_home, replace=False).tolist()
            )
        take_other = min(size - take_home, len(pool_other))
        if take_other:
            members.update(
                rng.choice(pool_other, size=take_other, replace=False).tolist()
            )
        if not members:
            members = {int(rng.integers(0, n))}
        edges.append(sorted(members))
    covered = np.zeros(n, dtype=bool)
    for e in edges:
        covered[e] = True
    if not covered.all():
        return None
    return edges, labels_cls


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    return str(value)


def format_metadata(metadata: dict) -> list[str]:
    """Deterministic '#'-prefixed header: seed, generator, config echo."""
    lines = [
        f"# master_seed={metadata.get('master_seed', 0)}",
        f"# generator={metadata.get('generator', GENERATOR_NAME)}",
    ]
    config = metadata.get("config")
    if config is not None:
        lines.append("# config=" + json.dumps(config, sort_keys=True))
    for key in sorted(metadata):
        if key in ("master_seed", "generator", "config"):
            continue
        lines.append(f"# {key}={metadata[key]}")
    return lines


def export_csv(records, path: str | os.PathLike, metadata: Optional[dict] = None):
    """Write gap records or epoch traces with a metadata header block."""
    records = list(records)
    if records and hasattr(records[0], "epoch"):
        columns = EPOCH_COLUMNS
    else:
        columns = GAP_COLUMNS
    lines = format_metadata(metadata or {})
    lines.append(",".join(columns))
    for rec in records:
        lines.append(",".join(_fmt(getattr(rec, col)) for col in columns))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path: str | os.PathLike) -> tuple[list[str], list[dict]]:
    """Read back an exported CSV: metadata lines and row dicts of floats."""
    meta: list[str] = []
    rows: list[dict] = []
    header: Optional[list[str]] = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                meta.append(line)
                continue
            if header is None:
                header = line.split(",")
                continue
            values = line.split(",")
            row = {}
            for key, val in zip(header, values):
                if key == "normalization":
                    row[key] = val
                else:
                    row[key] = float(val)
            rows.append(row)
    if header is None:
        raise DatasetParseError(f"{path}: no header row")
    return meta, rows


def _atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write via a temp file and rename, so failures leave no partial file."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
