"""Shared fixtures and dense linear-algebra oracles.

The oracles recompute everything with plain dense numpy so that the
sparse/power-iteration code paths are always checked against an
independent route.
"""

import numpy as np
import pytest

import hconstab as h


def dense_incidence(hg: h.Hypergraph) -> np.ndarray:
    mat = np.zeros((hg.n_vertices, hg.n_edges))
    for j, edge in enumerate(hg.edges):
        mat[list(edge), j] = 1.0
    return mat


def dense_normalized(hg: h.Hypergraph) -> np.ndarray:
    mat = dense_incidence(hg)
    d_v = mat.sum(axis=1)
    d_e = mat.sum(axis=0)
    return mat / np.sqrt(d_v)[:, None] / np.sqrt(d_e)[None, :]


def random_hypergraph(rng, max_vertices=200, max_edges=60) -> h.Hypergraph:
    """Random validated hypergraph; isolated vertices are patched into a
    random edge so the instance always passes validation."""
    n = int(rng.integers(2, max_vertices + 1))
    m = int(rng.integers(1, max_edges + 1))
    edges = []
    for _ in range(m):
        size = int(rng.integers(1, min(6, n) + 1))
        edges.append(sorted(rng.choice(n, size=size, replace=False).tolist()))
    covered = np.zeros(n, dtype=bool)
    for e in edges:
        covered[e] = True
    for v in np.flatnonzero(~covered):
        j = int(rng.integers(0, m))
        edges[j] = sorted(set(edges[j]) | {int(v)})
    return h.from_edge_lists(edges, n)


@pytest.fixture
def triangle() -> h.Hypergraph:
    """Three vertices, edges {0,1}, {1,2}, {0,1,2}."""
    return h.from_edge_lists([[0, 1], [1, 2], [0, 1, 2]], 3)


@pytest.fixture
def identity_hypergraph() -> h.Hypergraph:
    return h.from_edge_lists([[0], [1], [2]], 3)


@pytest.fixture(scope="session")
def bundled_dataset() -> h.LabeledHypergraphDataset:
    """The default 200-vertex planted dataset the CLI synthesizes."""
    return h.synth_planted(200, 150, classes=2, homophily=0.9,
                           feature_noise=0.1, seed=7)
