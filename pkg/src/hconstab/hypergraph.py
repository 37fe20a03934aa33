"""Incidence-matrix hypergraphs, degree vectors, and spectral norms.

A hypergraph on N vertices with M hyperedges is stored as per-edge sorted
vertex-index lists, equivalent to a binary N x M incidence matrix H.
`NormalizedIncidence` wraps H together with its degree vectors and applies
the D_V^{-1/2} H D_E^{-1/2} scaling on the fly, so the represented operator
is either H itself (raw) or its degree-normalized form (whose largest
singular value is exactly 1 for every validated hypergraph).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimensionMismatchError,
    EmptyEdgeError,
    IndexOutOfRangeError,
    IsolatedVertexError,
    NoConvergenceError,
)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000


@dataclass(frozen=True)
class Hypergraph:
    """Unweighted, undirected hypergraph.

    edges holds one sorted, deduplicated tuple of vertex indices per
    hyperedge; edge order is preserved from construction.
    """

    n_vertices: int
    edges: tuple[tuple[int, ...], ...]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def incidence(self) -> sp.csr_matrix:
        """Sparse binary incidence matrix H of shape (N, M)."""
        rows, cols = [], []
        for j, edge in enumerate(self.edges):
            rows.extend(edge)
            cols.extend([j] * len(edge))
        data = np.ones(len(rows))
        return sp.csr_matrix(
            (data, (rows, cols)), shape=(self.n_vertices, self.n_edges)
        )


@dataclass(frozen=True)
class DegreeVectors:
    """Vertex degrees d_V = H 1 and hyperedge degrees d_E = H^T 1."""

    d_v: np.ndarray
    d_e: np.ndarray


class Scale(enum.Enum):
    NORMALIZED = "normalized"
    RAW = "raw"


def from_edge_lists(
    edges: list[list[int]], n_vertices: int, drop_isolated: bool = False
) -> Hypergraph:
    """Build a validated hypergraph from raw per-edge vertex lists.

    Duplicate vertices within an edge are merged and each edge is sorted.
    Vertices that appear in no edge raise IsolatedVertexError unless
    drop_isolated is set, in which case they are removed (with a warning)
    and the remaining vertices are relabeled contiguously.
    """
    if n_vertices < 1:
        raise IndexOutOfRangeError(n_vertices, 1, what="vertex count")
    clean: list[tuple[int, ...]] = []
    for j, edge in enumerate(edges):
        uniq = sorted(set(edge))
        if not uniq:
            raise EmptyEdgeError(j)
        for v in uniq:
            if not 0 <= v < n_vertices:
                raise IndexOutOfRangeError(v, n_vertices)
        clean.append(tuple(uniq))

    covered = np.zeros(n_vertices, dtype=bool)
    for edge in clean:
        covered[list(edge)] = True
    if not covered.all():
        missing = np.flatnonzero(~covered)
        if not drop_isolated:
            raise IsolatedVertexError(int(missing[0]))
        warnings.warn(
            f"dropping {missing.size} isolated vertices", stacklevel=2
        )
        relabel = np.cumsum(covered) - 1
        clean = [tuple(int(relabel[v]) for v in edge) for edge in clean]
        n_vertices = int(covered.sum())

    return Hypergraph(n_vertices=n_vertices, edges=tuple(clean))


def degrees(hg: Hypergraph) -> DegreeVectors:
    """Degree vectors of a validated hypergraph; all entries are >= 1."""
    d_v = np.zeros(hg.n_vertices, dtype=np.int64)
    d_e = np.zeros(hg.n_edges, dtype=np.int64)
    for j, edge in enumerate(hg.edges):
        d_e[j] = len(edge)
        for v in edge:
            d_v[v] += 1
    return DegreeVectors(d_v=d_v, d_e=d_e)


@dataclass(frozen=True)
class NormalizedIncidence:
    """H or its normalized form D_V^{-1/2} H D_E^{-1/2} as a linear operator.

    Immutable after construction; matvec/rmatvec never materialize the
    scaled matrix.
    """

    base: Hypergraph
    degs: DegreeVectors
    scale: Scale
    _h: sp.csr_matrix = field(repr=False)
    _ht: sp.csr_matrix = field(repr=False)
    _inv_sqrt_dv: np.ndarray = field(repr=False)
    _inv_sqrt_de: np.ndarray = field(repr=False)

    @classmethod
    def build(
        cls, hg: Hypergraph, scale: Scale = Scale.NORMALIZED
    ) -> "NormalizedIncidence":
        degs = degrees(hg)
        h = hg.incidence()
        return cls(
            base=hg,
            degs=degs,
            scale=scale,
            _h=h,
            _ht=h.T.tocsr(),
            _inv_sqrt_dv=1.0 / np.sqrt(degs.d_v.astype(float)),
            _inv_sqrt_de=1.0 / np.sqrt(degs.d_e.astype(float)),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.base.n_vertices, self.base.n_edges)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Apply the operator from the left: returns H~ x (x has length M)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.base.n_edges,):
            raise DimensionMismatchError(
                f"expected vector of length {self.base.n_edges}, got {x.shape}"
            )
        if self.scale is Scale.RAW:
            return self._h @ x
        return self._inv_sqrt_dv * (self._h @ (self._inv_sqrt_de * x))

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        """Apply the transpose: returns H~^T x (x has length N)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.base.n_vertices,):
            raise DimensionMismatchError(
                f"expected vector of length {self.base.n_vertices}, got {x.shape}"
            )
        if self.scale is Scale.RAW:
            return self._ht @ x
        return self._inv_sqrt_de * (self._ht @ (self._inv_sqrt_dv * x))

    def matmat(self, x: np.ndarray) -> np.ndarray:
        """Column-wise matvec for a dense (M, k) matrix."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[0] != self.base.n_edges:
            raise DimensionMismatchError(
                f"expected ({self.base.n_edges}, k) matrix, got {x.shape}"
            )
        if self.scale is Scale.RAW:
            return self._h @ x
        return self._inv_sqrt_dv[:, None] * (
            self._h @ (self._inv_sqrt_de[:, None] * x)
        )

    def rmatmat(self, x: np.ndarray) -> np.ndarray:
        """Column-wise rmatvec for a dense (N, k) matrix."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[0] != self.base.n_vertices:
            raise DimensionMismatchError(
                f"expected ({self.base.n_vertices}, k) matrix, got {x.shape}"
            )
        if self.scale is Scale.RAW:
            return self._ht @ x
        return self._inv_sqrt_de[:, None] * (
            self._ht @ (self._inv_sqrt_dv[:, None] * x)
        )

    def to_dense(self) -> np.ndarray:
        """Dense copy of the represented matrix (small instances only)."""
        h = np.asarray(self._h.todense(), dtype=float)
        if self.scale is Scale.RAW:
            return h
        return self._inv_sqrt_dv[:, None] * h * self._inv_sqrt_de[None, :]


def spectral_norm(
    ni: NormalizedIncidence,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> float:
    """Largest singular value by power iteration on the Gram operator.

    The iteration runs on H~^T H~ when M <= N and on H~ H~^T otherwise,
    starting from the normalized all-ones vector so results are
    bit-reproducible. Convergence: the change in the square-root Rayleigh
    quotient between sweeps falls below tol.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    n, m = ni.shape
    if m <= n:
        gram = lambda v: ni.rmatvec(ni.matvec(v))
        dim = m
    else:
        gram = lambda v: ni.matvec(ni.rmatvec(v))
        dim = n
    return _power_iteration(gram, dim, tol, max_iter)


def _power_iteration(gram, dim: int, tol: float, max_iter: int) -> float:
    v = np.ones(dim) / np.sqrt(dim)
    mu_prev = None
    for sweep in range(max_iter):
        w = gram(v)
        rayleigh = float(v @ w)
        mu = np.sqrt(max(rayleigh, 0.0))
        if mu_prev is not None and abs(mu - mu_prev) <= tol:
            return mu
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        mu_prev = mu
    raise NoConvergenceError(mu_prev, max_iter)
