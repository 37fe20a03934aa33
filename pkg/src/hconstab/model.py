"""Single-layer collaborative encoders with precomputed mixing contexts.

The vertex encoder is sigma(alpha H~ H~^T X_V Q_V + (1-alpha) H~ D_E^{-1/2}
X_E Q_E). Because the hypergraph and features are fixed during training,
the two mixing matrices are materialized once: row v of A is the
coefficient vector multiplying Q_V at vertex v, row v of B the one
multiplying Q_E. The per-row norm bound g_max controls every Lipschitz
constant downstream.

The hyperedge encoder mirrors this with the roles of vertices and
hyperedges swapped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, IndexOutOfRangeError
from .features import FeatureMatrix, spectral_norm_dense
from .hypergraph import NormalizedIncidence, spectral_norm
from .regularity import Activation, Loss


@dataclass(frozen=True)
class Theta:
    """Learnable encoder parameters, stacked as (Q_V^T, Q_E^T)^T."""

    q_v: np.ndarray  # (F_V, O)
    q_e: np.ndarray  # (F_E, O)

    def __post_init__(self):
        if self.q_v.ndim != 2 or self.q_e.ndim != 2:
            raise DimensionMismatchError("theta blocks must be 2-d")
        if self.q_v.shape[1] != self.q_e.shape[1]:
            raise DimensionMismatchError("theta blocks disagree on output dim")

    @property
    def output_dim(self) -> int:
        return self.q_v.shape[1]

    def stacked(self) -> np.ndarray:
        """(F_V + F_E, O) stack matching the analysis' parameter vector."""
        return np.vstack([self.q_v, self.q_e])

    def norm(self) -> float:
        """Euclidean norm of the stacked parameters."""
        return float(np.sqrt(np.sum(self.q_v**2) + np.sum(self.q_e**2)))

    def copy(self) -> "Theta":
        return Theta(q_v=self.q_v.copy(), q_e=self.q_e.copy())


@dataclass(frozen=True)
class VertexContext:
    """Precomputed per-vertex mixing rows for the vertex encoder."""

    A: np.ndarray  # (N, F_V), row v = alpha * e(v)^T H~ H~^T X_V
    B: np.ndarray  # (N, F_E), row v = (1-alpha) * e(v)^T H~ D_E^{-1/2} X_E
    alpha: float
    g_max: float

    @property
    def n_vertices(self) -> int:
        return self.A.shape[0]

    def row(self, v: int) -> np.ndarray:
        """Stacked context row (A_v, B_v) of length F_V + F_E."""
        if not 0 <= v < self.n_vertices:
            raise IndexOutOfRangeError(v, self.n_vertices)
        return np.concatenate([self.A[v], self.B[v]])

    def stacked_rows(self) -> np.ndarray:
        """(N, F_V + F_E) matrix of all stacked context rows."""
        return np.hstack([self.A, self.B])


@dataclass(frozen=True)
class EdgeContext:
    """Mirror of VertexContext for the hyperedge encoder."""

    C: np.ndarray  # (M, F_E), row e = beta * e(e)^T H~^T H~ X_E
    D: np.ndarray  # (M, F_V), row e = (1-beta) * e(e)^T H~^T D_V^{-1/2} X_V
    beta: float
    g_max_edge: float

    @property
    def n_edges(self) -> int:
        return self.C.shape[0]

    def row(self, e: int) -> np.ndarray:
        if not 0 <= e < self.n_edges:
            raise IndexOutOfRangeError(e, self.n_edges, what="edge")
        return np.concatenate([self.C[e], self.D[e]])


def _context_bound(mu: float, norm_lead: float, norm_side: float, w: float) -> float:
    # mu * sqrt(w^2 |X_lead|^2 mu^2 + (1-w)^2 |X_side|^2)
    return mu * np.sqrt(
        w * w * norm_lead * norm_lead * mu * mu
        + (1.0 - w) * (1.0 - w) * norm_side * norm_side
    )


def build_vertex_context(
    ni: NormalizedIncidence,
    x_v: FeatureMatrix,
    x_e: FeatureMatrix,
    alpha: float,
) -> VertexContext:
    """Materialize the vertex-encoder context via sparse matvec passes.

    In raw mode the operator is H instead of H~ and g_max is recomputed
    from mu(H); the D_E^{-1/2} factor attached to the hyperedge features
    is part of the model and stays in place either way.
    """
    n, m = ni.shape
    if x_v.rows != n:
        raise DimensionMismatchError(f"x_v has {x_v.rows} rows, expected {n}")
    if x_e.rows != m:
        raise DimensionMismatchError(f"x_e has {x_e.rows} rows, expected {m}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")

    a = alpha * ni.matmat(ni.rmatmat(x_v.data))
    inv_sqrt_de = 1.0 / np.sqrt(ni.degs.d_e.astype(float))
    b = (1.0 - alpha) * ni.matmat(inv_sqrt_de[:, None] * x_e.data)

    mu = spectral_norm(ni)
    g_max = _context_bound(
        mu, spectral_norm_dense(x_v), spectral_norm_dense(x_e), alpha
    )
    return VertexContext(A=a, B=b, alpha=alpha, g_max=float(g_max))


def build_edge_context(
    ni: NormalizedIncidence,
    x_v: FeatureMatrix,
    x_e: FeatureMatrix,
    beta: float,
) -> EdgeContext:
    n, m = ni.shape
    if x_v.rows != n:
        raise DimensionMismatchError(f"x_v has {x_v.rows} rows, expected {n}")
    if x_e.rows != m:
        raise DimensionMismatchError(f"x_e has {x_e.rows} rows, expected {m}")
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")

    c = beta * ni.rmatmat(ni.matmat(x_e.data))
    inv_sqrt_dv = 1.0 / np.sqrt(ni.degs.d_v.astype(float))
    d = (1.0 - beta) * ni.rmatmat(inv_sqrt_dv[:, None] * x_v.data)

    mu = spectral_norm(ni)
    g_max_edge = _context_bound(
        mu, spectral_norm_dense(x_e), spectral_norm_dense(x_v), beta
    )
    return EdgeContext(C=c, D=d, beta=beta, g_max_edge=float(g_max_edge))


def preactivation_vertex(ctx: VertexContext, theta: Theta, v: int) -> np.ndarray:
    """d_v = A_v Q_V + B_v Q_E, shape (O,). Exposed for bound checks."""
    if not 0 <= v < ctx.n_vertices:
        raise IndexOutOfRangeError(v, ctx.n_vertices)
    return ctx.A[v] @ theta.q_v + ctx.B[v] @ theta.q_e


def forward_vertex(
    ctx: VertexContext, theta: Theta, v: int, act: Activation
) -> np.ndarray:
    """Vertex-encoder output sigma(d_v), shape (O,)."""
    return np.asarray(act.value(preactivation_vertex(ctx, theta, v)))


def grad_vertex(
    ctx: VertexContext,
    theta: Theta,
    v: int,
    act: Activation,
    loss: Loss,
    y: float,
) -> Theta:
    """Gradient of loss(sigma(d_v), y) with respect to theta, O = 1 only.

    The chain collapses to a scalar times the stacked context row:
    loss'(sigma(d_v), y) * sigma'(d_v) * (A_v B_v)^T.
    """
    if theta.output_dim != 1:
        raise DimensionMismatchError("gradients are implemented for O = 1")
    d = float(preactivation_vertex(ctx, theta, v)[0])
    scale = loss.deriv(act.value(d), y) * act.deriv(d)
    return Theta(
        q_v=scale * ctx.A[v][:, None],
        q_e=scale * ctx.B[v][:, None],
    )


def preactivation_edge(ctx: EdgeContext, theta: Theta, e: int) -> np.ndarray:
    """Mirror of preactivation_vertex with (P_E, P_V) in theta's slots."""
    if not 0 <= e < ctx.n_edges:
        raise IndexOutOfRangeError(e, ctx.n_edges, what="edge")
    return ctx.C[e] @ theta.q_v + ctx.D[e] @ theta.q_e


def forward_edge(
    ctx: EdgeContext, theta: Theta, e: int, act: Activation
) -> np.ndarray:
    """Hyperedge-encoder output, shape (O,)."""
    return np.asarray(act.value(preactivation_edge(ctx, theta, e)))


def grad_edge(
    ctx: EdgeContext,
    theta: Theta,
    e: int,
    act: Activation,
    loss: Loss,
    y: float,
) -> Theta:
    if theta.output_dim != 1:
        raise DimensionMismatchError("gradients are implemented for O = 1")
    d = float(preactivation_edge(ctx, theta, e)[0])
    scale = loss.deriv(act.value(d), y) * act.deriv(d)
    return Theta(
        q_v=scale * ctx.C[e][:, None],
        q_e=scale * ctx.D[e][:, None],
    )
