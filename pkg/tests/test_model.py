"""Encoder contexts, forward passes, gradients, and the g_max bound."""

import numpy as np
import pytest

import hconstab as h
from hconstab.errors import DimensionMismatchError, IndexOutOfRangeError

from conftest import dense_incidence, random_hypergraph


def dense_context_oracle(hg, x_v, x_e, alpha):
    """Vertex context recomputed with dense matrices only."""
    mat = dense_incidence(hg)
    d_v = mat.sum(axis=1)
    d_e = mat.sum(axis=0)
    ht = mat / np.sqrt(d_v)[:, None] / np.sqrt(d_e)[None, :]
    a = alpha * ht @ ht.T @ x_v
    b = (1.0 - alpha) * ht @ (x_e / np.sqrt(d_e)[:, None])
    return a, b


def random_instance(rng, alpha=0.7, f_v=3, f_e=2):
    hg = random_hypergraph(rng, max_vertices=30, max_edges=20)
    x_v = h.FeatureMatrix(rng.standard_normal((hg.n_vertices, f_v)))
    x_e = h.FeatureMatrix(rng.standard_normal((hg.n_edges, f_e)))
    ni = h.NormalizedIncidence.build(hg)
    ctx = h.build_vertex_context(ni, x_v, x_e, alpha)
    return hg, x_v, x_e, ctx


class TestVertexContext:
    def test_identity_hypergraph_alpha_one(self, identity_hypergraph):
        x_v = h.FeatureMatrix(np.arange(6.0).reshape(3, 2))
        x_e = h.FeatureMatrix(np.ones((3, 2)))
        ni = h.NormalizedIncidence.build(identity_hypergraph)
        ctx = h.build_vertex_context(ni, x_v, x_e, 1.0)
        np.testing.assert_allclose(ctx.A, x_v.data, atol=1e-14)
        np.testing.assert_array_equal(ctx.B, np.zeros((3, 2)))

    def test_rows_match_dense_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(15):
            hg, x_v, x_e, ctx = random_instance(rng)
            a, b = dense_context_oracle(hg, x_v.data, x_e.data, 0.7)
            np.testing.assert_allclose(ctx.A, a, atol=1e-12)
            np.testing.assert_allclose(ctx.B, b, atol=1e-12)

    def test_row_norms_bounded_by_g_max(self):
        rng = np.random.default_rng(22)
        for _ in range(15):
            _, _, _, ctx = random_instance(rng, alpha=float(rng.uniform(0, 1)))
            norms = np.linalg.norm(ctx.stacked_rows(), axis=1)
            assert np.max(norms) <= ctx.g_max + 1e-9

    def test_normalized_g_max_within_feature_dim_cap(self):
        # with column-normalized features the bound collapses to
        # sqrt(alpha^2 F_V + (1-alpha)^2 F_E), independent of the graph
        rng = np.random.default_rng(23)
        for _ in range(10):
            hg = random_hypergraph(rng, max_vertices=40, max_edges=25)
            x_v = h.column_normalize(
                h.FeatureMatrix(rng.standard_normal((hg.n_vertices, 4)))
            )
            x_e = h.column_normalize(
                h.FeatureMatrix(rng.standard_normal((hg.n_edges, 3)))
            )
            ni = h.NormalizedIncidence.build(hg)
            ctx = h.build_vertex_context(ni, x_v, x_e, 0.5)
            cap = np.sqrt(0.25 * 4 + 0.25 * 3)
            assert ctx.g_max <= cap + 1e-9

    def test_dimension_validation(self, triangle):
        ni = h.NormalizedIncidence.build(triangle)
        bad_xv = h.FeatureMatrix(np.ones((4, 2)))
        x_e = h.FeatureMatrix(np.ones((3, 2)))
        with pytest.raises(DimensionMismatchError):
            h.build_vertex_context(ni, bad_xv, x_e, 0.5)
        with pytest.raises(ValueError):
            h.build_vertex_context(
                ni, h.FeatureMatrix(np.ones((3, 2))), x_e, 1.5
            )


class TestForward:
    def test_zero_theta_gives_sigma_zero(self, triangle):
        ni = h.NormalizedIncidence.build(triangle)
        ctx = h.build_vertex_context(
            ni, h.FeatureMatrix(np.ones((3, 2))),
            h.FeatureMatrix(np.ones((3, 2))), 0.5,
        )
        theta = h.Theta(q_v=np.zeros((2, 1)), q_e=np.zeros((2, 1)))
        out = h.forward_vertex(ctx, theta, 0, h.Sigmoid())
        assert out[0] == pytest.approx(0.5)

    def test_identity_hypergraph_reduces_to_feature_lookup(self):
        hg = h.from_edge_lists([[0], [1], [2]], 3)
        x_v = h.FeatureMatrix(np.array([[0.3, -1.0], [0.7, 2.0], [0.1, 0.5]]))
        x_e = h.FeatureMatrix(np.zeros((3, 1)))
        ni = h.NormalizedIncidence.build(hg)
        ctx = h.build_vertex_context(ni, x_v, x_e, 1.0)
        theta = h.Theta(q_v=np.array([[0.0], [1.0]]), q_e=np.zeros((1, 1)))
        act = h.Sigmoid()
        for v in range(3):
            expected = act.value(x_v.data[v, 1])
            assert h.forward_vertex(ctx, theta, v, act)[0] == pytest.approx(expected)

    def test_forward_matches_dense_recomputation(self):
        rng = np.random.default_rng(24)
        act = h.Tanh()
        for _ in range(10):
            hg, x_v, x_e, ctx = random_instance(rng)
            a, b = dense_context_oracle(hg, x_v.data, x_e.data, 0.7)
            theta = h.Theta(
                q_v=rng.standard_normal((3, 1)), q_e=rng.standard_normal((2, 1))
            )
            for v in range(hg.n_vertices):
                expected = np.tanh(a[v] @ theta.q_v + b[v] @ theta.q_e)
                np.testing.assert_allclose(
                    h.forward_vertex(ctx, theta, v, act), expected, atol=1e-12
                )

    def test_vertex_index_validated(self, triangle):
        ni = h.NormalizedIncidence.build(triangle)
        ctx = h.build_vertex_context(
            ni, h.FeatureMatrix(np.ones((3, 1))),
            h.FeatureMatrix(np.ones((3, 1))), 0.5,
        )
        theta = h.Theta(q_v=np.zeros((1, 1)), q_e=np.zeros((1, 1)))
        with pytest.raises(IndexOutOfRangeError):
            h.forward_vertex(ctx, theta, 3, h.Sigmoid())


class TestGradVertex:
    def test_zero_at_loss_minimum(self, triangle):
        ni = h.NormalizedIncidence.build(triangle)
        ctx = h.build_vertex_context(
            ni, h.FeatureMatrix(np.ones((3, 2))),
            h.FeatureMatrix(np.ones((3, 2))), 0.5,
        )
        theta = h.Theta(q_v=np.zeros((2, 1)), q_e=np.zeros((2, 1)))
        act = h.Sigmoid()
        grad = h.grad_vertex(ctx, theta, 0, act, h.Squared(0.0, 1.0), 0.5)
        assert grad.norm() == pytest.approx(0.0, abs=1e-15)

    def test_zero_context_row_gives_zero_gradient(self):
        hg = h.from_edge_lists([[0], [1]], 2)
        x_v = h.FeatureMatrix(np.array([[0.0], [1.0]]))
        x_e = h.FeatureMatrix(np.zeros((2, 1)))
        ni = h.NormalizedIncidence.build(hg)
        ctx = h.build_vertex_context(ni, x_v, x_e, 1.0)
        theta = h.Theta(q_v=np.ones((1, 1)), q_e=np.ones((1, 1)))
        grad = h.grad_vertex(ctx, theta, 0, h.Sigmoid(), h.Squared(0.0, 1.0), 1.0)
        assert grad.norm() == 0.0

    def test_norm_bounded_by_constants(self):
        rng = np.random.default_rng(25)
        act, loss = h.Tanh(), h.Squared(0.0, 1.0)
        c = h.regularity_constants(act, loss)
        for _ in range(10):
            _, _, _, ctx = random_instance(rng)
            cap = c.alpha_ell * c.alpha_sigma * ctx.g_max
            for _ in range(10):
                theta = h.Theta(
                    q_v=rng.standard_normal((3, 1)),
                    q_e=rng.standard_normal((2, 1)),
                )
                v = int(rng.integers(ctx.n_vertices))
                y = float(rng.uniform(0, 1))
                assert h.grad_vertex(ctx, theta, v, act, loss, y).norm() <= cap + 1e-9

    def test_requires_scalar_output(self, triangle):
        ni = h.NormalizedIncidence.build(triangle)
        ctx = h.build_vertex_context(
            ni, h.FeatureMatrix(np.ones((3, 1))),
            h.FeatureMatrix(np.ones((3, 1))), 0.5,
        )
        theta = h.Theta(q_v=np.zeros((1, 2)), q_e=np.zeros((1, 2)))
        with pytest.raises(DimensionMismatchError):
            h.grad_vertex(ctx, theta, 0, h.Sigmoid(), h.Squared(0.0, 1.0), 0.5)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(26)
        pairs = [
            (h.Sigmoid(), h.Squared(0.0, 1.0)),
            (h.Tanh(), h.Squared(-1.0, 1.0)),
            (h.Elu(), h.Squared(-1.0, 1.0)),
            (h.SmoothedRelu(0.1), h.Squared(0.0, 1.0)),
            (h.Sigmoid(), h.ClippedBce(0.1)),
        ]
        for act, loss in pairs:
            for _ in range(6):
                _, _, _, ctx = random_instance(rng)
                theta = h.Theta(
                    q_v=0.2 * rng.standard_normal((3, 1)),
                    q_e=0.2 * rng.standard_normal((2, 1)),
                )
                v = int(rng.integers(ctx.n_vertices))
                y = float(rng.uniform(0, 1))
                d = float(h.preactivation_vertex(ctx, theta, v)[0])
                if isinstance(act, h.SmoothedRelu) and (
                    abs(d - act.epsilon) < 1e-3 or abs(d + act.epsilon) < 1e-3
                ):
                    continue  # finite differences straddle a curvature jump
                grad = h.grad_vertex(ctx, theta, v, act, loss, y)
                an = np.concatenate([grad.q_v[:, 0], grad.q_e[:, 0]])
                fd = finite_difference_gradient(ctx, theta, v, act, loss, y)
                denom = max(np.linalg.norm(fd), np.linalg.norm(an))
                if denom < 1e-12:
                    assert np.linalg.norm(an) < 1e-12
                else:
                    assert np.linalg.norm(fd - an) / denom <= 1e-6

    def test_preactivation_lipschitz_in_theta(self):
        rng = np.random.default_rng(27)
        for _ in range(10):
            _, _, _, ctx = random_instance(rng)
            t1 = h.Theta(q_v=rng.standard_normal((3, 1)),
                         q_e=rng.standard_normal((2, 1)))
            t2 = h.Theta(q_v=rng.standard_normal((3, 1)),
                         q_e=rng.standard_normal((2, 1)))
            dt = np.sqrt(np.sum((t1.q_v - t2.q_v) ** 2)
                         + np.sum((t1.q_e - t2.q_e) ** 2))
            for v in range(ctx.n_vertices):
                d1 = h.preactivation_vertex(ctx, t1, v)[0]
                d2 = h.preactivation_vertex(ctx, t2, v)[0]
                assert abs(d1 - d2) <= ctx.g_max * dt + 1e-9


def finite_difference_gradient(ctx, theta, v, act, loss, y, step=1e-5):
    base = np.concatenate([theta.q_v[:, 0], theta.q_e[:, 0]])
    row = ctx.row(v)

    def value(w):
        return loss.value(float(np.asarray(act.value(float(row @ w)))), y)

    out = np.empty_like(base)
    for k in range(base.size):
        plus, minus = base.copy(), base.copy()
        plus[k] += step
        minus[k] -= step
        out[k] = (value(plus) - value(minus)) / (2.0 * step)
    return out


class TestEdgeEncoder:
    def test_identity_hypergraph_beta_one(self, identity_hypergraph):
        x_v = h.FeatureMatrix(np.ones((3, 2)))
        x_e = h.FeatureMatrix(np.arange(6.0).reshape(3, 2))
        ni = h.NormalizedIncidence.build(identity_hypergraph)
        ctx = h.build_edge_context(ni, x_v, x_e, 1.0)
        np.testing.assert_allclose(ctx.C, x_e.data, atol=1e-14)
        np.testing.assert_array_equal(ctx.D, np.zeros((3, 2)))

    def test_zero_theta(self, triangle):
        ni = h.NormalizedIncidence.build(triangle)
        ctx = h.build_edge_context(
            ni, h.FeatureMatrix(np.ones((3, 2))),
            h.FeatureMatrix(np.ones((3, 2))), 0.5,
        )
        theta = h.Theta(q_v=np.zeros((2, 1)), q_e=np.zeros((2, 1)))
        assert h.forward_edge(ctx, theta, 1, h.Sigmoid())[0] == pytest.approx(0.5)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(28)
        beta = 0.6
        for _ in range(10):
            hg = random_hypergraph(rng, max_vertices=25, max_edges=15)
            x_v = h.FeatureMatrix(rng.standard_normal((hg.n_vertices, 3)))
            x_e = h.FeatureMatrix(rng.standard_normal((hg.n_edges, 2)))
            ni = h.NormalizedIncidence.build(hg)
            ctx = h.build_edge_context(ni, x_v, x_e, beta)
            mat = dense_incidence(hg)
            d_v = mat.sum(axis=1)
            d_e = mat.sum(axis=0)
            ht = mat / np.sqrt(d_v)[:, None] / np.sqrt(d_e)[None, :]
            c = beta * ht.T @ ht @ x_e.data
            d = (1 - beta) * ht.T @ (x_v.data / np.sqrt(d_v)[:, None])
            np.testing.assert_allclose(ctx.C, c, atol=1e-12)
            np.testing.assert_allclose(ctx.D, d, atol=1e-12)
            # row-norm bound mirrors the vertex side
            norms = np.linalg.norm(
                np.hstack([ctx.C, ctx.D]), axis=1
            )
            assert np.max(norms) <= ctx.g_max_edge + 1e-9

    def test_grad_edge_finite_differences(self):
        rng = np.random.default_rng(29)
        act, loss = h.Sigmoid(), h.Squared(0.0, 1.0)
        for _ in range(6):
            hg = random_hypergraph(rng, max_vertices=20, max_edges=12)
            x_v = h.FeatureMatrix(rng.standard_normal((hg.n_vertices, 3)))
            x_e = h.FeatureMatrix(rng.standard_normal((hg.n_edges, 2)))
            ni = h.NormalizedIncidence.build(hg)
            ctx = h.build_edge_context(ni, x_v, x_e, 0.6)
            theta = h.Theta(q_v=0.2 * rng.standard_normal((2, 1)),
                            q_e=0.2 * rng.standard_normal((3, 1)))
            e = int(rng.integers(ctx.n_edges))
            y = float(rng.uniform(0, 1))
            grad = h.grad_edge(ctx, theta, e, act, loss, y)
            an = np.concatenate([grad.q_v[:, 0], grad.q_e[:, 0]])
            row = ctx.row(e)
            base = np.concatenate([theta.q_v[:, 0], theta.q_e[:, 0]])
            fd = np.empty_like(base)
            for k in range(base.size):
                plus, minus = base.copy(), base.copy()
                plus[k] += 1e-5
                minus[k] -= 1e-5
                fd[k] = (
                    loss.value(float(np.asarray(act.value(float(row @ plus)))), y)
                    - loss.value(float(np.asarray(act.value(float(row @ minus)))), y)
                ) / 2e-5
            assert np.linalg.norm(fd - an) <= 1e-6 * max(np.linalg.norm(fd), 1e-3)


class TestHcnReduction:
    def test_zero_edge_features_alpha_one_match_vertex_only_model(self):
        # with X_E = 0 and alpha = 1 the vertex encoder equals the
        # vertex-only convolution D_V^-1/2 H D_E^-1 H^T D_V^-1/2 X_V Q_V
        rng = np.random.default_rng(30)
        for _ in range(10):
            hg = random_hypergraph(rng, max_vertices=25, max_edges=15)
            x_v = h.FeatureMatrix(rng.standard_normal((hg.n_vertices, 3)))
            x_e = h.FeatureMatrix(np.zeros((hg.n_edges, 2)))
            ni = h.NormalizedIncidence.build(hg)
            ctx = h.build_vertex_context(ni, x_v, x_e, 1.0)
            theta = h.Theta(q_v=rng.standard_normal((3, 1)),
                            q_e=rng.standard_normal((2, 1)))
            mat = dense_incidence(hg)
            d_v = mat.sum(axis=1)
            d_e = mat.sum(axis=0)
            mix = (
                np.diag(d_v**-0.5) @ mat @ np.diag(1.0 / d_e)
                @ mat.T @ np.diag(d_v**-0.5)
            )
            act = h.Sigmoid()
            expected = act.value(mix @ x_v.data @ theta.q_v)
            got = np.array(
                [h.forward_vertex(ctx, theta, v, act)[0]
                 for v in range(hg.n_vertices)]
            )
            np.testing.assert_allclose(got, expected[:, 0], atol=1e-12)
