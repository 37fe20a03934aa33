"""Closed-form constants: drift, stability, and gap bounds.

Frozen expected values were computed with a 50-digit mpmath evaluation of
the same formulas (see the oracle at the bottom, re-run by the tests).
"""

import math
import warnings

import mpmath as mp
import numpy as np
import pytest

import hconstab as h
from hconstab.errors import BoundOverflowWarning


def consts(a_s, n_s, a_l, n_l, g_l):
    return h.RegularityConstants(
        alpha_sigma=a_s, nu_sigma=n_s, alpha_ell=a_l, nu_ell=n_l, gamma_ell=g_l
    )


def mp_kappa0(c, g, eta, t):
    """High-precision oracle for the drift constant."""
    with mp.workdps(50):
        big_c = (mp.mpf(c.alpha_ell) * mp.mpf(c.nu_sigma)
                 + mp.mpf(c.nu_ell) * mp.mpf(c.alpha_sigma) ** 2) * mp.mpf(g) ** 2
        c_prime = 2 * mp.mpf(c.alpha_ell) * mp.mpf(c.alpha_sigma) * mp.mpf(g)
        if big_c == 0:
            return float(mp.mpf(eta) * c_prime * t)
        return float(c_prime * ((1 + mp.mpf(eta) * big_c) ** t - 1) / big_c)


class TestLemmaConstants:
    def test_zero_g_max(self):
        c = consts(1.0, 1.0, 2.0, 2.0, 1.0)
        assert h.lemma1_constant(c, 0.0) == 0.0
        assert h.lemma2_constant(c, 0.0) == 0.0

    def test_smoothed_relu_squared_combination(self):
        # alpha_ell nu_sigma + nu_ell alpha_sigma^2 = 2*1 + 2*1 = 4
        c = h.regularity_constants(h.SmoothedRelu(0.5), h.Squared(0.0, 1.0))
        assert h.lemma1_constant(c, 1.0) == pytest.approx(4.0)

    def test_tanh_squared_combination(self):
        # 2 alpha_ell alpha_sigma g = 2*2*1*1 = 4
        c = h.regularity_constants(h.Tanh(), h.Squared(0.0, 1.0))
        assert h.lemma2_constant(c, 1.0) == pytest.approx(4.0)

    def test_homogeneity(self):
        c = consts(0.25, 0.1, 2.0, 2.0, 1.0)
        assert h.lemma1_constant(c, 2.0) == pytest.approx(
            4.0 * h.lemma1_constant(c, 1.0)
        )
        assert h.lemma2_constant(c, 2.0) == pytest.approx(
            2.0 * h.lemma2_constant(c, 1.0)
        )


class TestKappa0:
    def _inputs(self, c, g, eta, t, n=100):
        return h.BoundInputs(constants=c, g_max=g, eta=eta, T=t, n=n)

    def test_no_iterations(self):
        c = consts(1.0, 1.0, 2.0, 2.0, 1.0)
        assert h.kappa0(self._inputs(c, 1.0, 0.1, 0)) == 0.0

    def test_zero_curvature_limit(self):
        # C = 0 (constant-slope regime): limit is eta C' T = 0.1*4*10 = 4
        c = consts(1.0, 0.0, 2.0, 0.0, 1.0)
        b = self._inputs(c, 1.0, 0.1, 10)
        assert h.lemma1_constant(c, 1.0) == 0.0
        assert h.kappa0(b) == pytest.approx(4.0)

    def test_frozen_geometric_value(self):
        # C = 4, C' = 4, eta = 0.01, T = 100 -> 1.04^100 - 1
        c = h.regularity_constants(h.SmoothedRelu(0.5), h.Squared(0.0, 1.0))
        b = self._inputs(c, 1.0, 0.01, 100)
        assert h.kappa0(b) == pytest.approx(49.504948184269413, rel=1e-13)
        assert h.kappa0(b) == pytest.approx(mp_kappa0(c, 1.0, 0.01, 100), rel=1e-13)

    def test_log_space_matches_naive_when_safe(self):
        # the naive evaluation is the oracle; done in 50-digit arithmetic
        # it is exact, while its float64 form degrades when eta*C is tiny
        # (1 + eta*C truncates eta*C), so that comparison gets a looser
        # tolerance matching its conditioning
        rng = np.random.default_rng(31)
        for _ in range(50):
            c = consts(
                float(rng.uniform(0.1, 1)), float(rng.uniform(0, 1)),
                float(rng.uniform(0.5, 3)), float(rng.uniform(0, 3)),
                1.0,
            )
            g = float(rng.uniform(0, 2))
            eta = float(rng.uniform(1e-4, 0.1))
            t = int(rng.integers(1, 500))
            big_c = h.lemma1_constant(c, g)
            naive_float = (
                h.lemma2_constant(c, g) * ((1 + eta * big_c) ** t - 1) / big_c
                if big_c > 0 else eta * h.lemma2_constant(c, g) * t
            )
            if not math.isfinite(naive_float) or naive_float == 0.0:
                continue
            mine = h.kappa0(self._inputs(c, g, eta, t))
            assert mine == pytest.approx(mp_kappa0(c, g, eta, t), rel=1e-12)
            assert mine == pytest.approx(naive_float, rel=1e-9)

    def test_monotone_in_each_argument(self):
        rng = np.random.default_rng(32)
        c = h.regularity_constants(h.Sigmoid(), h.Squared(0.0, 1.0))
        for _ in range(50):
            g = float(rng.uniform(0.1, 2))
            eta = float(rng.uniform(1e-4, 0.05))
            t = int(rng.integers(1, 1000))
            base = h.kappa0(self._inputs(c, g, eta, t))
            assert h.kappa0(self._inputs(c, g, eta * 1.5, t)) >= base
            assert h.kappa0(self._inputs(c, g, eta, t + 100)) >= base
            assert h.kappa0(self._inputs(c, g * 1.2, eta, t)) >= base

    def test_overflow_reports_inf_with_warning(self):
        c = h.regularity_constants(h.Tanh(), h.Squared(0.0, 1.0))
        b = self._inputs(c, 10.0, 0.5, 100_000)
        with pytest.warns(BoundOverflowWarning):
            assert h.kappa0(b) == math.inf
        with pytest.warns(BoundOverflowWarning):
            assert math.isinf(h.kappa(b))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert h.gap_bound(b) == math.inf
            assert h.gap_perturbation_bound(b) == math.inf


class TestKappa:
    def test_ratio_to_kappa0(self):
        c = h.regularity_constants(h.Sigmoid(), h.Squared(0.0, 1.0))
        b = h.BoundInputs(constants=c, g_max=1.3, eta=0.01, T=50, n=10)
        assert h.kappa(b) == pytest.approx(
            c.alpha_ell * c.alpha_sigma * 1.3 * h.kappa0(b), rel=1e-14
        )

    def test_no_iterations(self):
        c = h.regularity_constants(h.Sigmoid(), h.Squared(0.0, 1.0))
        b = h.BoundInputs(constants=c, g_max=1.0, eta=0.01, T=0, n=10)
        assert h.kappa(b) == 0.0

    def test_frozen_tanh_squared_value(self):
        # Squared(0,1) + tanh at g=1, eta=0.01, T=100: the tanh constants
        # give C = 2 nu_tanh + 2 = 3.5396..., so kappa0 = 35.4929... and
        # kappa = 2 * kappa0 (high-precision oracle cross-check below)
        c = h.regularity_constants(h.Tanh(), h.Squared(0.0, 1.0))
        b = h.BoundInputs(constants=c, g_max=1.0, eta=0.01, T=100, n=100)
        assert h.kappa0(b) == pytest.approx(35.492961649766402, rel=1e-12)
        assert h.kappa(b) == pytest.approx(70.985923299532804, rel=1e-12)
        assert h.kappa(b) == pytest.approx(
            2.0 * mp_kappa0(c, 1.0, 0.01, 100), rel=1e-13
        )


class TestGapBound:
    def test_zero_kappa_collapses_first_term(self):
        c = consts(1.0, 1.0, 2.0, 2.0, 1.0)
        b = h.BoundInputs(
            constants=c, g_max=1.0, eta=0.1, T=0, n=100, delta=math.exp(-2.0)
        )
        assert h.gap_bound(b) == pytest.approx(0.1, rel=1e-12)

    def test_frozen_value(self):
        # kappa = 99, gamma = 1, n = 1000, delta = 0.05; kappa is pinned
        # by choosing T = 0 and adding it manually through the formula
        with mp.workdps(50):
            expected = float(
                mp.mpf(99) / 1000
                + (2 * mp.mpf(99) + 1) / mp.sqrt(1000)
                * mp.sqrt(mp.log(20) / 2)
            )
        assert expected == pytest.approx(7.8007528448078492, rel=1e-14)
        kap = 99.0
        got = kap / 1000 + (2 * kap + 1.0) / math.sqrt(1000) * math.sqrt(
            math.log(1 / 0.05) / 2
        )
        assert got == pytest.approx(expected, rel=1e-13)

    def test_scaling_in_n(self):
        c = consts(0.25, 0.1, 2.0, 2.0, 1.0)
        def bound_at(n):
            b = h.BoundInputs(constants=c, g_max=1.0, eta=0.01, T=0, n=n)
            return h.gap_bound(b)
        # with kappa = 0 (T = 0) only the sqrt(n) term remains
        assert bound_at(200) == pytest.approx(bound_at(100) / math.sqrt(2), rel=1e-12)

    def test_monotone_in_delta_and_n(self):
        c = h.regularity_constants(h.Sigmoid(), h.Squared(0.0, 1.0))
        b1 = h.BoundInputs(constants=c, g_max=1.0, eta=0.01, T=100, n=100, delta=0.05)
        b2 = h.BoundInputs(constants=c, g_max=1.0, eta=0.01, T=100, n=100, delta=0.2)
        b3 = h.BoundInputs(constants=c, g_max=1.0, eta=0.01, T=100, n=400, delta=0.05)
        assert h.gap_bound(b2) < h.gap_bound(b1)
        assert h.gap_bound(b3) < h.gap_bound(b1)

    def test_perturbation_bound(self):
        c = consts(1.0, 1.0, 2.0, 2.0, 1.0)
        b = h.BoundInputs(constants=c, g_max=1.0, eta=0.1, T=0, n=10)
        assert h.gap_perturbation_bound(b) == pytest.approx(0.1)
        b2 = h.BoundInputs(constants=c, g_max=1.0, eta=0.1, T=0, n=20)
        assert h.gap_perturbation_bound(b2) == pytest.approx(0.05)

    def test_input_validation(self):
        c = consts(1.0, 1.0, 2.0, 2.0, 1.0)
        with pytest.raises(ValueError):
            h.BoundInputs(constants=c, g_max=-1.0, eta=0.1, T=1, n=1)
        with pytest.raises(ValueError):
            h.BoundInputs(constants=c, g_max=1.0, eta=0.0, T=1, n=1)
        with pytest.raises(ValueError):
            h.BoundInputs(constants=c, g_max=1.0, eta=0.1, T=1, n=0)
        with pytest.raises(ValueError):
            h.BoundInputs(constants=c, g_max=1.0, eta=0.1, T=1, n=1, delta=1.0)


class TestGraphSizeIndependence:
    def test_bound_invariant_under_graph_growth(self):
        # identical feature dimensions, zero hyperedge features, exact
        # one-hot vertex features: the bound depends on the graph only
        # through mu, which is 1 within 1e-8 for both sizes
        import dataclasses
        c = h.regularity_constants(h.Sigmoid(), h.Squared(0.0, 1.0))
        bounds = []
        for n, m, seed in ((100, 400, 3), (1000, 4000, 4)):
            ds = h.synth_planted(n, m, classes=2, homophily=0.9,
                                 feature_noise=0.0, seed=seed)
            ds = dataclasses.replace(
                ds, x_e=h.FeatureMatrix(np.zeros((ds.hypergraph.n_edges, 2)))
            )
            ctx = h.vertex_context_for(ds, 0.9)
            b = h.BoundInputs(constants=c, g_max=ctx.g_max, eta=0.01,
                              T=2000, n=100, delta=0.05)
            bounds.append(h.gap_bound(b))
        assert bounds[0] == pytest.approx(bounds[1], rel=1e-6)
