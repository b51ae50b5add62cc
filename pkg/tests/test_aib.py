"""Tests for the asymmetric information bottleneck."""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from aib import (
    NEUTRAL_BETA,
    aib_loss,
    beta_factors,
    compute_aib_terms,
    inverse_beta_factors,
    mi_zx_surrogate,
    mi_zx_surrogate_backward,
    mi_zy_surrogate,
    variant_betas,
)
from diffcore import GaussianPosterior, grad_check
from rng import RngState

LN2 = np.log(2.0)


class TestBetaFactors:
    """Tests for beta_factors and inverse_beta_factors."""

    def test_two_modalities(self):
        assert np.allclose(beta_factors([1.0, 3.0]), [0.75, 0.25])

    @pytest.mark.parametrize("weights", [[0.2, 0.8], [0.1, 0.5, 0.4], [1e-4, 2.0, 3.0, 0.7]])
    def test_sum_is_m_minus_one(self, weights):
        assert beta_factors(weights).sum() == pytest.approx(len(weights) - 1, abs=1e-12)
        assert inverse_beta_factors(beta_factors(weights)).sum() == pytest.approx(
            len(weights) - 1, abs=1e-12
        )

    def test_strictly_decreasing_in_own_weight(self):
        betas = [beta_factors([w, 1.0, 2.0])[0] for w in (0.1, 0.5, 1.0, 4.0)]
        assert all(a > b for a, b in zip(betas, betas[1:]))

    def test_high_contribution_gets_small_beta(self):
        betas = beta_factors([5.0, 1.0])
        assert betas[0] < betas[1]

    def test_inverse_reverses_order(self):
        inv = inverse_beta_factors(beta_factors([5.0, 1.0]))
        assert inv[0] > inv[1]

    def test_rejects_non_positive_weights(self):
        with pytest.raises(ValueError):
            beta_factors([0.0, 1.0])

    def test_own_weight_derivative_is_negative(self):
        rng = RngState(9)
        h = 1e-6
        for _ in range(20):
            weights = 0.05 + rng.uniform(4)
            for m in range(4):
                bumped = weights.copy()
                bumped[m] += h
                slope = (beta_factors(bumped)[m] - beta_factors(weights)[m]) / h
                assert slope < 0.0


class TestVariantBetas:
    """Tests for the per-variant modality selection."""

    def test_beta_all_active(self):
        _, active = variant_betas([0.2, 0.8], "beta")
        assert active.tolist() == [True, True]

    def test_mi_selects_minimum(self):
        betas, active = variant_betas([0.2, 0.8, 0.5], "mi")
        assert active.tolist() == [True, False, False]
        assert np.all(betas == NEUTRAL_BETA)

    def test_mx_selects_maximum(self):
        _, active = variant_betas([0.2, 0.8, 0.5], "mx")
        assert active.tolist() == [False, True, False]

    def test_mx_mi_selects_both(self):
        _, active = variant_betas([0.2, 0.8, 0.5], "mx_mi")
        assert active.tolist() == [True, True, False]

    def test_off(self):
        betas, active = variant_betas([0.2, 0.8], "off")
        assert not active.any()
        assert np.all(betas == 0.0)

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            variant_betas([0.2, 0.8], "sideways")


class TestAIBLoss:
    """Tests for aib_loss."""

    def test_ln2_at_zero_argument(self):
        terms = aib_loss([0.0, 0.0], [0.0, 0.0], [0.3, 0.7])
        assert terms.aib_loss == pytest.approx(2.0 * LN2, abs=1e-9)

    def test_direct_evaluation(self):
        # equal weights give beta = 0.5; -log sigmoid(0.5 * 2 - 0.5)
        terms = aib_loss([0.5, 0.5], [2.0, 2.0], [1.0, 1.0])
        assert terms.aib_loss == pytest.approx(2.0 * 0.47408, abs=1e-5)

    def test_monotone_in_each_surrogate(self):
        rng = RngState(10)
        h = 1e-4
        for _ in range(10):
            zx = rng.uniform(3) * 2.0
            zy = rng.uniform(3)
            weights = 0.1 + rng.uniform(3)
            base = aib_loss(zx, zy, weights).aib_loss
            assert base > 0.0
            for m in range(3):
                step = np.zeros(3)
                step[m] = h
                assert aib_loss(zx, zy + step, weights).aib_loss < base
                assert aib_loss(zx + step, zy, weights).aib_loss > base

    def test_single_active_modality(self):
        terms = aib_loss([0.0, 0.0], [0.0, 0.0], [0.3, 0.7], variant="mx")
        assert terms.aib_loss == pytest.approx(LN2, abs=1e-9)

    def test_off_is_zero(self):
        terms = aib_loss([1.0, 2.0], [0.5, 0.1], [0.3, 0.7], variant="off")
        assert terms.aib_loss == 0.0
        assert np.all(terms.grad_mi_zx == 0.0)

    def test_large_argument_goes_to_zero(self):
        terms = aib_loss([0.0, 0.0], [100.0, 100.0], [1.0, 1.0])
        assert terms.aib_loss < 1e-20
        assert terms.aib_loss >= 0.0

    def test_very_negative_argument_is_finite(self):
        terms = aib_loss([1000.0, 0.0], [0.0, 0.0], [1.0, 1.0])
        assert np.isfinite(terms.aib_loss)
        assert terms.aib_loss == pytest.approx(1000.0 + LN2, rel=1e-9)

    def test_beta_on_compression(self):
        # arg = I_zy - beta * I_zx = 1.0 - 0.5 * 2.0 = 0
        terms = aib_loss([2.0, 2.0], [1.0, 1.0], [1.0, 1.0], beta_on_compression=True)
        assert terms.aib_loss == pytest.approx(2.0 * LN2, abs=1e-9)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            aib_loss([0.0], [0.0, 0.0], [1.0, 1.0])

    @pytest.mark.parametrize("variant", ["beta", "inv_beta", "mi", "mx", "mx_mi"])
    @pytest.mark.parametrize("on_compression", [False, True])
    def test_gradients(self, variant, on_compression):
        rng = RngState(3)
        zx = rng.uniform(3) * 2.0
        zy = rng.uniform(3)
        weights = np.array([0.2, 0.5, 0.3])
        terms = aib_loss(zx, zy, weights, variant, on_compression)
        err = grad_check(
            lambda: aib_loss(zx, zy, weights, variant, on_compression).aib_loss,
            [(zx, terms.grad_mi_zx), (zy, terms.grad_mi_zy)],
        )
        assert err <= 1e-6


class TestSurrogates:
    """Tests for the variational surrogates and compute_aib_terms."""

    def test_mi_zx_is_kl(self):
        post = GaussianPosterior(np.ones((2, 1)), np.zeros((2, 1)))
        assert mi_zx_surrogate(post) == pytest.approx(0.5)

    def test_mi_zx_averages_over_latent_dimensions(self):
        # summed KL is 4 * 0.5 per row
        post = GaussianPosterior(np.ones((3, 4)), np.zeros((3, 4)))
        assert mi_zx_surrogate(post) == pytest.approx(0.5)
        inflated = GaussianPosterior(np.zeros((3, 2)), np.full((3, 2), np.log(2.0)))
        assert mi_zx_surrogate(inflated) == pytest.approx(0.15343, abs=1e-5)

    def test_mi_zx_backward_matches_finite_differences(self):
        rng = RngState(11)
        mu = rng.standard_normal((4, 5))
        logvar = rng.standard_normal((4, 5)) * 0.5
        g_mu, g_lv = mi_zx_surrogate_backward(GaussianPosterior(mu, logvar))
        err = grad_check(
            lambda: mi_zx_surrogate(GaussianPosterior(mu, logvar)), [(mu, g_mu), (logvar, g_lv)]
        )
        assert err <= 1e-4

    def test_mi_zy_clamped_at_zero(self):
        logits = np.array([[0.0, 10.0]])
        assert mi_zy_surrogate(logits, [0], np.log(2.0)) == 0.0

    def test_mi_zy_perfect_predictor(self):
        logits = np.array([[50.0, 0.0], [0.0, 50.0]])
        assert mi_zy_surrogate(logits, [0, 1], np.log(2.0)) == pytest.approx(np.log(2.0))

    def test_grad_ce_zero_when_clamped(self):
        posts = [GaussianPosterior(np.zeros((2, 1)), np.zeros((2, 1))) for _ in range(2)]
        terms = compute_aib_terms(posts, [2.0, 0.1], np.log(2.0), [0.5, 0.5])
        assert terms.mi_zy[0] == 0.0
        assert terms.grad_ce[0] == 0.0
        assert terms.grad_ce[1] > 0.0

    def test_grad_ce_is_negated_grad_mi_zy(self):
        posts = [GaussianPosterior(np.zeros((2, 1)), np.zeros((2, 1))) for _ in range(2)]
        terms = compute_aib_terms(posts, [0.3, 0.1], np.log(2.0), [0.4, 0.6])
        assert np.allclose(terms.grad_ce, -terms.grad_mi_zy)
