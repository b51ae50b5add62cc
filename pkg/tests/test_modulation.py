"""Tests for contribution-aware gradient modulation."""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from modulation import GradientBundle, ModulationVector, modulate_gradients, modulation_vector
from rng import RngState


def bundle():
    return GradientBundle(
        modality=[{"m0.enc0.weight": np.ones((2, 2))}, {"m1.enc0.weight": np.ones((2, 2))}],
        shared={"fusion.out.weight": np.ones((3, 2))},
    )


class TestModulationVector:
    """Tests for modulation_vector."""

    @pytest.mark.parametrize("strategy", ["strong", "null", "weak", "ogm"])
    def test_sums_to_one(self, strategy):
        mod = modulation_vector([0.3, 0.05, 0.7], 0.5, strategy)
        assert mod.coefficients.sum() == pytest.approx(1.0, abs=1e-12)

    def test_low_temperature_is_one_hot_on_largest(self):
        mod = modulation_vector([0.1, 0.5], 1e-3, "strong")
        assert mod.coefficients[1] == pytest.approx(1.0, abs=1e-12)

    def test_high_temperature_is_uniform(self):
        mod = modulation_vector([0.1, 0.5], 1e6, "strong")
        assert np.allclose(mod.coefficients, 0.5, atol=1e-6)

    def test_null_is_uniform(self):
        mod = modulation_vector([0.9, 0.1, 0.2, 0.3], 1.0, "null")
        assert np.allclose(mod.coefficients, 0.25)

    def test_weak_favours_smallest(self):
        mod = modulation_vector([0.1, 0.5], 0.1, "weak")
        assert mod.coefficients[0] > mod.coefficients[1]

    def test_strong_favours_largest(self):
        mod = modulation_vector([0.1, 0.5], 0.1, "strong")
        assert mod.coefficients[1] > mod.coefficients[0]

    def test_additive_scale_factors(self):
        mod = modulation_vector([1.0, 1.0], 1.0, "strong", eta=0.5)
        assert np.allclose(mod.scale_factors(), 1.25)

    def test_ogm_scale_factors_subtract(self):
        mod = modulation_vector([1.0, 1.0], 1.0, "ogm", eta=0.5)
        assert np.allclose(mod.scale_factors(), 0.75)

    def test_ogm_scale_floored_at_zero(self):
        mod = modulation_vector([0.0, 10.0], 0.01, "ogm", eta=3.0)
        assert np.all(mod.scale_factors() >= 0.0)

    def test_two_weights_at_unit_temperature(self):
        strong = modulation_vector([2.0, 1.0], 1.0, "strong")
        weak = modulation_vector([2.0, 1.0], 1.0, "weak")
        assert np.allclose(strong.coefficients, [0.7311, 0.2689], atol=1e-4)
        assert np.allclose(weak.coefficients, [0.2689, 0.7311], atol=1e-4)

    def test_argmax_follows_weights_at_any_temperature(self):
        rng = RngState(5)
        for _ in range(10):
            weights = 0.01 + rng.uniform(4)
            for temperature in (0.05, 1.0, 20.0):
                mod = modulation_vector(weights, temperature, "strong")
                assert np.argmax(mod.coefficients) == np.argmax(weights)

    def test_joint_rescaling_of_weights_and_temperature(self):
        weights = np.array([0.4, 1.3, 0.2])
        base = modulation_vector(weights, 0.7, "strong").coefficients
        for c in (0.1, 3.0, 250.0):
            scaled = modulation_vector(weights * c, 0.7 * c, "strong").coefficients
            assert np.allclose(scaled, base, rtol=0.0, atol=1e-12)

    def test_direct_scale_factors(self):
        a = np.array([0.7, 0.3])
        strong = ModulationVector(a, "strong", temperature=1.0, eta=0.1)
        ogm = ModulationVector(a, "ogm", temperature=1.0, eta=0.1)
        assert np.allclose(strong.scale_factors(), [1.07, 1.03])
        assert np.allclose(ogm.scale_factors(), [0.93, 0.97])

    @pytest.mark.parametrize("temperature", [0.0, -1.0])
    def test_rejects_non_positive_temperature(self, temperature):
        with pytest.raises(ValueError):
            modulation_vector([0.1, 0.2], temperature, "strong")

    def test_rejects_unknown_strategy(self):
        with pytest.raises(ValueError):
            modulation_vector([0.1, 0.2], 1.0, "balanced")


class TestModulateGradients:
    """Tests for modulate_gradients."""

    def test_scales_modality_blocks(self):
        mod = modulation_vector([0.2, 0.8], 1.0, "strong", eta=1.0)
        out = modulate_gradients(bundle(), mod)
        factors = 1.0 + mod.coefficients
        assert np.allclose(out.modality[0]["m0.enc0.weight"], factors[0])
        assert np.allclose(out.modality[1]["m1.enc0.weight"], factors[1])

    def test_shared_unchanged(self):
        mod = modulation_vector([0.2, 0.8], 1.0, "strong")
        out = modulate_gradients(bundle(), mod)
        assert np.array_equal(out.shared["fusion.out.weight"], np.ones((3, 2)))

    def test_eta_zero_is_identity(self):
        grads = bundle()
        out = modulate_gradients(grads, modulation_vector([0.2, 0.8], 1.0, "null", eta=0.0))
        for before, after in zip(grads.modality, out.modality):
            for key in before:
                assert np.array_equal(before[key], after[key])

    def test_input_not_mutated(self):
        grads = bundle()
        modulate_gradients(grads, modulation_vector([0.2, 0.8], 1.0, "strong"))
        assert np.array_equal(grads.modality[0]["m0.enc0.weight"], np.ones((2, 2)))

    def test_modality_count_mismatch(self):
        with pytest.raises(ValueError):
            modulate_gradients(bundle(), modulation_vector([0.2, 0.3, 0.5], 1.0, "strong"))

    def test_positively_homogeneous(self):
        rng = RngState(6)
        grads = GradientBundle(
            modality=[{"w": rng.standard_normal((3, 2))}, {"w": rng.standard_normal((2, 2))}],
            shared={"s": rng.standard_normal((4,))},
        )
        mod = modulation_vector([0.3, 0.9], 0.5, "strong", eta=0.8)
        for c in (0.25, 4.0):
            lhs = modulate_gradients(grads.scaled(c), mod)
            rhs = modulate_gradients(grads, mod).scaled(c)
            for left, right in zip(lhs.modality, rhs.modality):
                assert np.allclose(left["w"], right["w"], rtol=1e-12, atol=0.0)
            assert np.allclose(lhs.shared["s"], rhs.shared["s"], rtol=1e-12, atol=0.0)


class TestDescentDiagnostic:
    """One modulated step on a block-separable convex quadratic decreases it."""

    @staticmethod
    def quadratic(rng, dims):
        blocks = []
        for d in dims:
            A = rng.standard_normal((d, d))
            blocks.append((A @ A.T + 0.1 * np.eye(d), rng.standard_normal(d)))
        return blocks

    @staticmethod
    def value(blocks, thetas):
        return sum(0.5 * t @ A @ t + b @ t for (A, b), t in zip(blocks, thetas))

    @pytest.mark.parametrize("strategy", ["strong", "weak", "ogm"])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_modulated_step_decreases_objective(self, strategy, seed):
        rng = RngState(seed, stream=9)
        blocks = self.quadratic(rng, [3, 4])
        thetas = [rng.standard_normal(A.shape[0]) for A, _ in blocks]
        smoothness = max(float(np.linalg.eigvalsh(A).max()) for A, _ in blocks)
        step = 0.9 / smoothness

        mod = modulation_vector(0.01 + rng.uniform(2), 1.0, strategy, eta=0.5)
        assert np.all(mod.eta * mod.coefficients <= 0.5)
        grads = GradientBundle(modality=[{"theta": A @ t + b} for (A, b), t in zip(blocks, thetas)])
        modulated = modulate_gradients(grads, mod)
        stepped = [t - step * g["theta"] for t, g in zip(thetas, modulated.modality)]
        assert self.value(blocks, stepped) < self.value(blocks, thetas)
