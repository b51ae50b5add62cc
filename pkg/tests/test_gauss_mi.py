"""Tests for Gaussian mutual information."""

import logging
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from diffcore import DimensionError
from gauss_mi import (
    CovarianceEstimate,
    DegenerateCovarianceError,
    InsufficientSamplesError,
    drop_constant_columns,
    gaussian_mi,
    log_det_psd,
    sample_covariance,
)
from rng import RngState


def cofactor_det(A):
    if A.shape[0] == 1:
        return A[0, 0]
    total = 0.0
    for j in range(A.shape[0]):
        minor = np.delete(A[1:], j, axis=1)
        total += (-1) ** j * A[0, j] * cofactor_det(minor)
    return total


def correlated_pair(rho, n=10000, seed=0):
    z = RngState(seed).standard_normal((n, 2))
    x = z[:, :1]
    y = rho * z[:, :1] + np.sqrt(1.0 - rho ** 2) * z[:, 1:]
    return x, y


class TestSampleCovariance:
    """Tests for covariance estimation."""

    def test_unbiased_divisor_and_jitter(self):
        X = np.array([[1.0], [3.0]])
        cov = sample_covariance(X)
        # variance with divisor N-1 is 2.0
        assert cov.jitter == pytest.approx(2e-6)
        assert cov.sigma[0, 0] == pytest.approx(2.0 + 2e-6)

    def test_symmetric(self):
        cov = sample_covariance(RngState(1).standard_normal((30, 4)))
        assert np.array_equal(cov.sigma, cov.sigma.T)

    def test_needs_two_samples(self):
        with pytest.raises(InsufficientSamplesError):
            sample_covariance(np.ones((1, 3)))

    def test_identical_rows_leave_only_jitter(self):
        cov = sample_covariance(np.array([[1.5, -2.0, 0.3], [1.5, -2.0, 0.3]]))
        assert cov.jitter == 1e-6
        assert np.allclose(cov.sigma, 1e-6 * np.eye(3), rtol=0.0, atol=1e-18)

    def test_square_corners_by_hand(self):
        X = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]])
        cov = sample_covariance(X)
        jitter = 1e-6 * (8.0 / 3.0) / 2
        assert cov.jitter == pytest.approx(jitter)
        expected = np.diag([4.0 / 3.0, 4.0 / 3.0]) + jitter * np.eye(2)
        assert np.allclose(cov.sigma, expected, rtol=0.0, atol=1e-12)

    def test_large_standard_normal_is_near_identity(self):
        cov = sample_covariance(RngState(11).standard_normal((10000, 3)))
        assert np.max(np.abs(cov.sigma - np.eye(3))) < 0.05


class TestLogDet:
    """Tests for the Cholesky log-determinant."""

    def test_diagonal(self):
        cov = CovarianceEstimate(np.diag([2.0, 3.0]), jitter=0.0, n_samples=10)
        assert log_det_psd(cov) == pytest.approx(np.log(6.0))

    def test_zero_jitter_uses_matrix_as_is(self):
        sigma = np.array([[1.0, 0.5], [0.5, 1.0]])
        cov = CovarianceEstimate(sigma, jitter=0.0, n_samples=10)
        assert log_det_psd(cov) == pytest.approx(np.log(0.75))

    def test_identity(self):
        cov = CovarianceEstimate(np.eye(4), jitter=0.0, n_samples=10)
        assert log_det_psd(cov) == pytest.approx(0.0, abs=1e-12)

    def test_jitter_only_covariance_is_accepted(self):
        cov = sample_covariance(np.array([[0.2, 0.4], [0.2, 0.4]]))
        assert log_det_psd(cov) == pytest.approx(2.0 * np.log(1e-6), rel=1e-9)

    def test_small_scale_column_is_not_rejected(self):
        rng = RngState(12)
        X = rng.standard_normal((500, 2)) * np.array([1.0, 1e-3])
        cov = sample_covariance(X)
        _, expected = np.linalg.slogdet(cov.sigma)
        assert log_det_psd(cov) == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("dim", [1, 2, 3, 4])
    def test_matches_cofactor_determinant(self, dim):
        rng = RngState(20 + dim)
        for _ in range(5):
            A = rng.standard_normal((dim, dim))
            sigma = A @ A.T + 0.1 * np.eye(dim)
            cov = CovarianceEstimate(sigma, jitter=0.0, n_samples=10)
            assert log_det_psd(cov) == pytest.approx(np.log(cofactor_det(sigma)), abs=1e-8)

    def test_singular_input_recovers_on_retry(self):
        cov = CovarianceEstimate(np.ones((2, 2)), jitter=0.0, n_samples=10)
        assert log_det_psd(cov) == pytest.approx(np.log(2e-6), rel=1e-4)

    def test_indefinite_input_raises(self):
        cov = CovarianceEstimate(np.diag([1.0, -1.0]), jitter=0.0, n_samples=10)
        with pytest.raises(DegenerateCovarianceError):
            log_det_psd(cov)


class TestGaussianMI:
    """Tests for gaussian_mi."""

    @pytest.mark.parametrize("rho,expected", [(0.2, 0.0202), (0.5, 0.1438), (0.8, 0.5108)])
    def test_closed_form_oracle(self, rho, expected):
        x, y = correlated_pair(rho)
        assert -0.5 * np.log(1.0 - rho ** 2) == pytest.approx(expected, abs=1e-4)
        assert gaussian_mi(x, y) == pytest.approx(expected, abs=0.02)

    def test_independent(self):
        x, y = correlated_pair(0.0, seed=3)
        assert gaussian_mi(x, y) <= 0.01

    def test_non_negative(self):
        rng = RngState(4)
        assert gaussian_mi(rng.standard_normal((50, 2)), rng.standard_normal((50, 3))) >= 0.0

    def test_symmetric_in_arguments(self):
        x, y = correlated_pair(0.5, n=500)
        assert gaussian_mi(x, y) == pytest.approx(gaussian_mi(y, x), rel=1e-9)

    def test_invariant_to_shift(self):
        x, y = correlated_pair(0.5, n=500)
        assert gaussian_mi(x + 100.0, y) == pytest.approx(gaussian_mi(x, y), abs=1e-6)

    def test_invariant_to_invertible_linear_map(self):
        rng = RngState(13)
        x = rng.standard_normal((2000, 2))
        y = 0.6 * x[:, :1] + 0.8 * rng.standard_normal((2000, 1))
        angle = 0.7
        rotation = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        transform = rotation @ np.diag([1.0, 20.0])
        assert np.linalg.cond(transform) < 100.0
        baseline = gaussian_mi(x, y)
        assert baseline > 0.1
        assert gaussian_mi(x @ transform + 3.0, y) == pytest.approx(baseline, abs=1e-6)

    def test_strictly_increasing_in_abs_correlation(self):
        values = [gaussian_mi(*correlated_pair(rho, seed=7)) for rho in (0.2, 0.5, 0.8)]
        assert values[0] < values[1] < values[2]
        negative = [gaussian_mi(*correlated_pair(-rho, seed=7)) for rho in (0.2, 0.5, 0.8)]
        assert negative[0] < negative[1] < negative[2]

    def test_duplicated_column_within_one_side(self):
        x, y = correlated_pair(0.5, seed=8)
        doubled = np.concatenate([x, x], axis=1)
        assert gaussian_mi(doubled, y) == pytest.approx(gaussian_mi(x, y), abs=1e-3)

    def test_small_scale_column_gives_finite_estimate(self):
        rng = RngState(14)
        x = rng.standard_normal((1000, 2)) * np.array([1.0, 1e-3])
        y = x[:, 1:] * 1e3 * 0.5 + np.sqrt(0.75) * rng.standard_normal((1000, 1))
        mi = gaussian_mi(x, y)
        assert np.isfinite(mi)
        assert mi == pytest.approx(0.1438, abs=0.05)

    def test_sample_count_mismatch(self):
        with pytest.raises(DimensionError):
            gaussian_mi(np.ones((5, 1)), np.ones((6, 1)))

    def test_identical_features_are_degenerate(self):
        x = RngState(5).standard_normal((100, 2))
        with pytest.raises(DegenerateCovarianceError):
            gaussian_mi(x, x)

    def test_warns_when_undersampled(self, caplog):
        rng = RngState(6)
        with caplog.at_level(logging.WARNING, logger="gauss_mi"):
            gaussian_mi(rng.standard_normal((7, 3)), rng.standard_normal((7, 3)))
        assert any("poorly conditioned" in r.message for r in caplog.records)


class TestDropConstantColumns:
    """Tests for drop_constant_columns."""

    def test_drops_constant(self):
        X = np.column_stack([np.arange(5.0), np.zeros(5), np.arange(5.0) * 2])
        assert drop_constant_columns(X).shape == (5, 2)

    def test_all_constant(self):
        assert drop_constant_columns(np.ones((4, 3))).shape == (4, 0)
