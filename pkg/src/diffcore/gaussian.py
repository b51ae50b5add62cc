"""Diagonal Gaussian posteriors: reparameterized sampling and KL to N(0, I)."""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from diffcore.matrix import DimensionError, Matrix, as_matrix, ensure_finite
from rng import RngState

LOGVAR_MIN = -10.0
LOGVAR_MAX = 10.0


@dataclass
class GaussianPosterior:
    """q(z|x) = N(mu, exp(logvar)); logvar is stored clamped to [-10, 10]."""

    mu: Matrix
    logvar: Matrix
    # 1 where the raw log-variance was inside the clamp range, 0 where it was clipped
    clamp_mask: Matrix = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.mu = as_matrix(self.mu, "mu")
        raw = as_matrix(self.logvar, "logvar")
        if raw.shape != self.mu.shape:
            raise DimensionError(f"mu {self.mu.shape} and logvar {raw.shape} differ in shape")
        if self.clamp_mask is None:
            self.clamp_mask = ((raw >= LOGVAR_MIN) & (raw <= LOGVAR_MAX)).astype(np.float64)
        self.logvar = np.clip(raw, LOGVAR_MIN, LOGVAR_MAX)

    @property
    def std(self) -> Matrix:
        return np.exp(0.5 * self.logvar)


def reparam_sample(
    post: GaussianPosterior, rng: RngState, return_noise: bool = False
):
    """z = mu + exp(logvar/2) * eps with eps ~ N(0, 1) drawn from rng."""
    eps = rng.standard_normal(post.mu.shape)
    z = ensure_finite(post.mu + post.std * eps, "reparameterized sample")
    if return_noise:
        return z, eps
    return z


def reparam_backward(
    grad_z: Matrix, post: GaussianPosterior, eps: Matrix
) -> Tuple[Matrix, Matrix]:
    """Gradients of z with respect to (mu, raw logvar)."""
    grad_mu = grad_z
    grad_logvar = grad_z * eps * post.std * 0.5 * post.clamp_mask
    return grad_mu, grad_logvar


def kl_std_normal(post: GaussianPosterior) -> float:
    """Mean over rows of KL(q || N(0, I)) = 1/2 sum(mu^2 + var - logvar - 1)."""
    per_row = 0.5 * (post.mu ** 2 + np.exp(post.logvar) - post.logvar - 1.0).sum(axis=1)
    return float(max(per_row.mean(), 0.0))


def kl_std_normal_backward(post: GaussianPosterior) -> Tuple[Matrix, Matrix]:
    """Gradients of kl_std_normal with respect to (mu, raw logvar)."""
    n = post.mu.shape[0]
    grad_mu = post.mu / n
    grad_logvar = 0.5 * (np.exp(post.logvar) - 1.0) / n * post.clamp_mask
    return grad_mu, grad_logvar
