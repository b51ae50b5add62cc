"""Closed-form Gaussian mutual information between feature batches.

I(X;Y) = 1/2 [logdet(S_X) + logdet(S_Y) - logdet(S_Z)], with S_Z the joint
covariance of the concatenated features. Covariances are always mean-centered
and carry a small shrinkage jitter on the diagonal.
"""

import logging
from dataclasses import dataclass

import numpy as np

from diffcore.matrix import DimensionError, Matrix, as_matrix

logger = logging.getLogger(__name__)

JITTER_SCALE = 1e-6
MAX_JITTER_RETRIES = 3
# An eigenvalue within this multiple of the jitter carries no variance of its
# own: the direction exists only because of the jitter.
RANK_FLOOR = 2.0


class InsufficientSamplesError(ValueError):
    """Fewer than two samples were given for a covariance."""


class DegenerateCovarianceError(ValueError):
    """Covariance stays singular after every jitter escalation."""


@dataclass
class CovarianceEstimate:
    sigma: Matrix
    jitter: float
    n_samples: int

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    def effective_rank(self) -> int:
        """Number of directions with variance clearly above the jitter."""
        if self.jitter <= 0.0:
            return self.dim
        eig = np.linalg.eigvalsh(self.sigma)
        return int(np.sum(eig > RANK_FLOOR * self.jitter))


def sample_covariance(X: Matrix) -> CovarianceEstimate:
    """Unbiased covariance (divisor N-1) plus jitter 1e-6 * trace / D on the diagonal."""
    X = as_matrix(X, "X")
    n, d = X.shape
    if n < 2:
        raise InsufficientSamplesError(f"covariance needs at least 2 samples, got {n}")
    centered = X - X.mean(axis=0)
    sigma = centered.T @ centered / (n - 1)
    sigma = 0.5 * (sigma + sigma.T)
    trace = float(np.trace(sigma))
    jitter = JITTER_SCALE * trace / d if trace > 0.0 else JITTER_SCALE
    sigma[np.diag_indices(d)] += jitter
    return CovarianceEstimate(sigma=sigma, jitter=jitter, n_samples=n)


def log_det_psd(cov: CovarianceEstimate) -> float:
    """log det via Cholesky, escalating the jitter x10 up to three times."""
    d = cov.dim
    eye = np.eye(d)
    base = cov.sigma - cov.jitter * eye
    if cov.jitter > 0.0:
        schedule = [cov.jitter * 10.0 ** k for k in range(MAX_JITTER_RETRIES + 1)]
    else:
        trace = float(np.trace(base))
        start = JITTER_SCALE * trace / d if trace > 0.0 else JITTER_SCALE
        schedule = [0.0] + [start * 10.0 ** k for k in range(MAX_JITTER_RETRIES)]

    for attempt, applied in enumerate(schedule):
        candidate = cov.sigma if attempt == 0 else base + applied * eye
        try:
            pivots = np.diag(np.linalg.cholesky(candidate))
        except np.linalg.LinAlgError:
            logger.debug(f"Cholesky failed at jitter {applied:.3e} (attempt {attempt})")
            continue
        if np.all(pivots > 0.0) and np.all(np.isfinite(pivots)):
            return float(2.0 * np.log(pivots).sum())
    raise DegenerateCovarianceError(
        f"covariance of dimension {d} is singular after {MAX_JITTER_RETRIES} jitter escalations"
    )


def drop_constant_columns(X: Matrix, rel_tol: float = 1e-4) -> Matrix:
    """Remove columns whose variance is negligible relative to the largest one."""
    X = as_matrix(X, "X")
    var = X.var(axis=0)
    top = float(var.max()) if var.size else 0.0
    if top <= 0.0:
        return X[:, :0]
    return X[:, var > rel_tol * top]


def standardize_columns(X: Matrix) -> Matrix:
    """Center every column and scale it to unit standard deviation.

    Zero-variance columns are only centered.
    """
    X = as_matrix(X, "X")
    centered = X - X.mean(axis=0)
    std = centered.std(axis=0)
    return centered / np.where(std > 0.0, std, 1.0)


def gaussian_mi(X: Matrix, Y: Matrix) -> float:
    """Gaussian mutual information in nats, clamped at zero.

    Columns are standardized first so every covariance shares one scale; the
    estimate is unchanged by per-column rescaling. The joint is degenerate when
    it has fewer informative directions than the two marginals together, e.g.
    when Y repeats X.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise DimensionError(f"sample counts differ: X {X.shape} vs Y {Y.shape}")
    n, dx = X.shape
    dy = Y.shape[1]
    if n < dx + dy + 2:
        logger.warning(
            f"gaussian_mi: {n} samples for {dx}+{dy} dimensions; estimate is poorly conditioned"
        )
    Xs = standardize_columns(X)
    Ys = standardize_columns(Y)
    cov_x = sample_covariance(Xs)
    cov_y = sample_covariance(Ys)
    cov_joint = sample_covariance(np.concatenate([Xs, Ys], axis=1))

    rank_x, rank_y = cov_x.effective_rank(), cov_y.effective_rank()
    rank_joint = cov_joint.effective_rank()
    if rank_joint < rank_x + rank_y:
        raise DegenerateCovarianceError(
            f"joint covariance is degenerate: rank {rank_joint} < {rank_x} + {rank_y}"
        )
    mi = 0.5 * (log_det_psd(cov_x) + log_det_psd(cov_y) - log_det_psd(cov_joint))
    return max(mi, 0.0)
