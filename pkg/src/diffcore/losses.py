"""Softmax cross-entropy and related probability helpers."""

from typing import NamedTuple

import numpy as np

from diffcore.matrix import DimensionError, Matrix, as_matrix, ensure_finite


class CrossEntropy(NamedTuple):
    loss: float
    probs: Matrix
    grad_logits: Matrix


def log_softmax(logits: Matrix) -> Matrix:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: Matrix) -> Matrix:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def check_labels(labels, n: int, k: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != n:
        raise DimensionError(f"{labels.shape[0]} labels for {n} rows of logits")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k}), got range [{labels.min()}, {labels.max()}]")
    return labels


def softmax_cross_entropy(logits: Matrix, labels) -> CrossEntropy:
    """Mean cross-entropy of integer labels under softmax(logits).

    Gradient is with respect to the logits of the mean loss.
    """
    logits = as_matrix(logits, "logits")
    n, k = logits.shape
    labels = check_labels(labels, n, k)
    logp = log_softmax(logits)
    probs = np.exp(logp)
    rows = np.arange(n)
    loss = float(-logp[rows, labels].mean())
    grad = probs.copy()
    grad[rows, labels] -= 1.0
    grad /= n
    ensure_finite(grad, "cross-entropy gradient")
    return CrossEntropy(loss, probs, grad)


def true_label_log_probs(logits: Matrix, labels) -> np.ndarray:
    logits = as_matrix(logits, "logits")
    labels = check_labels(labels, *logits.shape)
    return log_softmax(logits)[np.arange(logits.shape[0]), labels]


def label_entropy(labels, num_classes: int) -> float:
    """Entropy in nats of the empirical label distribution."""
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=num_classes)
    freq = counts[counts > 0] / counts.sum()
    return float(-(freq * np.log(freq)).sum())


def symmetric_kl(p: Matrix, q: Matrix, floor: float = 1e-12) -> float:
    """Mean over rows of KL(p||q) + KL(q||p)."""
    p = np.maximum(p, floor)
    q = np.maximum(q, floor)
    diff = np.log(p) - np.log(q)
    return float(((p - q) * diff).sum(axis=1).mean())
