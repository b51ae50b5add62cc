"""Contribution-aware asymmetric information bottleneck.

Per modality m the loss is -log(sigmoid(beta_m * I(Z;Y) - I(Z;X))) where the
information terms are variational surrogates:
  I(Z;X) <= KL(q(z|x) || N(0, I)), taken per latent dimension
  I(Z;Y) >= H(Y) - CE(unimodal head on z, y)
beta_m is the share of total contribution held by the other modalities, so a
high-contribution modality gets a small beta. beta multiplies the I(Z;Y) term
unless beta_on_compression moves it onto I(Z;X).
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from diffcore import GaussianPosterior, kl_std_normal, kl_std_normal_backward, softmax_cross_entropy

logger = logging.getLogger(__name__)

AIB_VARIANTS = {"beta", "inv_beta", "mi", "mx", "mx_mi", "off"}
NEUTRAL_BETA = 0.5


@dataclass
class AIBTerms:
    variant: str
    betas: np.ndarray
    mi_zx: np.ndarray
    mi_zy: np.ndarray
    active: np.ndarray
    aib_loss: float
    # partial derivatives of aib_loss with respect to each surrogate
    grad_mi_zx: np.ndarray = field(default=None, repr=False)
    grad_mi_zy: np.ndarray = field(default=None, repr=False)
    # partial derivative of aib_loss with respect to each unimodal CE
    grad_ce: np.ndarray = field(default=None, repr=False)


def beta_factors(weights) -> np.ndarray:
    """beta_m = (sum of the other weights) / (sum of all weights)."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if np.any(w <= 0.0):
        raise ValueError(f"contribution weights must be positive, got {w}")
    total = w.sum()
    return (total - w) / total


def inverse_beta_factors(betas) -> np.ndarray:
    """Normalized reciprocals rescaled so they sum to M - 1 like the originals."""
    b = np.asarray(betas, dtype=np.float64).reshape(-1)
    inv = 1.0 / b
    return inv / inv.sum() * (b.shape[0] - 1)


def mi_zx_surrogate(post: GaussianPosterior) -> float:
    """KL to the unit prior, averaged over latent dimensions."""
    return kl_std_normal(post) / post.mu.shape[1]


def mi_zx_surrogate_backward(post: GaussianPosterior):
    """(d/d mu, d/d logvar) of mi_zx_surrogate."""
    g_mu, g_lv = kl_std_normal_backward(post)
    width = post.mu.shape[1]
    return g_mu / width, g_lv / width


def mi_zy_surrogate(z_head_logits, labels, label_entropy: float) -> float:
    ce = softmax_cross_entropy(z_head_logits, labels).loss
    return max(label_entropy - ce, 0.0)


def variant_betas(weights, variant: str):
    """Per-modality beta and the mask of modalities the variant applies the loss to."""
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if variant not in AIB_VARIANTS:
        raise ValueError(f"unknown AIB variant '{variant}', expected one of {sorted(AIB_VARIANTS)}")
    m = weights.shape[0]
    if variant == "off":
        return np.zeros(m), np.zeros(m, dtype=bool)
    active = np.ones(m, dtype=bool)
    if variant == "beta":
        return beta_factors(weights), active
    if variant == "inv_beta":
        return inverse_beta_factors(beta_factors(weights)), active
    betas = np.full(m, NEUTRAL_BETA)
    active[:] = False
    if variant in ("mi", "mx_mi"):
        active[int(np.argmin(weights))] = True
    if variant in ("mx", "mx_mi"):
        active[int(np.argmax(weights))] = True
    return betas, active


def aib_loss(
    mi_zx: Sequence[float],
    mi_zy: Sequence[float],
    weights: Sequence[float],
    variant: str = "beta",
    beta_on_compression: bool = False,
) -> AIBTerms:
    """Sum of -log(sigmoid(arg_m)) over the modalities the variant selects.

    arg_m = beta_m * mi_zy_m - mi_zx_m, or mi_zy_m - beta_m * mi_zx_m when
    beta_on_compression is set. The 'off' variant yields a zero loss.
    """
    if variant not in AIB_VARIANTS:
        raise ValueError(f"unknown AIB variant '{variant}', expected one of {sorted(AIB_VARIANTS)}")
    zx = np.asarray(mi_zx, dtype=np.float64).reshape(-1)
    zy = np.asarray(mi_zy, dtype=np.float64).reshape(-1)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if not (zx.shape == zy.shape == w.shape):
        raise ValueError(
            f"per-modality lengths differ: mi_zx {zx.shape}, mi_zy {zy.shape}, weights {w.shape}"
        )
    m = w.shape[0]
    if variant == "off":
        zeros = np.zeros(m)
        return AIBTerms(variant, zeros, zx, zy, np.zeros(m, dtype=bool), 0.0, zeros, zeros, zeros)

    betas, active = variant_betas(w, variant)
    if beta_on_compression:
        arg = zy - betas * zx
        d_arg_zy, d_arg_zx = np.ones(m), -betas
    else:
        arg = betas * zy - zx
        d_arg_zy, d_arg_zx = betas, -np.ones(m)

    per_modality = np.logaddexp(0.0, -arg)
    # d/d(arg) of -log(sigmoid(arg)) is -sigmoid(-arg)
    d_loss_d_arg = -_sigmoid(-arg)
    mask = active.astype(np.float64)
    loss = float((per_modality * mask).sum())
    return AIBTerms(
        variant=variant,
        betas=betas,
        mi_zx=zx,
        mi_zy=zy,
        active=active,
        aib_loss=loss,
        grad_mi_zx=d_loss_d_arg * d_arg_zx * mask,
        grad_mi_zy=d_loss_d_arg * d_arg_zy * mask,
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x))


def compute_aib_terms(
    posteriors: List[GaussianPosterior],
    ce_values: Sequence[float],
    label_entropy: float,
    weights: Sequence[float],
    variant: str = "beta",
    beta_on_compression: bool = False,
) -> AIBTerms:
    """Evaluate both surrogates per modality and the resulting AIB loss.

    ce_values are the unimodal cross-entropies already computed for the batch;
    grad_ce carries d(aib_loss)/d(CE_m), zero where I(Z;Y) is clamped at 0.
    """
    zx = np.array([mi_zx_surrogate(p) for p in posteriors])
    raw_zy = label_entropy - np.asarray(ce_values, dtype=np.float64)
    zy = np.maximum(raw_zy, 0.0)
    terms = aib_loss(zx, zy, weights, variant, beta_on_compression)
    terms.grad_ce = -terms.grad_mi_zy * (raw_zy > 0.0)
    return terms
