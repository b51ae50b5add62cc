"""Per-modality contribution report.

For each modality m, evaluated on the validation split once per epoch:
  I    Gaussian MI between the latent z_m and the fusion hidden representation
  P    unimodal confidence: mean probability the unimodal head gives the true label
  phi  marginal contribution: mean log-likelihood gain of the full fusion pass
       over the pass with modality m ablated
  R    lagged relative improvement of P over n epochs, clamped to [0.01, 10]
  D    max(phi, 0) * R
  W    contribution weight, by default max(D * I, 1e-4)
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Deque, List, Optional, Sequence, Tuple

import numpy as np

from diffcore import build_optimizer, softmax, softmax_cross_entropy, symmetric_kl, true_label_log_probs
from gauss_mi import DegenerateCovarianceError, drop_constant_columns, gaussian_mi

logger = logging.getLogger(__name__)

W_MIN = 1e-4
LOG_PROB_FLOOR = float(np.log(1e-12))
R_MIN = 0.01
R_MAX = 10.0
NEUTRAL_R = 1.0
CONTRIBUTION_MODES = {"dxi", "d_plus_i", "d_only", "i_only", "kl"}


@dataclass
class ModalityContribution:
    info_nats: float
    unimodal_conf: float
    marginal: float
    rel_improve: float
    confidence: float
    weight: float


@dataclass
class ContributionReport:
    epoch: int
    modalities: List[ModalityContribution]
    mode: str = "dxi"
    degenerate_mi: int = 0

    def _column(self, name: str) -> np.ndarray:
        return np.array([getattr(c, name) for c in self.modalities], dtype=np.float64)

    @property
    def weights(self) -> np.ndarray:
        return self._column("weight")

    @property
    def confidences(self) -> np.ndarray:
        return self._column("confidence")

    @property
    def info(self) -> np.ndarray:
        return self._column("info_nats")

    @property
    def marginals(self) -> np.ndarray:
        return self._column("marginal")

    @property
    def rel_improvements(self) -> np.ndarray:
        return self._column("rel_improve")

    @property
    def unimodal_confidences(self) -> np.ndarray:
        return self._column("unimodal_conf")


class PerformanceHistory:
    """Ring buffer of per-epoch unimodal performance P^m(t)."""

    def __init__(self, num_modalities: int, capacity: int) -> None:
        if capacity < 2:
            raise ValueError(f"history capacity must be at least 2, got {capacity}")
        self.num_modalities = num_modalities
        self.capacity = capacity
        self._entries: Deque[Tuple[int, np.ndarray]] = deque(maxlen=capacity)

    @classmethod
    def for_lag(cls, num_modalities: int, lag: int) -> "PerformanceHistory":
        return cls(num_modalities, lag + 1)

    def __len__(self) -> int:
        return len(self._entries)

    def append(self, epoch: int, values: Sequence[float]) -> None:
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if values.shape[0] != self.num_modalities:
            raise ValueError(f"{values.shape[0]} values for {self.num_modalities} modalities")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValueError(f"performance values must lie in [0, 1], got {values}")
        if self._entries and epoch <= self._entries[-1][0]:
            raise ValueError(f"epoch {epoch} is not after {self._entries[-1][0]}")
        self._entries.append((epoch, values.copy()))

    def value(self, modality: int, epoch: int) -> float:
        for recorded, values in self._entries:
            if recorded == epoch:
                return float(values[modality])
        raise KeyError(f"no performance recorded for epoch {epoch}")


def unimodal_confidence(probs_true_label) -> float:
    p = np.asarray(probs_true_label, dtype=np.float64).reshape(-1)
    if p.size == 0:
        raise ValueError("unimodal confidence of an empty batch")
    return float(p.mean())


def marginal_contribution(full_logprobs, ablated_logprobs) -> float:
    full = np.asarray(full_logprobs, dtype=np.float64).reshape(-1)
    ablated = np.asarray(ablated_logprobs, dtype=np.float64).reshape(-1)
    if full.shape != ablated.shape:
        raise ValueError(f"log-probability lengths differ: {full.shape[0]} vs {ablated.shape[0]}")
    if full.size == 0:
        raise ValueError("marginal contribution of an empty batch")
    full = np.maximum(full, LOG_PROB_FLOOR)
    ablated = np.maximum(ablated, LOG_PROB_FLOOR)
    return float((full - ablated).mean())


def relative_improvement(
    hist: PerformanceHistory, modality: int, epoch: int, lag: int, eps: float = 1e-8
) -> float:
    if lag < 1:
        raise ValueError(f"lag must be at least 1, got {lag}")
    if epoch < lag:
        return NEUTRAL_R
    now = hist.value(modality, epoch)
    before = hist.value(modality, epoch - lag)
    raw = (now - before) / max(before, eps)
    return float(np.clip(raw, R_MIN, R_MAX))


def confidence_score(phi: float, r: float) -> float:
    return max(phi, 0.0) * r


def modality_weight(d: float, i: float) -> float:
    return max(d * i, W_MIN)


def _mode_weight(mode: str, d: float, i: float, kl: float) -> float:
    if mode == "dxi":
        return modality_weight(d, i)
    if mode == "d_plus_i":
        return max(d + i, W_MIN)
    if mode == "d_only":
        return max(d, W_MIN)
    if mode == "i_only":
        return max(i, W_MIN)
    if mode == "kl":
        return max(kl, W_MIN)
    raise ValueError(f"unknown contribution mode '{mode}', expected one of {sorted(CONTRIBUTION_MODES)}")


def latent_information(latent, fusion_hidden) -> float:
    """MI in nats between a latent block and the fusion representation.

    Columns without variance are dropped first; a side with no informative
    column carries no information.
    """
    z = drop_constant_columns(latent)
    h = drop_constant_columns(fusion_hidden)
    if z.shape[1] == 0 or h.shape[1] == 0:
        return 0.0
    return gaussian_mi(z, h)


def retrain_ablation_heads(model, train_split, config) -> list:
    """Leave-one-out fusion heads, each fine-tuned with one modality zeroed.

    Works on copies of the fusion head; the model itself is not modified.
    """
    latents = model.forward(train_split.features).latents
    heads = []
    for m in range(model.num_modalities):
        head = model.fusion.copy()
        for layer in head.layers():
            layer.zero_grad()
            layer.velocity_weight.fill(0.0)
            layer.velocity_bias.fill(0.0)
        optimizer = build_optimizer("sgd", head.layers(), config.retrain_lr, config.momentum, 0.0)
        z = model.concat_latents(latents, mask=m)
        for _ in range(config.retrain_steps):
            _, logits = head.forward(z)
            head.backward(softmax_cross_entropy(logits, train_split.labels).grad_logits)
            optimizer.step()
        heads.append(head)
    return heads


def compute_report(
    model,
    val_split,
    hist: PerformanceHistory,
    config,
    epoch: int,
    train_split=None,
) -> ContributionReport:
    """Contribution of every modality at this epoch; appends P(epoch) to hist.

    The model's parameters are only read. With ablation_mode=retrain the
    leave-one-out heads are trained on train_split.
    """
    if val_split.n == 0:
        raise ValueError("contribution needs a non-empty validation split")
    mode = config.contribution_mode
    if mode not in CONTRIBUTION_MODES:
        raise ValueError(f"unknown contribution mode '{mode}', expected one of {sorted(CONTRIBUTION_MODES)}")

    full = model.forward(val_split.features)
    labels = val_split.labels
    full_logprobs = true_label_log_probs(full.fusion_logits, labels)
    fusion_probs = softmax(full.fusion_logits)

    heads: Optional[list] = None
    if config.ablation_mode == "retrain":
        if train_split is None:
            raise ValueError("ablation_mode=retrain needs the training split")
        heads = retrain_ablation_heads(model, train_split, config)

    performance = []
    partial = []
    degenerate = 0
    for m in range(model.num_modalities):
        uni_logprobs = true_label_log_probs(full.unimodal_logits[m], labels)
        performance.append(unimodal_confidence(np.exp(uni_logprobs)))

        masked = model.concat_latents(full.latents, mask=m)
        head = model.fusion if heads is None else heads[m]
        _, ablated_logits = head.forward(masked)
        phi = marginal_contribution(full_logprobs, true_label_log_probs(ablated_logits, labels))

        try:
            info = latent_information(full.latents[m], full.fusion_hidden)
        except DegenerateCovarianceError as e:
            logger.warning(f"Epoch {epoch}: degenerate MI for modality {m}, using I=0 ({e})")
            info = 0.0
            degenerate += 1

        kl = 0.0
        if mode == "kl":
            kl = symmetric_kl(softmax(full.unimodal_logits[m]), fusion_probs)
        partial.append((info, phi, kl))

    hist.append(epoch, performance)

    modalities = []
    for m, (info, phi, kl) in enumerate(partial):
        r = relative_improvement(hist, m, epoch, config.lag, config.eps)
        d = confidence_score(phi, r)
        modalities.append(
            ModalityContribution(
                info_nats=info,
                unimodal_conf=performance[m],
                marginal=phi,
                rel_improve=r,
                confidence=d,
                weight=_mode_weight(mode, d, info, kl),
            )
        )
    report = ContributionReport(epoch, modalities, mode, degenerate)
    logger.debug(f"Epoch {epoch}: contribution weights {report.weights}")
    return report
