"""Training and evaluation.

Each epoch:
  1. contribution report on the validation split (read-only on the model)
  2. modulation vector and AIB betas from the contribution weights
  3. minibatches: forward with sampled latents, total loss, backward,
     gradient modulation, optimizer step
  4. evaluation on the test split, one metrics row
"""

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from aib import AIBTerms, compute_aib_terms, mi_zx_surrogate_backward, variant_betas
from contribution import PerformanceHistory, compute_report
from dataset_io import dataset_to_bytes, load_dataset
from diffcore import (
    Matrix,
    build_optimizer,
    label_entropy,
    softmax,
    softmax_cross_entropy,
)
from metrics import EpochMetrics, EvalResult, MetricsWriter
from model import CALModel, ForwardPass, ModelSpec
from modulation import ModulationVector, modulate_gradients, modulation_vector
from rng import RngState
from synthdata import MultimodalDataset, Split, apply_noise, generate_dataset, noise_from_config, spec_from_config
from train_config import ConfigError, TrainConfig, validate_train_config

logger = logging.getLogger(__name__)

# substream for minibatch shuffling and latent sampling
TRAIN_STREAM = 0x7EA1


@dataclass
class TotalLoss:
    total: float
    ce_fusion: float
    # weighted sum over modalities of lambda_m * CE_m
    ce_unimodal: float
    aib: float
    grad_fusion_logits: Matrix = field(repr=False)
    grad_unimodal_logits: List[Matrix] = field(repr=False)
    grad_mu: Optional[List[Matrix]] = field(default=None, repr=False)
    grad_logvar: Optional[List[Matrix]] = field(default=None, repr=False)


@dataclass
class TrainResult:
    run_dir: Optional[Path]
    model: CALModel
    epochs: List[EpochMetrics]
    summary: dict


def objective(
    ce_fusion: float,
    ce_unimodal: Sequence[float],
    aib: float,
    loss_weights: Sequence[float],
    lambda_aib: float,
) -> float:
    """CE_fusion + sum_m lambda_m * CE_m + lambda * aib."""
    uni = sum(w * ce for w, ce in zip(loss_weights, ce_unimodal))
    return ce_fusion + uni + lambda_aib * aib


def total_loss(
    fusion_logits: Matrix,
    unimodal_logits: Sequence[Matrix],
    labels,
    aib: Optional[AIBTerms],
    config: TrainConfig,
    posteriors=None,
) -> TotalLoss:
    """Scalar training objective with gradients on its inputs.

    aib must have been computed from the same unimodal logits; grad_mu and
    grad_logvar are filled from the compression term when posteriors are given.
    A None aib disables the bottleneck term entirely.
    """
    m_count = len(unimodal_logits)
    weights = config.modality_loss_weights(m_count)
    lam = config.lambda_aib
    ce_f = softmax_cross_entropy(fusion_logits, labels)
    ce_m = [softmax_cross_entropy(logits, labels) for logits in unimodal_logits]

    aib_value = 0.0 if aib is None else aib.aib_loss
    grad_uni = []
    for m, ce in enumerate(ce_m):
        scale = weights[m] if aib is None else weights[m] + lam * aib.grad_ce[m]
        grad_uni.append(scale * ce.grad_logits)

    grad_mu = grad_logvar = None
    if aib is not None and posteriors is not None:
        grad_mu, grad_logvar = [], []
        for m, post in enumerate(posteriors):
            g_mu, g_lv = mi_zx_surrogate_backward(post)
            factor = lam * aib.grad_mi_zx[m]
            grad_mu.append(factor * g_mu)
            grad_logvar.append(factor * g_lv)

    return TotalLoss(
        total=objective(ce_f.loss, [ce.loss for ce in ce_m], aib_value, weights, lam),
        ce_fusion=ce_f.loss,
        ce_unimodal=float(sum(w * ce.loss for w, ce in zip(weights, ce_m))),
        aib=aib_value,
        grad_fusion_logits=ce_f.grad_logits,
        grad_unimodal_logits=grad_uni,
        grad_mu=grad_mu,
        grad_logvar=grad_logvar,
    )


def batch_loss(
    fp: ForwardPass,
    labels,
    contribution_weights,
    entropy: float,
    config: TrainConfig,
    use_aib: bool = True,
) -> TotalLoss:
    """AIB terms plus total loss for one forward pass."""
    aib = None
    if use_aib:
        ce_values = [softmax_cross_entropy(u, labels).loss for u in fp.unimodal_logits]
        aib = compute_aib_terms(
            fp.posteriors,
            ce_values,
            entropy,
            contribution_weights,
            config.aib_variant,
            config.beta_on_compression,
        )
    return total_loss(fp.fusion_logits, fp.unimodal_logits, labels, aib, config, fp.posteriors)


def evaluate(model: CALModel, split: Split, mask: Optional[int] = None) -> EvalResult:
    """Accuracies from posterior means; mask ablates one modality at the fusion input."""
    fp = model.forward(split.features, mask=mask)
    labels = split.labels
    fusion_acc = float(np.mean(np.argmax(fp.fusion_logits, axis=1) == labels))
    unimodal = [float(np.mean(np.argmax(u, axis=1) == labels)) for u in fp.unimodal_logits]
    late = np.mean([softmax(u) for u in fp.unimodal_logits], axis=0)
    late_acc = float(np.mean(np.argmax(late, axis=1) == labels))
    return EvalResult(fusion_acc, unimodal, late_acc, split.n)


def prepare_datasets(config: TrainConfig):
    """(clean dataset, dataset with the configured noise applied)."""
    if config.dataset:
        clean = load_dataset(config.dataset)
    else:
        clean = generate_dataset(spec_from_config(config))
    noise = noise_from_config(config)
    attacked = clean if noise is None else apply_noise(clean, noise)
    return clean, attacked


def fit(
    config: TrainConfig,
    dataset: MultimodalDataset,
    writer: Optional[MetricsWriter] = None,
    enable_cal: bool = True,
) -> TrainResult:
    """Train a fresh model on dataset.

    enable_cal=False skips gradient modulation and the bottleneck term; the
    contribution report is still computed and logged.
    """
    train_split, val_split, test_split = dataset["train"], dataset["val"], dataset["test"]
    num_modalities = dataset.num_modalities
    model = CALModel(ModelSpec.from_config(config, [b.shape[1] for b in train_split.features], dataset.num_classes))
    optimizer = build_optimizer(
        config.optimizer, model.layers(), config.lr, config.momentum, config.weight_decay
    )
    rng = RngState(config.seed, stream=TRAIN_STREAM)
    entropy = label_entropy(train_split.labels, dataset.num_classes)
    hist = PerformanceHistory.for_lag(num_modalities, config.lag)
    logger.info(
        f"Training {model.parameter_count()} parameters for {config.epochs} epochs "
        f"(strategy={config.strategy}, aib={config.aib_variant}, contribution={config.contribution_mode})"
    )

    history: List[EpochMetrics] = []
    degenerate_total = 0
    for epoch in range(config.epochs):
        started = time.perf_counter()
        report = compute_report(model, val_split, hist, config, epoch, train_split=train_split)
        degenerate_total += report.degenerate_mi
        weights = report.weights
        mod = modulation_vector(weights, config.temperature, config.strategy, config.eta)
        betas, _ = variant_betas(weights, config.aib_variant)

        totals = np.zeros(4)
        order = rng.permutation(train_split.n)
        for start in range(0, train_split.n, config.batch_size):
            batch = train_split.subset(order[start:start + config.batch_size])
            model.zero_grad()
            fp = model.forward(batch.features, rng=rng)
            loss = batch_loss(fp, batch.labels, weights, entropy, config, use_aib=enable_cal)
            model.backward(
                fp, loss.grad_fusion_logits, loss.grad_unimodal_logits, loss.grad_mu, loss.grad_logvar
            )
            if enable_cal:
                bundle = model.collect_gradients(include_heads=config.modulate_heads)
                model.assign_gradients(modulate_gradients(bundle, mod))
            optimizer.step()
            totals += batch.n * np.array([loss.total, loss.ce_fusion, loss.ce_unimodal, loss.aib])
        totals /= train_split.n

        result = evaluate(model, test_split)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        metrics = _epoch_metrics(epoch, result, totals, report, betas, mod)
        if config.record_wall_time:
            metrics.wall_ms = elapsed_ms
        history.append(metrics)
        if writer is not None:
            writer.write(metrics)
        logger.info(
            f"Epoch {epoch + 1}/{config.epochs}: fusion_acc={result.fusion_acc:.4f} "
            f"loss={totals[0]:.4f} W={np.round(weights, 4).tolist()} "
            f"a={np.round(mod.coefficients, 4).tolist()} ({elapsed_ms:.0f} ms)"
        )

    summary = {"degenerate_mi": degenerate_total}
    return TrainResult(None, model, history, summary)


def _epoch_metrics(epoch, result: EvalResult, totals, report, betas, mod: ModulationVector) -> EpochMetrics:
    return EpochMetrics(
        epoch=epoch,
        fusion_acc=result.fusion_acc,
        unimodal_acc=list(result.unimodal_acc),
        loss_total=float(totals[0]),
        loss_ce_fusion=float(totals[1]),
        loss_ce_uni=float(totals[2]),
        loss_aib=float(totals[3]),
        weights=report.weights.tolist(),
        confidences=report.confidences.tolist(),
        info=report.info.tolist(),
        marginals=report.marginals.tolist(),
        rel_improvements=report.rel_improvements.tolist(),
        betas=np.asarray(betas, dtype=np.float64).tolist(),
        coefficients=mod.coefficients.tolist(),
    )


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _eval_dict(result: EvalResult) -> dict:
    return {
        "fusion_acc": result.fusion_acc,
        "unimodal_acc": result.unimodal_acc,
        "late_fusion_acc": result.late_fusion_acc,
    }


def build_summary(
    config: TrainConfig,
    clean: MultimodalDataset,
    attacked: MultimodalDataset,
    result: TrainResult,
    wall_time_s: float,
) -> dict:
    final = evaluate(result.model, attacked["test"])
    best = max(result.epochs, key=lambda e: e.fusion_acc) if result.epochs else None
    summary = {
        "epochs": len(result.epochs),
        "final": _eval_dict(final),
        "best_epoch": best.epoch if best else None,
        "best_fusion_acc": best.fusion_acc if best else None,
        "degenerate_mi": result.summary.get("degenerate_mi", 0),
        "provenance": {
            "dataset_sha256": _sha256(dataset_to_bytes(attacked)),
            "config_sha256": _sha256(config.to_text().encode("utf-8")),
            "model_sha256": result.model.parameter_checksum(),
            "dataset": attacked.provenance(),
        },
        "wall_time_s": wall_time_s,
    }
    if attacked is not clean:
        clean_result = evaluate(result.model, clean["test"])
        summary["clean_test"] = _eval_dict(clean_result)
        summary["noisy_test"] = _eval_dict(final)
        summary["noise_drop"] = clean_result.fusion_acc - final.fusion_acc
    return summary


def train(config: TrainConfig, enable_cal: bool = True) -> TrainResult:
    """Full run: writes config.snapshot, metrics.csv, summary.json and model.npz."""
    validation = validate_train_config(config)
    if not validation.valid:
        raise ConfigError(validation.errors)
    for warning in validation.warnings:
        logger.warning(f"Config warning: {warning}")

    started = time.perf_counter()
    clean, attacked = prepare_datasets(config)
    run_dir = Path(config.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.snapshot").write_text(config.to_text(), encoding="utf-8")

    with MetricsWriter(run_dir / "metrics.csv", attacked.num_modalities) as writer:
        result = fit(config, attacked, writer=writer, enable_cal=enable_cal)

    result.model.save(run_dir / "model.npz")
    summary = build_summary(config, clean, attacked, result, time.perf_counter() - started)
    (run_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(
        f"Run finished in {summary['wall_time_s']:.1f}s: final fusion_acc="
        f"{summary['final']['fusion_acc']:.4f} (best {summary['best_fusion_acc']} at epoch {summary['best_epoch']})"
    )
    result.run_dir = run_dir
    result.summary = summary
    return result
