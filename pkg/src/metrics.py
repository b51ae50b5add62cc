"""Per-epoch metrics rows and the metrics.csv writer."""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence

logger = logging.getLogger(__name__)

PER_MODALITY_FIELDS = ("W", "D", "I", "phi", "R", "beta", "a")


def metrics_header(num_modalities: int) -> List[str]:
    mods = range(num_modalities)
    header = ["epoch", "fusion_acc"]
    header += [f"acc_m{m}" for m in mods]
    header += ["loss_total", "loss_ce_fusion", "loss_ce_uni", "loss_aib"]
    for name in PER_MODALITY_FIELDS:
        header += [f"{name}_m{m}" for m in mods]
    header.append("wall_ms")
    return header


@dataclass
class EvalResult:
    """Accuracies of one evaluation pass (posterior means, no sampling)."""

    fusion_acc: float
    unimodal_acc: List[float]
    late_fusion_acc: float
    n_samples: int


@dataclass
class EpochMetrics:
    epoch: int
    fusion_acc: float
    unimodal_acc: List[float]
    loss_total: float
    loss_ce_fusion: float
    loss_ce_uni: float
    loss_aib: float
    weights: List[float] = field(default_factory=list)
    confidences: List[float] = field(default_factory=list)
    info: List[float] = field(default_factory=list)
    marginals: List[float] = field(default_factory=list)
    rel_improvements: List[float] = field(default_factory=list)
    betas: List[float] = field(default_factory=list)
    coefficients: List[float] = field(default_factory=list)
    wall_ms: float = 0.0

    @property
    def num_modalities(self) -> int:
        return len(self.unimodal_acc)

    def row(self) -> List[str]:
        per_modality: Sequence[Sequence[float]] = (
            self.weights,
            self.confidences,
            self.info,
            self.marginals,
            self.rel_improvements,
            self.betas,
            self.coefficients,
        )
        values = [str(self.epoch), _fmt(self.fusion_acc)]
        values += [_fmt(a) for a in self.unimodal_acc]
        values += [_fmt(v) for v in (self.loss_total, self.loss_ce_fusion, self.loss_ce_uni, self.loss_aib)]
        for column in per_modality:
            if len(column) != self.num_modalities:
                raise ValueError(
                    f"epoch {self.epoch}: per-modality column has {len(column)} entries "
                    f"for {self.num_modalities} modalities"
                )
            values += [_fmt(v) for v in column]
        values.append(_fmt(self.wall_ms) if self.wall_ms else "0")
        return values


def _fmt(value: float) -> str:
    return repr(float(value))


class MetricsWriter:
    """Appends one row per epoch to metrics.csv, flushing after each row."""

    def __init__(self, path, num_modalities: int) -> None:
        self.path = Path(path)
        self.num_modalities = num_modalities
        self._handle = open(self.path, "w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._handle, lineterminator="\n")
        self._writer.writerow(metrics_header(num_modalities))
        self.rows = 0

    def write(self, metrics: EpochMetrics) -> None:
        self._writer.writerow(metrics.row())
        self._handle.flush()
        self.rows += 1

    def close(self) -> None:
        if not self._handle.closed:
            self._handle.close()
            logger.info(f"Wrote {self.rows} epoch rows to {self.path}")

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_metrics(path) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))
