"""Contribution-aware gradient modulation.

Strategies:
  strong - a = softmax(W / T), gradients scaled by (1 + eta * a_m)
  weak   - a = softmax(-W / T), same additive scaling
  null   - a uniform, same additive scaling
  ogm    - a as for strong, gradients scaled by max(1 - eta * a_m, 0)

Only modality-specific parameter blocks are scaled; shared fusion gradients
pass through unchanged.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

logger = logging.getLogger(__name__)

STRATEGIES = {"strong", "null", "weak", "ogm"}


@dataclass
class ModulationVector:
    coefficients: np.ndarray
    strategy: str
    temperature: float
    eta: float = 1.0

    def scale_factors(self) -> np.ndarray:
        if self.strategy == "ogm":
            return np.maximum(1.0 - self.eta * self.coefficients, 0.0)
        return 1.0 + self.eta * self.coefficients


@dataclass
class GradientBundle:
    """Per-modality gradient blocks plus the shared fusion gradients.

    Each block maps a parameter name (e.g. "enc1.weight") to its gradient.
    """

    modality: List[Dict[str, np.ndarray]] = field(default_factory=list)
    shared: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def num_modalities(self) -> int:
        return len(self.modality)

    def scaled(self, factor: float) -> "GradientBundle":
        return GradientBundle(
            modality=[{k: v * factor for k, v in block.items()} for block in self.modality],
            shared={k: v * factor for k, v in self.shared.items()},
        )


def _softmax(v: np.ndarray) -> np.ndarray:
    shifted = v - v.max()
    e = np.exp(shifted)
    return e / e.sum()


def modulation_vector(
    weights, temperature: float, strategy: str, eta: float = 1.0
) -> ModulationVector:
    """Build the modulation coefficients from contribution weights.

    The temperature divides the weights, so T -> 0 approaches one-hot on the
    largest weight and T -> infinity approaches uniform.
    """
    if temperature <= 0.0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy '{strategy}', expected one of {sorted(STRATEGIES)}")
    if eta < 0.0:
        raise ValueError(f"eta must be non-negative, got {eta}")
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if strategy == "null":
        coeffs = np.full(w.shape[0], 1.0 / w.shape[0])
    elif strategy == "weak":
        coeffs = _softmax(-w / temperature)
    else:
        coeffs = _softmax(w / temperature)
    return ModulationVector(coeffs, strategy, float(temperature), float(eta))


def modulate_gradients(grads: GradientBundle, mod: ModulationVector) -> GradientBundle:
    """Scale each modality block by its factor; shared gradients are untouched."""
    if grads.num_modalities != mod.coefficients.shape[0]:
        raise ValueError(
            f"bundle has {grads.num_modalities} modality blocks, "
            f"modulation vector has {mod.coefficients.shape[0]} coefficients"
        )
    factors = mod.scale_factors()
    return GradientBundle(
        modality=[
            {name: g * factors[m] for name, g in block.items()}
            for m, block in enumerate(grads.modality)
        ],
        shared=dict(grads.shared),
    )
