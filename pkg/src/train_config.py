"""Training configuration - loaded from a flat key=value file plus CLI flags.

File format (UTF-8, '#' starts a comment, lists are comma-separated):

  # imbalance benchmark
  strategy = strong
  aib_variant = beta
  lambda = 10.0
  dims = 8,8
  strengths = 2.0,0.5

Hyphenated choice values from the command line (inv-beta, d-plus-i,
salt-pepper, train-test) are normalized to underscores.
"""

import copy
import logging
import typing
from contextvars import ContextVar
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple

logger = logging.getLogger(__name__)

STRATEGIES = {"strong", "null", "weak", "ogm"}
AIB_VARIANTS = {"beta", "inv_beta", "mi", "mx", "mx_mi", "off"}
CONTRIBUTION_MODES = {"dxi", "d_plus_i", "d_only", "i_only", "kl"}
NOISE_KINDS = {"none", "gaussian", "salt_pepper"}
NOISE_SCOPES = {"test", "train_test"}
ABLATION_MODES = {"mask", "retrain"}
OPTIMIZERS = {"sgd", "adam"}
ACTIVATIONS = {"relu", "tanh"}

# config-file spellings that differ from the attribute name
KEY_ALIASES = {"lambda": "lambda_aib"}

CHOICE_FIELDS = {
    "strategy": STRATEGIES,
    "aib_variant": AIB_VARIANTS,
    "contribution_mode": CONTRIBUTION_MODES,
    "noise": NOISE_KINDS,
    "noise_scope": NOISE_SCOPES,
    "ablation_mode": ABLATION_MODES,
    "optimizer": OPTIMIZERS,
    "activation": ACTIVATIONS,
}


class ConfigError(ValueError):
    """Configuration failed validation."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration: " + "; ".join(self.errors))


@dataclass
class ConfigValidationResult:
    """Result of config validation."""

    valid: bool
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


@dataclass
class TrainConfig:
    """Everything a training run needs; serializes losslessly to key=value text."""

    # Dataset: a saved file, or generated from the fields below
    dataset: str = ""
    classes: int = 4
    dims: List[int] = field(default_factory=lambda: [8, 8])
    strengths: List[float] = field(default_factory=lambda: [2.0, 0.5])
    within_std: float = 3.0
    n_train: int = 2000
    n_val: int = 500
    n_test: int = 500
    data_seed: int = 0

    # Noise attack
    noise: str = "none"
    epsilon: float = 0.0
    noise_scope: str = "test"
    noise_modalities: List[int] = field(default_factory=list)  # empty = all
    noise_seed: int = 0

    # Optimization
    epochs: int = 60
    batch_size: int = 64
    lr: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 1e-4
    optimizer: str = "sgd"

    # Contribution, modulation and bottleneck
    temperature: float = 1.0
    eta: float = 1.0
    lambda_aib: float = 10.0
    lag: int = 5
    eps: float = 1e-8
    strategy: str = "strong"
    aib_variant: str = "beta"
    contribution_mode: str = "dxi"
    beta_on_compression: bool = False
    loss_weights: List[float] = field(default_factory=list)  # empty = all 1
    modulate_heads: bool = True
    ablation_mode: str = "mask"
    retrain_steps: int = 20
    retrain_lr: float = 0.01

    # Architecture
    encoder_dims: List[int] = field(default_factory=lambda: [64, 32])
    latent_dim: int = 16
    fusion_hidden: int = 32
    activation: str = "relu"

    # Run
    seed: int = 0
    out: str = "runs/latest"
    record_wall_time: bool = False

    @property
    def num_modalities(self) -> int:
        return len(self.dims)

    def modality_loss_weights(self, num_modalities: int) -> List[float]:
        return list(self.loss_weights) if self.loss_weights else [1.0] * num_modalities

    def to_text(self) -> str:
        """Serialize as key=value lines that parse back to an equal config."""
        lines = ["# training configuration snapshot"]
        for f in fields(self):
            key = next((k for k, v in KEY_ALIASES.items() if v == f.name), f.name)
            lines.append(f"{key} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, overrides: Dict[str, object]) -> "TrainConfig":
        """Validated copy with attributes replaced; strings are parsed like file values."""
        config = copy.deepcopy(self)
        hints = typing.get_type_hints(TrainConfig)
        for key, value in overrides.items():
            name = KEY_ALIASES.get(key, key).replace("-", "_")
            if name not in hints:
                raise ConfigError([f"unknown config key '{key}'"])
            if isinstance(value, str):
                if name in CHOICE_FIELDS:
                    value = value.replace("-", "_")
                try:
                    value = _parse_value(hints[name], value)
                except ValueError as e:
                    raise ConfigError([f"'{key}': {e}"]) from e
            setattr(config, name, value)
        validation = validate_train_config(config)
        if not validation.valid:
            raise ConfigError(validation.errors)
        return config

    @classmethod
    def from_text(cls, content: str) -> "TrainConfig":
        config, validation = parse_train_config(content)
        if not validation.valid:
            raise ConfigError(validation.errors)
        return config

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        config = cls.from_text(Path(path).read_text(encoding="utf-8"))
        logger.info(f"Loaded training config from {path}")
        return config


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def _parse_scalar(kind, raw: str):
    if kind is bool:
        lowered = raw.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got '{raw}'")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def _parse_value(annotation, raw: str):
    if typing.get_origin(annotation) in (list, List):
        (item_type,) = typing.get_args(annotation)
        return [_parse_scalar(item_type, part.strip()) for part in raw.split(",") if part.strip()]
    return _parse_scalar(annotation, raw)


def parse_key_values(content: str) -> Tuple[Dict[str, str], List[str]]:
    """Split key=value text into a dict; returns (values, syntax errors)."""
    values: Dict[str, str] = {}
    errors: List[str] = []
    for lineno, line in enumerate(content.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            errors.append(f"line {lineno}: expected key=value, got '{stripped}'")
            continue
        key, raw = stripped.split("=", 1)
        values[key.strip()] = raw.strip()
    return values, errors


def parse_train_config(content: str) -> Tuple[TrainConfig, ConfigValidationResult]:
    """Parse and validate key=value content.

    Returns:
        Tuple of (TrainConfig, ConfigValidationResult)
    """
    values, errors = parse_key_values(content)
    warnings: List[str] = []
    config = TrainConfig()
    hints = typing.get_type_hints(TrainConfig)

    for key, raw in values.items():
        name = KEY_ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
        if name not in hints:
            warnings.append(f"Unknown config key: '{key}'")
            continue
        if name in CHOICE_FIELDS:
            raw = raw.replace("-", "_")
        try:
            setattr(config, name, _parse_value(hints[name], raw))
        except ValueError as e:
            errors.append(f"'{key}': {e}")

    validation = validate_train_config(config)
    validation.errors[:0] = errors
    validation.warnings[:0] = warnings
    validation.valid = not validation.errors

    for error in validation.errors:
        logger.error(f"Config error: {error}")
    for warning in validation.warnings:
        logger.warning(f"Config warning: {warning}")
    return config, validation


def validate_train_config(config: TrainConfig) -> ConfigValidationResult:
    """Check ranges, choices and cross-field consistency."""
    errors: List[str] = []
    warnings: List[str] = []

    for name, choices in CHOICE_FIELDS.items():
        value = getattr(config, name)
        if value not in choices:
            errors.append(f"'{name}' must be one of {sorted(choices)}, got '{value}'")

    positive_ints = ["classes", "n_train", "n_val", "n_test", "epochs", "batch_size",
                     "lag", "latent_dim", "fusion_hidden", "retrain_steps"]
    for name in positive_ints:
        if getattr(config, name) < 1:
            errors.append(f"'{name}' must be positive")
    positive_floats = ["within_std", "lr", "temperature", "eps", "retrain_lr"]
    for name in positive_floats:
        if not getattr(config, name) > 0.0:
            errors.append(f"'{name}' must be positive")
    for name in ["epsilon", "weight_decay", "eta", "lambda_aib"]:
        if getattr(config, name) < 0.0:
            errors.append(f"'{name}' must be non-negative")
    if not 0.0 <= config.momentum < 1.0:
        errors.append("'momentum' must lie in [0, 1)")
    for name in ["seed", "data_seed", "noise_seed"]:
        if not 0 <= getattr(config, name) < 2 ** 64:
            errors.append(f"'{name}' must be an unsigned 64-bit integer")

    if config.classes < 2:
        errors.append("'classes' must be at least 2")
    if not config.dataset:
        m = len(config.dims)
        if m < 2:
            errors.append("'dims' must name at least two modalities")
        if len(config.strengths) != m:
            errors.append(f"'strengths' has {len(config.strengths)} entries for {m} modalities")
        if any(d < 1 for d in config.dims):
            errors.append("'dims' entries must be positive")
        if any(s < 0.0 for s in config.strengths):
            errors.append("'strengths' entries must be non-negative")
        if config.loss_weights and len(config.loss_weights) != m:
            errors.append(f"'loss_weights' has {len(config.loss_weights)} entries for {m} modalities")
        if any(i < 0 or i >= m for i in config.noise_modalities):
            errors.append(f"'noise_modalities' entries must lie in [0, {m})")
        if config.n_val < 2:
            errors.append("'n_val' must be at least 2 for covariance estimates")
        elif config.n_val < config.latent_dim + config.fusion_hidden + 2:
            warnings.append(
                f"n_val={config.n_val} is small for MI between a {config.latent_dim}-dim latent "
                f"and a {config.fusion_hidden}-dim fusion representation"
            )
    if any(w < 0.0 for w in config.loss_weights):
        errors.append("'loss_weights' entries must be non-negative")
    if len(config.encoder_dims) < 1 or any(d < 1 for d in config.encoder_dims):
        errors.append("'encoder_dims' must list positive layer widths")
    if config.noise != "none" and config.epsilon == 0.0:
        warnings.append("noise is enabled with epsilon=0; the attack is the identity")

    return ConfigValidationResult(valid=not errors, errors=errors, warnings=warnings)


# Context variable holding the configuration of the running command
_config_var: ContextVar[Optional[TrainConfig]] = ContextVar("train_config", default=None)


def get_train_config() -> TrainConfig:
    """Get the active training configuration, creating defaults if unset."""
    config = _config_var.get()
    if config is None:
        config = TrainConfig()
        _config_var.set(config)
    return config


def set_train_config(config: TrainConfig) -> None:
    _config_var.set(config)


def reset_train_config() -> None:
    """Reset the configuration to None (used between tests)."""
    _config_var.set(None)
