"""Sweep grid configuration - loaded from a YAML file.

Example sweep.yml:
==================
  base: configs/imbalance.cfg     # optional key=value training config
  overrides:                      # optional, applied to every point
    epochs: 60
  grid:                           # cartesian product, axes in file order
    strategy: [strong, "null", weak, ogm]   # quote null and off, YAML reads them as keywords
    aib_variant: [beta]
    noise:                        # a noise axis entry may set several keys
      - none
      - {noise: gaussian, epsilon: 10, noise_modalities: [1]}
  seeds: [0, 1, 2, 3, 4]
  vary_data_seed: true            # each seed also redraws the dataset and noise
  workers: 2
  out: runs/strategy-sweep
"""

import itertools
import logging
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Tuple

import yaml

from train_config import ConfigValidationResult, KEY_ALIASES, TrainConfig

logger = logging.getLogger(__name__)

VALID_KEYS = {"base", "overrides", "grid", "seeds", "vary_data_seed", "workers", "out"}


@dataclass
class SweepConfig:
    """Grid of training overrides crossed with a list of seeds."""

    grid: Dict[str, List[Any]] = field(default_factory=dict)
    seeds: List[int] = field(default_factory=lambda: [0])
    # the run seed also becomes data_seed and noise_seed
    vary_data_seed: bool = True
    base: str = ""
    overrides: Dict[str, Any] = field(default_factory=dict)
    workers: int = 1
    out: str = "runs/sweep"

    def points(self) -> List[Tuple[str, Dict[str, Any]]]:
        """(label, overrides) for every grid point, in axis order."""
        if not self.grid or any(not values for values in self.grid.values()):
            return []
        axes = list(self.grid.items())
        points = []
        for combo in itertools.product(*(values for _, values in axes)):
            overrides: Dict[str, Any] = {}
            labels = []
            for (axis, _), value in zip(axes, combo):
                setting = _axis_setting(axis, value)
                overrides.update(setting)
                labels.append(_label(setting))
            points.append(("/".join(labels), overrides))
        return points

    def base_config(self) -> TrainConfig:
        config = TrainConfig.from_file(self.base) if self.base else TrainConfig()
        return config.with_overrides(point_overrides(self.overrides))


def _axis_setting(axis: str, value: Any) -> Dict[str, Any]:
    if isinstance(value, dict):
        return dict(value)
    return {axis: value}


def _label(setting: Dict[str, Any]) -> str:
    return ",".join(f"{k}={_text(v)}" for k, v in setting.items())


def _text(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(_text(v) for v in value)
    return str(value)


def point_overrides(overrides: Dict[str, Any]) -> Dict[str, str]:
    """YAML scalars and lists as the key=value text TrainConfig parses."""
    return {k: _text(v) for k, v in overrides.items()}


def _known_key(key: str) -> bool:
    name = KEY_ALIASES.get(key, key).replace("-", "_")
    return name in typing.get_type_hints(TrainConfig)


def validate_sweep_config(data: dict) -> ConfigValidationResult:
    """Validate sweep YAML structure and values.

    Returns:
        ConfigValidationResult with errors and warnings
    """
    errors = []
    warnings = []

    unknown_keys = set(data.keys()) - VALID_KEYS
    if unknown_keys:
        warnings.append(f"Unknown sweep keys: {', '.join(sorted(unknown_keys))}")

    grid = data.get("grid")
    if not isinstance(grid, dict) or not grid:
        errors.append("'grid' must be a non-empty mapping of config key to values")
    else:
        for axis, values in grid.items():
            if not isinstance(values, list) or not values:
                errors.append(f"grid axis '{axis}' must be a non-empty list")
                continue
            for value in values:
                setting = _axis_setting(axis, value)
                for key in setting:
                    if not _known_key(key):
                        errors.append(f"grid axis '{axis}' sets unknown config key '{key}'")

    seeds = data.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds:
        errors.append("'seeds' must be a non-empty list of integers")
    elif not all(isinstance(s, int) and not isinstance(s, bool) and 0 <= s < 2 ** 64 for s in seeds):
        errors.append("'seeds' must contain unsigned 64-bit integers")
    elif len(set(seeds)) != len(seeds):
        warnings.append("'seeds' contains duplicates")

    if "overrides" in data:
        overrides = data["overrides"]
        if not isinstance(overrides, dict):
            errors.append("'overrides' must be a mapping")
        else:
            for key in overrides:
                if not _known_key(key):
                    errors.append(f"'overrides' sets unknown config key '{key}'")

    if "workers" in data:
        workers = data["workers"]
        if not isinstance(workers, int) or isinstance(workers, bool) or workers < 1:
            errors.append("'workers' must be a positive integer")

    if "vary_data_seed" in data and not isinstance(data["vary_data_seed"], bool):
        errors.append("'vary_data_seed' must be true or false")

    for key in ("base", "out"):
        if key in data and not isinstance(data[key], str):
            errors.append(f"'{key}' must be a string")

    return ConfigValidationResult(valid=len(errors) == 0, errors=errors, warnings=warnings)


def parse_sweep_config(content: str) -> Tuple[SweepConfig, ConfigValidationResult]:
    """Parse and validate sweep YAML content.

    Returns:
        Tuple of (SweepConfig, ConfigValidationResult)
    """
    try:
        data = yaml.safe_load(content) or {}
    except yaml.YAMLError as e:
        result = ConfigValidationResult(valid=False, errors=[f"YAML parse error: {e}"])
        return SweepConfig(), result
    if not isinstance(data, dict):
        result = ConfigValidationResult(valid=False, errors=["sweep file must contain a mapping"])
        return SweepConfig(), result

    validation = validate_sweep_config(data)
    for error in validation.errors:
        logger.error(f"Sweep config error: {error}")
    for warning in validation.warnings:
        logger.warning(f"Sweep config warning: {warning}")

    config = SweepConfig()
    if not validation.valid:
        return config, validation

    config.grid = dict(data["grid"])
    config.seeds = list(data.get("seeds", [0]))
    config.vary_data_seed = data.get("vary_data_seed", True)
    config.base = data.get("base", "")
    config.overrides = dict(data.get("overrides", {}))
    config.workers = data.get("workers", 1)
    config.out = data.get("out", config.out)
    return config, validation


def load_sweep_config(path) -> Tuple[SweepConfig, ConfigValidationResult]:
    content = Path(path).read_text(encoding="utf-8")
    logger.info(f"Loaded sweep config from {path}")
    return parse_sweep_config(content)
