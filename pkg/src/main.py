"""Main entry point for the contribution-aware multimodal trainer."""

import argparse
import logging
import os
import sys
from typing import Dict, List, Optional

from commands import COMMANDS
from dataset_io import DatasetError
from train_config import ConfigError, TrainConfig, reset_train_config, set_train_config

# Configure logging
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

# CLI flag -> config key; values are parsed by TrainConfig.with_overrides
CONFIG_FLAGS = {
    "dataset": "dataset",
    "strategy": "strategy",
    "aib_variant": "aib_variant",
    "contribution_mode": "contribution_mode",
    "temperature": "temperature",
    "eta": "eta",
    "lambda_aib": "lambda",
    "noise": "noise",
    "epsilon": "epsilon",
    "noise_scope": "noise_scope",
    "seed": "seed",
    "epochs": "epochs",
    "out": "out",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value training config file")
    common.add_argument("--dataset", help="dataset file written by gen-data")
    common.add_argument("--strategy", help="strong|null|weak|ogm")
    common.add_argument("--aib-variant", dest="aib_variant", help="beta|inv-beta|mi|mx|mx-mi|off")
    common.add_argument(
        "--contribution-mode", dest="contribution_mode", help="dxi|d-plus-i|d-only|i-only|kl"
    )
    common.add_argument("--temperature", help="modulation softmax temperature T")
    common.add_argument("--eta", help="modulation strength")
    common.add_argument("--lambda", dest="lambda_aib", help="bottleneck loss weight")
    common.add_argument("--noise", help="gaussian|salt-pepper|none")
    common.add_argument("--epsilon", help="noise level")
    common.add_argument("--noise-scope", dest="noise_scope", help="test|train-test")
    common.add_argument("--seed", help="unsigned 64-bit run seed")
    common.add_argument("--epochs", help="number of epochs")
    common.add_argument("--out", help="output directory")
    common.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config key (repeatable)",
    )

    parser = argparse.ArgumentParser(
        prog="cal-trainer", description="Contribution-aware multimodal training on synthetic data"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-data", parents=[common], help="generate and save a dataset")
    sub.add_parser("train", parents=[common], help="train one run")
    eval_parser = sub.add_parser("eval", parents=[common], help="evaluate a saved model")
    eval_parser.add_argument("--model", help="model.npz written by train")
    sweep_parser = sub.add_parser("sweep", parents=[common], help="run a YAML sweep grid")
    sweep_parser.add_argument("--grid", help="sweep YAML file")
    sweep_parser.add_argument("--workers", type=int, help="parallel worker processes")
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, str]:
    """Config overrides from flags; --set pairs come first so named flags win."""
    overrides: Dict[str, str] = {}
    for pair in args.set:
        if "=" not in pair:
            raise ConfigError([f"--set expects KEY=VALUE, got '{pair}'"])
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    for attr, key in CONFIG_FLAGS.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return overrides


def load_config(args: argparse.Namespace) -> TrainConfig:
    config = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    return config.with_overrides(collect_overrides(args))


def main(argv: Optional[List[str]] = None) -> int:
    # Configure logging level from env
    log_level = os.environ.get("LOG_LEVEL", "INFO").upper()
    logging.getLogger().setLevel(getattr(logging, log_level, logging.INFO))

    args = build_parser().parse_args(argv)
    logger.info(f"Command: {args.command}")

    try:
        config = load_config(args)
        args.cli_overrides = collect_overrides(args)
    except (ConfigError, OSError) as e:
        logger.error(f"Configuration failed: {e}")
        return 2

    set_train_config(config)
    try:
        return COMMANDS[args.command]().run(args)
    except (ConfigError, DatasetError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
    except (ValueError, ArithmeticError, RuntimeError, OSError) as e:
        logger.error(f"Error running {args.command}: {e}")
        return 1
    finally:
        reset_train_config()


if __name__ == "__main__":
    sys.exit(main())
