"""Base command class for the trainer CLI.

Provides common functionality for all subcommands:
- Access to the active training configuration
- Output directory handling
- Dataset preparation (load or generate, then attack)
"""

import logging
from abc import ABC, abstractmethod
from argparse import Namespace
from pathlib import Path

from synthdata import MultimodalDataset
from train_config import TrainConfig, get_train_config
from trainer import prepare_datasets

logger = logging.getLogger(__name__)


class BaseCommand(ABC):
    """Abstract base class for all subcommands.

    Subclasses must implement:
    - name: The subcommand name used on the command line
    - run(): The main execution logic, returning a process exit code
    """

    def __init__(self, config: TrainConfig = None):
        self.config = config if config is not None else get_train_config()

    @property
    @abstractmethod
    def name(self) -> str:
        """Subcommand name."""
        pass

    @abstractmethod
    def run(self, args: Namespace) -> int:
        """Execute the command."""
        pass

    def out_dir(self) -> Path:
        path = Path(self.config.out)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def datasets(self) -> tuple:
        """(clean, attacked) datasets for the active configuration."""
        clean, attacked = prepare_datasets(self.config)
        self.describe(attacked)
        return clean, attacked

    def describe(self, dataset: MultimodalDataset) -> None:
        sizes = {name: split.n for name, split in dataset.splits.items()}
        logger.info(
            f"[{self.name}] dataset: {dataset.num_modalities} modalities, "
            f"{dataset.num_classes} classes, splits {sizes}"
        )
