"""train: one training run into the configured output directory."""

import logging
from argparse import Namespace

from commands.base import BaseCommand
from trainer import train

logger = logging.getLogger(__name__)


class Train(BaseCommand):
    """Train a model with the active configuration."""

    @property
    def name(self) -> str:
        return "train"

    def run(self, args: Namespace) -> int:
        result = train(self.config)
        print(result.run_dir)
        return 0
