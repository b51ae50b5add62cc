"""gen-data: write the configured dataset (noise included) to a file."""

import logging
from argparse import Namespace
from pathlib import Path

from commands.base import BaseCommand
from dataset_io import save_dataset

logger = logging.getLogger(__name__)

DATASET_SUFFIX = ".cald"


class GenData(BaseCommand):
    """Generate a synthetic dataset and save it."""

    @property
    def name(self) -> str:
        return "gen-data"

    def target_path(self) -> Path:
        out = Path(self.config.out)
        if out.suffix == DATASET_SUFFIX:
            return out
        return out / f"dataset{DATASET_SUFFIX}"

    def run(self, args: Namespace) -> int:
        _, attacked = self.datasets()
        path = save_dataset(attacked, self.target_path())
        print(path)
        return 0
