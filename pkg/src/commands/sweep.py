"""sweep: run a YAML grid of training configurations."""

import logging
from argparse import Namespace

from commands.base import BaseCommand
from sweep import run_sweep
from sweep_config import load_sweep_config, point_overrides

logger = logging.getLogger(__name__)


class Sweep(BaseCommand):
    """Run every grid point for every seed and write summary.csv."""

    @property
    def name(self) -> str:
        return "sweep"

    def run(self, args: Namespace) -> int:
        if not getattr(args, "grid", None):
            logger.error("sweep needs --grid <path to sweep YAML>")
            return 2
        sweep, validation = load_sweep_config(args.grid)
        if not validation.valid:
            logger.error(f"Sweep config validation failed: {validation.errors}")
            return 1

        if sweep.base:
            base = sweep.base_config()
        else:
            base = self.config.with_overrides(point_overrides(sweep.overrides))
        # command-line flags win over the sweep file; grid axes still vary per point
        base = base.with_overrides(getattr(args, "cli_overrides", {}))
        out_dir = self.config.out if getattr(args, "out", None) else sweep.out
        path = run_sweep(sweep, base=base, out_dir=out_dir, workers=getattr(args, "workers", None))
        print(path)
        return 0
