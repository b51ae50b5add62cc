"""Trainer CLI subcommands."""

from commands.base import BaseCommand
from commands.gen_data import GenData
from commands.train import Train
from commands.evaluate import Evaluate
from commands.sweep import Sweep

COMMANDS = {
    "gen-data": GenData,
    "train": Train,
    "eval": Evaluate,
    "sweep": Sweep,
}

__all__ = ["BaseCommand", "GenData", "Train", "Evaluate", "Sweep", "COMMANDS"]
