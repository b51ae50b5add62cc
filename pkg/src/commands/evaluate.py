"""eval: re-evaluate a saved model on the configured test split."""

import json
import logging
from argparse import Namespace

from commands.base import BaseCommand
from model import load_model
from trainer import evaluate

logger = logging.getLogger(__name__)


class Evaluate(BaseCommand):
    """Evaluate a saved model, with every single-modality ablation."""

    @property
    def name(self) -> str:
        return "eval"

    def run(self, args: Namespace) -> int:
        if not getattr(args, "model", None):
            logger.error("eval needs --model <path to model.npz>")
            return 2
        model = load_model(args.model)
        clean, attacked = self.datasets()
        if attacked.num_modalities != model.num_modalities:
            logger.error(
                f"model has {model.num_modalities} modalities, dataset has {attacked.num_modalities}"
            )
            return 1

        test = attacked["test"]
        full = evaluate(model, test)
        report = {
            "model": str(args.model),
            "model_sha256": model.parameter_checksum(),
            "fusion_acc": full.fusion_acc,
            "unimodal_acc": full.unimodal_acc,
            "late_fusion_acc": full.late_fusion_acc,
            "masked_fusion_acc": [
                evaluate(model, test, mask=m).fusion_acc for m in range(model.num_modalities)
            ],
        }
        if attacked is not clean:
            report["clean_fusion_acc"] = evaluate(model, clean["test"]).fusion_acc

        path = self.out_dir() / "eval.json"
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.info(f"Fusion accuracy {full.fusion_acc:.4f}; report written to {path}")
        print(json.dumps(report, sort_keys=True))
        return 0
