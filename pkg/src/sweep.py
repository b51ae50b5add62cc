"""Grid sweeps over training configurations.

Every (point, seed) pair is an independent training run with its own output
directory. Runs may execute in worker processes; the summary table is written
only by the parent, in grid order.
"""

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from sweep_config import SweepConfig, point_overrides
from train_config import ConfigError, TrainConfig
from trainer import train

logger = logging.getLogger(__name__)

# normal-approximation 95% half-width multiplier
Z_95 = 1.96


class SweepError(ValueError):
    """The sweep cannot be launched."""


@dataclass
class SweepTask:
    index: int
    point: str
    point_index: int
    seed: int
    overrides: Dict[str, str]
    base: TrainConfig
    run_dir: str
    vary_data_seed: bool = True


def _run_task(task: SweepTask) -> Dict[str, Any]:
    """Train one (point, seed); failures are returned, not raised."""
    row: Dict[str, Any] = {"point": task.point, "seed": task.seed, "status": "ok", "error": ""}
    try:
        overrides = dict(task.overrides)
        overrides["seed"] = str(task.seed)
        if task.vary_data_seed:
            overrides["data_seed"] = str(task.seed)
            overrides["noise_seed"] = str(task.seed)
        overrides["out"] = task.run_dir
        config = task.base.with_overrides(overrides)
        summary = train(config).summary
        final = summary["final"]
        row["fusion_acc"] = final["fusion_acc"]
        row["late_fusion_acc"] = final["late_fusion_acc"]
        row["unimodal_acc"] = final["unimodal_acc"]
        clean = summary.get("clean_test", final)
        row["clean_fusion_acc"] = clean["fusion_acc"]
        row["noise_drop"] = summary.get("noise_drop", 0.0)
        row["best_epoch"] = summary["best_epoch"]
    except (ConfigError, ValueError, ArithmeticError, RuntimeError, OSError) as e:
        logger.error(f"Sweep point '{task.point}' seed {task.seed} failed: {e}")
        row["status"] = "failed"
        row["error"] = f"{type(e).__name__}: {e}"
    return row


def build_tasks(sweep: SweepConfig, base: TrainConfig, out_dir: Path) -> List[SweepTask]:
    points = sweep.points()
    if not points:
        raise SweepError("sweep grid is empty; nothing to run")
    if not sweep.seeds:
        raise SweepError("sweep has no seeds")
    tasks = []
    for p, (label, overrides) in enumerate(points):
        for seed in sweep.seeds:
            tasks.append(
                SweepTask(
                    index=len(tasks),
                    point=label,
                    point_index=p,
                    seed=seed,
                    overrides=point_overrides(overrides),
                    base=base,
                    run_dir=str(out_dir / f"p{p:03d}" / f"seed{seed}"),
                    vary_data_seed=sweep.vary_data_seed,
                )
            )
    return tasks


def metric_columns(num_modalities: int) -> List[str]:
    return ["fusion_acc", "late_fusion_acc", "clean_fusion_acc", "noise_drop"] + [
        f"acc_m{m}" for m in range(num_modalities)
    ]


def _flatten(row: Dict[str, Any]) -> Dict[str, Any]:
    flat = {k: v for k, v in row.items() if k != "unimodal_acc"}
    for m, acc in enumerate(row.get("unimodal_acc", [])):
        flat[f"acc_m{m}"] = acc
    return flat


def aggregate(rows: List[Dict[str, Any]], columns: List[str]) -> Dict[str, Any]:
    """Mean, sample stddev and 95% half-width of each metric over successful rows."""
    ok = [r for r in rows if r["status"] == "ok"]
    out: Dict[str, Any] = {"n": len(ok)}
    for col in columns:
        values = np.array([r[col] for r in ok if col in r], dtype=np.float64)
        if values.size == 0:
            out[col] = out[f"{col}_std"] = out[f"{col}_ci95"] = ""
            continue
        std = float(values.std(ddof=1)) if values.size > 1 else 0.0
        out[col] = float(values.mean())
        out[f"{col}_std"] = std
        out[f"{col}_ci95"] = Z_95 * std / math.sqrt(values.size)
    return out


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_summary(path: Path, rows: List[Dict[str, Any]], points: List[str]) -> None:
    num_modalities = max((len(r.get("unimodal_acc", [])) for r in rows), default=0)
    columns = metric_columns(num_modalities)
    header = ["kind", "point", "seed", "status", "error", "n", "best_epoch"]
    for col in columns:
        header += [col, f"{col}_std", f"{col}_ci95"]

    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=header, lineterminator="\n", restval="")
        writer.writeheader()
        flat = [_flatten(r) for r in rows]
        for row in flat:
            writer.writerow({"kind": "detail", **{k: _cell(v) for k, v in row.items() if k in header}})
        for label in points:
            stats = aggregate([r for r in flat if r["point"] == label], columns)
            writer.writerow({"kind": "aggregate", "point": label, **{k: _cell(v) for k, v in stats.items()}})
    logger.info(f"Wrote sweep summary ({len(rows)} runs, {len(points)} points) to {path}")


def run_sweep(
    sweep: SweepConfig,
    base: Optional[TrainConfig] = None,
    out_dir=None,
    workers: Optional[int] = None,
) -> Path:
    """Run every (point, seed) and write summary.csv; returns its path.

    An empty grid raises SweepError before any run starts.
    """
    out_dir = Path(out_dir or sweep.out)
    base = base if base is not None else sweep.base_config()
    tasks = build_tasks(sweep, base, out_dir)
    workers = workers or sweep.workers
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f"Sweep: {len(tasks)} runs over {len(sweep.points())} points with {workers} worker(s)")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_task, tasks))
    else:
        rows = [_run_task(task) for task in tasks]

    labels = list(dict.fromkeys(task.point for task in tasks))
    summary_path = out_dir / "summary.csv"
    write_summary(summary_path, rows, labels)
    failed = sum(1 for r in rows if r["status"] != "ok")
    if failed:
        logger.warning(f"Sweep finished with {failed} failed run(s)")
    return summary_path
