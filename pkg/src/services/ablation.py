"""Ablation sweep: every mode trained under shared seeds, summarised per mode."""

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.config import settings
from src.models.corpus import Utterance
from src.models.metrics import AblationSummaryRow, EvalReport
from src.models.run_config import ABLATION_TABLE, AblationMode, RunConfig
from src.services.evaluation import evaluate
from src.services.network.params import InputDims
from src.services.trainer import Trainer
from src.utils.csv_io import write_rows

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.csv"
REPORT_FILE = "report.json"
SUMMARY_COLUMNS = (
    "mode",
    "baseline",
    "seeds",
    "clean_ter_mean",
    "clean_ter_std",
    "noisy_ter_mean",
    "noisy_ter_std",
)


@dataclass(frozen=True)
class AblationCell:
    """One (mode, seed) training job."""

    mode: AblationMode
    seed: int

    @property
    def run_id(self) -> str:
        return f"{self.mode.value}/seed{self.seed}"

    def directory(self, root: Path) -> Path:
        return root / self.mode.value / f"seed{self.seed}"


def ablation_modes(include_base: bool = False) -> list[AblationMode]:
    """Modes of the sweep in table order; `base` is appended on request."""
    modes = list(ABLATION_TABLE)
    if include_base:
        modes.append(AblationMode.BASE)
    return modes


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return float(np.mean(arr)), std


def summarize(reports: dict[AblationMode, list[EvalReport]]) -> list[AblationSummaryRow]:
    """Mean and sample standard deviation of clean and noisy TER per mode."""
    rows = []
    for mode, runs in reports.items():
        clean_mean, clean_std = _mean_std([r.clean_ter for r in runs])
        noisy = [r.noisy for r in runs if r.noisy is not None]
        noisy_mean, noisy_std = _mean_std(noisy) if noisy else (None, None)
        rows.append(
            AblationSummaryRow(
                mode=mode.value,
                baseline=mode is AblationMode.FULL,
                seeds=len(runs),
                clean_ter_mean=clean_mean,
                clean_ter_std=clean_std,
                noisy_ter_mean=noisy_mean,
                noisy_ter_std=noisy_std,
            )
        )
    return rows


class AblationRunner:
    """Trains and evaluates each (mode, seed) cell in its own directory."""

    def __init__(
        self,
        config: RunConfig,
        train_set: list[Utterance],
        val_set: list[Utterance],
        dims: InputDims,
        until: int | None = None,
    ) -> None:
        """Initialize the runner.

        Args:
            config: Base configuration; each cell overrides ablation and seed.
            train_set: Training utterances shared by every cell.
            val_set: Held-out utterances every cell is scored on.
            dims: Corpus widths and vocabulary size.
            until: Last training step per cell (default total_steps).
        """
        self.config = config
        self.train_set = train_set
        self.val_set = val_set
        self.dims = dims
        self.until = until

    def cell_config(self, cell: AblationCell) -> RunConfig:
        return self.config.with_updates({"train.ablation": cell.mode.value, "train.seed": cell.seed})

    def run_cell(self, cell: AblationCell, root: Path) -> EvalReport:
        config = self.cell_config(cell)
        out_dir = cell.directory(root)
        trainer = Trainer(config, self.train_set, self.dims, run_id=cell.run_id)
        state = trainer.fit(trainer.init_state(), out_dir, self.until)
        report = evaluate(state.params, config, self.val_set)
        report = report.model_copy(update={"checkpoint_step": state.step})
        (out_dir / REPORT_FILE).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.info(
            "%s: clean TER %.4f, noisy TER %s", cell.run_id, report.clean_ter, report.noisy
        )
        return report

    def run(
        self,
        out_dir: Path,
        seeds: Sequence[int],
        include_base: bool = False,
    ) -> list[AblationSummaryRow]:
        """Run every cell and write summary.csv.

        Cells are independent and run in parallel up to the configured thread
        count; each writes only under its own directory.

        Args:
            out_dir: Root output directory.
            seeds: Seeds shared by every mode.
            include_base: Also run the base model.

        Returns:
            One summary row per mode, in table order.
        """
        modes = ablation_modes(include_base)
        cells = [AblationCell(mode, seed) for mode in modes for seed in seeds]
        workers = settings.worker_count(len(cells))
        logger.info("Running %d ablation cells on %d workers", len(cells), workers)
        if workers == 1:
            reports = [self.run_cell(c, out_dir) for c in cells]
        else:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                reports = list(ex.map(lambda c: self.run_cell(c, out_dir), cells))

        grouped: dict[AblationMode, list[EvalReport]] = {m: [] for m in modes}
        for cell, report in zip(cells, reports, strict=True):
            grouped[cell.mode].append(report)
        rows = summarize(grouped)
        write_rows(
            out_dir / SUMMARY_FILE,
            SUMMARY_COLUMNS,
            ([getattr(r, c) for c in SUMMARY_COLUMNS] for r in rows),
        )
        return rows
