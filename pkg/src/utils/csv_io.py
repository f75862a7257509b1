"""CSV writers for metrics, similarity matrices, embeddings and summaries.

Cells are written with the csv module (RFC-4180 quoting, "\\n" line endings);
floats use `repr`, which round-trips exactly and does not depend on locale.
None is written as an empty cell.
"""

import csv
import io
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt

from src.models.metrics import METRICS_COLUMNS, MetricsRow


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float | np.floating):
        return repr(float(value))
    if isinstance(value, int | np.integer):
        return str(int(value))
    return str(value)


def write_rows(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    """Write a complete CSV file.

    Returns:
        Number of data rows written.
    """
    count = 0
    with Path(path).open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
            count += 1
    return count


def write_matrix(path: str | Path, matrix: npt.NDArray[np.floating]) -> None:
    """Write a 2-D array with a header row `j0..j{n-1}` and a leading row index."""
    header = ["i"] + [f"j{j}" for j in range(matrix.shape[1])]
    write_rows(path, header, ([i, *row.tolist()] for i, row in enumerate(matrix)))


def read_rows(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


class MetricsWriter:
    """Append-only writer of metrics.csv.

    When resuming, rows after the resume step are dropped first so the file
    matches an uninterrupted run.
    """

    def __init__(self, path: str | Path, resume_step: int | None = None) -> None:
        self.path = Path(path)
        if resume_step is not None and self.path.exists():
            self._truncate_after(resume_step)
        else:
            write_rows(self.path, METRICS_COLUMNS, [])

    def _truncate_after(self, step: int) -> None:
        kept = [
            [row[c] for c in METRICS_COLUMNS]
            for row in read_rows(self.path)
            if int(row["step"]) <= step
        ]
        with self.path.open("w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(METRICS_COLUMNS)
            writer.writerows(kept)

    def append(self, row: MetricsRow) -> None:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow([format_cell(v) for v in row.csv_values()])
        with self.path.open("a", encoding="utf-8", newline="") as f:
            f.write(buf.getvalue())
