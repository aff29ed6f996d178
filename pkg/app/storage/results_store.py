"""results.csv and config.echo artifacts of an experiment."""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional

from app.core.exceptions import ExperimentError
from app.core.logging_config import get_logger

logger = get_logger(__name__)

RESULTS_HEADER = ("application", "axis1", "axis2", "seed", "metric", "value_db", "iters", "wall_s", "converged")


@dataclass(frozen=True)
class ResultRow:
    """One (sweep point, trial, metric) measurement."""

    application: str
    axis1: Optional[float]
    axis2: Optional[float]
    seed: int
    metric: str
    value_db: float
    iters: int
    wall_s: float
    converged: bool

    def as_record(self) -> List[str]:
        return [
            self.application,
            _format_axis(self.axis1),
            _format_axis(self.axis2),
            str(self.seed),
            self.metric,
            f"{self.value_db:.6f}",
            str(self.iters),
            f"{self.wall_s:.6f}",
            "true" if self.converged else "false",
        ]


def _format_axis(value: Optional[float]) -> str:
    return "" if value is None else f"{value:g}"


def _parse_axis(text: str) -> Optional[float]:
    return None if text == "" else float(text)


def write_results(path: Path, rows: Iterable[ResultRow]) -> None:
    """Write rows under the fixed header, in the given order."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(RESULTS_HEADER)
            for row in rows:
                writer.writerow(row.as_record())
    except OSError as e:
        raise ExperimentError(str(path), f"cannot write results: {e}") from e
    logger.info(f"Results written to {path}")


def read_results(path: Path) -> List[ResultRow]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if tuple(header) != RESULTS_HEADER:
            raise ExperimentError(str(path), f"unexpected header {header}")
        return [
            ResultRow(
                application=record[0],
                axis1=_parse_axis(record[1]),
                axis2=_parse_axis(record[2]),
                seed=int(record[3]),
                metric=record[4],
                value_db=float(record[5]),
                iters=int(record[6]),
                wall_s=float(record[7]),
                converged=record[8] == "true",
            )
            for record in reader
        ]


def write_config_echo(path: Path, text: str) -> None:
    """Store the resolved configuration next to the results."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
