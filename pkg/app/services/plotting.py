"""
Plot artifacts of an experiment.

One SVG per metric: a median line over trials for a single sweep axis, a
heat-grid for two axes (also written as ``<metric>_grid.csv``), and a
per-seed line when nothing is swept. Figures are built with the object API on
the Agg canvas so worker threads never share pyplot state.
"""

import csv
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
from matplotlib.backends.backend_agg import FigureCanvasAgg  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from app.core.exceptions import ExperimentError  # noqa: E402
from app.core.logging_config import get_logger  # noqa: E402
from app.storage.results_store import ResultRow  # noqa: E402

logger = get_logger(__name__)

# fixed so reruns produce identical SVG bytes
_SVG_SALT = "uampmf"


def _ordered(values: Sequence[float]) -> List[float]:
    seen: List[float] = []
    for value in values:
        if value not in seen:
            seen.append(value)
    return seen


def median_grid(
    rows: Sequence[ResultRow], metric: str
) -> Tuple[List[float], List[float], np.ndarray]:
    """
    Median value per (axis1, axis2) cell of ``metric``.

    Returns:
        Tuple of axis1 values, axis2 values (in first-seen order) and the
        len(axis1)×len(axis2) grid, NaN where a cell has no rows
    """
    selected = [row for row in rows if row.metric == metric]
    first = _ordered([row.axis1 for row in selected])
    second = _ordered([row.axis2 for row in selected])
    cells: Dict[Tuple[float, float], List[float]] = {}
    for row in selected:
        cells.setdefault((row.axis1, row.axis2), []).append(row.value_db)

    grid = np.full((len(first), len(second)), np.nan)
    for (a, b), values in cells.items():
        grid[first.index(a), second.index(b)] = float(np.median(values))
    return first, second, grid


def write_grid_csv(path: Path, axes: Sequence[str], first, second, grid: np.ndarray) -> None:
    """Rows are axis1 values, columns axis2 values."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([f"{axes[0]}\\{axes[1]}"] + [f"{value:g}" for value in second])
        for value, cells in zip(first, grid):
            writer.writerow([f"{value:g}"] + [f"{cell:.6f}" for cell in cells])


def _save(figure: Figure, path: Path) -> None:
    FigureCanvasAgg(figure)
    with matplotlib.rc_context({"svg.hashsalt": _SVG_SALT}):
        figure.savefig(path, format="svg", metadata={"Date": None})


def _line_plot(path: Path, metric: str, axis: str, first, grid: np.ndarray) -> None:
    figure = Figure(figsize=(5, 3.5))
    ax = figure.add_subplot()
    ax.plot(first, grid[:, 0], marker="o")
    ax.set_xlabel(axis)
    ax.set_ylabel(f"{metric} (dB)")
    ax.grid(True)
    figure.tight_layout()
    _save(figure, path)


def _heat_grid(path: Path, metric: str, axes: Sequence[str], first, second, grid: np.ndarray) -> None:
    figure = Figure(figsize=(5, 4))
    ax = figure.add_subplot()
    image = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(second)), [f"{v:g}" for v in second])
    ax.set_yticks(range(len(first)), [f"{v:g}" for v in first])
    ax.set_xlabel(axes[1])
    ax.set_ylabel(axes[0])
    figure.colorbar(image, ax=ax, label=f"{metric} (dB)")
    figure.tight_layout()
    _save(figure, path)


def _seed_plot(path: Path, metric: str, rows: Sequence[ResultRow]) -> None:
    selected = [row for row in rows if row.metric == metric]
    figure = Figure(figsize=(5, 3.5))
    ax = figure.add_subplot()
    ax.plot([row.seed for row in selected], [row.value_db for row in selected], marker="o", linestyle="none")
    ax.set_xlabel("seed")
    ax.set_ylabel(f"{metric} (dB)")
    ax.grid(True)
    figure.tight_layout()
    _save(figure, path)


def write_plots(out: Path, config, rows: Sequence[ResultRow]) -> List[Path]:
    """
    Write one plot per metric present in ``rows``.

    Args:
        out: Output directory
        config: The experiment configuration (for the axis names)
        rows: Result rows

    Returns:
        List[Path]: Files written
    """
    out = Path(out)
    axes = config.axes
    written: List[Path] = []
    for metric in _ordered([row.metric for row in rows]):
        plot_path = out / f"{metric}.svg"
        try:
            if not axes:
                _seed_plot(plot_path, metric, rows)
            else:
                first, second, grid = median_grid(rows, metric)
                if len(axes) == 1:
                    _line_plot(plot_path, metric, axes[0], first, grid)
                else:
                    grid_path = out / f"{metric}_grid.csv"
                    write_grid_csv(grid_path, axes, first, second, grid)
                    written.append(grid_path)
                    _heat_grid(plot_path, metric, axes, first, second, grid)
        except (OSError, ValueError) as e:
            raise ExperimentError(config.experiment.application, f"cannot write plot {plot_path}: {e}") from e
        written.append(plot_path)
        logger.debug(f"Wrote plot {plot_path}")
    return written
