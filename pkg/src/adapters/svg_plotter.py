"""SVG rendering of emitted CSVs: lattice heatmaps and accuracy curves with CI error bars."""

import functools
import io
import logging
from collections import defaultdict
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import Normalize, to_hex  # noqa: E402

from src.adapters.csv_writer import (  # noqa: E402
    LATTICE,
    STRATEGY_SWEEP,
    THRESHOLD_SWEEP,
    THRESHOLD_TRADEOFF,
    WEAK_VALUES,
    read_csv,
    write_atomic,
)
from src.core.exceptions import OutputError, SchemaError, UsageError  # noqa: E402
from src.core.types import LATTICE_SIZE  # noqa: E402

logger = logging.getLogger("qalretrieve")

HEATMAP = "heatmap"
CURVES = "curves"
PLOT_KINDS = (HEATMAP, CURVES)

COLORMAP = "bwr"   # blue (-1) - white (0) - red (+1)

# Stable ids and no timestamp so reruns give identical files.
_SVG_RC = {"svg.hashsalt": "qalretrieve", "svg.fonttype": "none"}


def heatmap_colors(values: Sequence[float], vmin: float = -1.0, vmax: float = 1.0) -> list[str]:
    """Hex fill color of each value on the blue-white-red map over [vmin, vmax]."""
    cmap = matplotlib.colormaps[COLORMAP]
    norm = Normalize(vmin=vmin, vmax=vmax, clip=True)
    return [to_hex(cmap(norm(v))) for v in values]


def _grid(rows: list[tuple]) -> np.ndarray:
    grid = np.full((LATTICE_SIZE, LATTICE_SIZE), np.nan)
    for row in rows:
        grid[row[0], row[1]] = row[2]
    return grid


def _render(fig) -> str:
    buffer = io.StringIO()
    fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buffer.getvalue()


def _error_bars(means: Sequence[float], lows: Sequence[Optional[float]],
                highs: Sequence[Optional[float]]) -> np.ndarray:
    # Absent CIs draw as zero-length bars.
    below = [m - lo if lo is not None else 0.0 for m, lo in zip(means, lows)]
    above = [hi - m if hi is not None else 0.0 for m, hi in zip(means, highs)]
    return np.array([below, above])


def _plot_heatmap(schema_name: str, rows: list[tuple]):
    grid = _grid(rows)
    if schema_name == LATTICE.name:
        limit, title, label = 1.0, "Prepared state", "<sigma_z> = cos(alpha)"
    else:
        limit = float(np.nanmax(np.abs(grid))) if rows else 1.0
        limit = limit or 1.0
        title, label = "Single-shot weak values", "q0"

    fig, ax = plt.subplots(figsize=(5.5, 5))
    mesh = ax.pcolormesh(grid, cmap=COLORMAP, vmin=-limit, vmax=limit)
    ax.set_aspect("equal")
    ax.set_xlabel("col")
    ax.set_ylabel("row")
    ax.set_title(title)
    fig.colorbar(mesh, ax=ax, label=label)
    return fig


def _plot_strategy_curves(rows: list[tuple]):
    series = defaultdict(list)
    for strategy, n, _sigma, labels, mean, low, high, _reps in rows:
        series[(strategy, n)].append((labels, mean, low, high))
    multiple_n = len({n for _, n in series}) > 1

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for (strategy, n), points in series.items():
        points.sort()
        xs, means, lows, highs = zip(*points)
        ax.errorbar(xs, means, yerr=_error_bars(means, lows, highs), capsize=2,
                    marker="o", markersize=3,
                    label=f"{strategy} (n={n})" if multiple_n else strategy)
    ax.set_xlabel("labeled samples")
    ax.set_ylabel("correct rate")
    ax.legend(loc="lower right")
    return fig


def _plot_threshold_curves(schema_name: str, rows: list[tuple]):
    series = defaultdict(list)
    if schema_name == THRESHOLD_SWEEP.name:
        for threshold, kind, labels, mean, low, high, _reps in rows:
            series[kind].append((threshold, labels, None, None, mean, low, high))
    else:
        for threshold, kind, n, labels, l_low, l_high, mean, low, high, _reps in rows:
            series[f"{kind} (n={n})"].append((threshold, labels, l_low, l_high, mean, low, high))

    fig, (ax_labels, ax_acc) = plt.subplots(1, 2, figsize=(10, 4.5))
    for name, points in series.items():
        points.sort()
        xs, labels, l_lows, l_highs, means, lows, highs = zip(*points)
        ax_labels.errorbar(xs, labels, yerr=_error_bars(labels, l_lows, l_highs),
                           capsize=2, marker="o", markersize=3, label=name)
        ax_acc.errorbar(xs, means, yerr=_error_bars(means, lows, highs),
                        capsize=2, marker="o", markersize=3, label=name)
    ax_labels.set_xlabel("fidelity threshold")
    ax_labels.set_ylabel("labeled samples")
    ax_acc.set_xlabel("fidelity threshold")
    ax_acc.set_ylabel("correct rate")
    ax_labels.legend()
    return fig


def emit_plot(csv_path: Path, kind: str, svg_path: Optional[Path] = None) -> Path:
    """Render an emitted CSV as a self-contained SVG next to it (or at svg_path).

    heatmap: lattice.csv or weak_values.csv on the blue-white-red map.
    curves: strategy_sweep.csv, threshold_sweep.csv or threshold_tradeoff.csv
    with mean lines and 0.95 CI error bars.

    Raises:
        UsageError: unknown plot kind, or a CSV schema this kind cannot draw
        OutputError: rendering failed or the SVG cannot be written
    """
    if kind not in PLOT_KINDS:
        raise UsageError(f"Unknown plot kind '{kind}'")
    try:
        schema, rows = read_csv(csv_path)
    except SchemaError as e:
        raise UsageError(f"Cannot plot {csv_path}: {e.message}")

    if kind == HEATMAP and schema.name in (LATTICE.name, WEAK_VALUES.name):
        draw = functools.partial(_plot_heatmap, schema.name, rows)
    elif kind == CURVES and schema.name == STRATEGY_SWEEP.name:
        draw = functools.partial(_plot_strategy_curves, rows)
    elif kind == CURVES and schema.name in (THRESHOLD_SWEEP.name, THRESHOLD_TRADEOFF.name):
        draw = functools.partial(_plot_threshold_curves, schema.name, rows)
    else:
        raise UsageError(f"Schema '{schema.name}' cannot be drawn as {kind}")

    try:
        with plt.rc_context(_SVG_RC):
            svg = _render(draw())
    except (ValueError, RuntimeError) as e:
        raise OutputError(f"Cannot render {csv_path}: {e}")

    target = Path(svg_path) if svg_path else Path(csv_path).with_suffix(".svg")
    write_atomic(target, svg)
    logger.info(f"Wrote plot {target}")
    return target
