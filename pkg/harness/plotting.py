"""Static risk-vs-m plots.

The SVG is a pure function of the CSV: matplotlib's SVG backend is run with a
fixed hash salt, text kept as text and no date metadata.
"""

import logging
from collections import OrderedDict
from typing import Dict, List, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from storage.results import STATUS_OK, read_table  # noqa: E402
from utils.validation import CsvParseError  # noqa: E402

logger = logging.getLogger(__name__)

X_COLUMN = "m"
Y_COLUMN = "mean_sq_error"
GROUP_COLUMNS = ("n", "k", "alpha", "decoder", "mode")
THRESHOLD_PREFIX = "threshold_"
HASH_SALT = "gensense"

SVG_RC = {
    "svg.hashsalt": HASH_SALT,
    "svg.fonttype": "none",
    "figure.figsize": (7.0, 4.5),
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _number(value: str, column: str, line: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise CsvParseError(line, f"column '{column}' is not numeric: {value!r}")


def _series(table) -> Tuple["OrderedDict[tuple, List[Tuple[float, float]]]", Dict[str, List[float]], List[Tuple[float, float]]]:
    for column in (X_COLUMN, Y_COLUMN):
        if column not in table.columns:
            raise CsvParseError(2, f"missing column '{column}'")
    groups: "OrderedDict[tuple, List[Tuple[float, float]]]" = OrderedDict()
    thresholds: Dict[str, List[float]] = OrderedDict()
    floor: List[Tuple[float, float]] = []
    threshold_columns = [c for c in table.columns if c.startswith(THRESHOLD_PREFIX)]

    for offset, row in enumerate(table.rows):
        line = offset + 3
        if row.get("status", STATUS_OK) != STATUS_OK or row[Y_COLUMN] == "":
            continue
        x = _number(row[X_COLUMN], X_COLUMN, line)
        y = _number(row[Y_COLUMN], Y_COLUMN, line)
        key = tuple(row.get(c, "") for c in GROUP_COLUMNS if c in table.columns)
        groups.setdefault(key, []).append((x, y))
        if row.get("minimax_lower"):
            floor.append((x, _number(row["minimax_lower"], "minimax_lower", line)))
        for column in threshold_columns:
            if row[column] == "":
                continue
            value = _number(row[column], column, line)
            seen = thresholds.setdefault(column[len(THRESHOLD_PREFIX):], [])
            if value not in seen:
                seen.append(value)
    return groups, thresholds, floor


def threshold_markers(csv_path: str) -> Dict[str, List[float]]:
    """Distinct threshold values per name, in the order ``emit_plot`` draws them."""
    return _series(read_table(csv_path))[1]


def emit_plot(csv_path: str, svg_path: str) -> str:
    """
    Render the risk curve of a results CSV as an SVG.

    One line per parameter group (gid ``risk_curve``, ``risk_curve_2``, ...),
    the minimax floor when present and one vertical marker per distinct
    threshold value (gid ``threshold_<name>``, then ``threshold_<name>_2``).

    Args:
        csv_path: Results CSV written by the runner
        svg_path: Destination SVG

    Returns:
        svg_path

    Raises:
        CsvParseError: On a malformed CSV, with the offending line
    """
    table = read_table(csv_path)
    groups, thresholds, floor = _series(table)

    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots()
        try:
            for i, (key, points) in enumerate(groups.items()):
                points.sort()
                gid = "risk_curve" if i == 0 else f"risk_curve_{i + 1}"
                label = ", ".join(f"{c}={v}" for c, v in zip(GROUP_COLUMNS, key)) or "risk"
                ax.plot([p[0] for p in points], [p[1] for p in points], color=f"C{i % 10}",
                        linewidth=1.5, label=label, gid=gid)
            if floor:
                floor = sorted(set(floor))
                ax.plot([p[0] for p in floor], [p[1] for p in floor], color="0.3", linestyle="--",
                        linewidth=1.0, label="minimax lower bound", gid="minimax_lower")
            for j, (name, values) in enumerate(thresholds.items()):
                for i, value in enumerate(values):
                    gid = f"threshold_{name}" if i == 0 else f"threshold_{name}_{i + 1}"
                    ax.axvline(value, color=f"C{(j + 3) % 10}", linestyle=":", linewidth=1.0,
                               label=name if i == 0 else None, gid=gid)

            ax.set_yscale("log", nonpositive="clip")
            ax.set_xlabel("measurements m")
            ax.set_ylabel("mean squared error")
            ax.set_title(f"risk vs m ({table.manifest_id})" if table.manifest_id else "risk vs m")
            if groups or thresholds:
                ax.legend(loc="best", fontsize=8)
            fig.tight_layout()
            fig.savefig(svg_path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)

    logger.info(f"Wrote plot with {len(groups)} curves and {sum(len(v) for v in thresholds.values())} markers to {svg_path}")
    return svg_path
