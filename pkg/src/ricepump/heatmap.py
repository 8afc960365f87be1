"""Standalone SVG heatmaps with a fixed perceptual color map.

Panels are written as plain SVG rectangles so runs have no plotting
dependency; the numeric matrix is always emitted as a CSV next to the
image so the picture is never the only record of the data.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

# viridis anchor colors, interpolated linearly in RGB
_ANCHORS = np.array([
    (68, 1, 84), (72, 40, 120), (62, 74, 137), (49, 104, 142),
    (38, 130, 142), (31, 158, 137), (53, 183, 121), (109, 205, 89),
    (180, 222, 44), (253, 231, 37)], dtype=float)


def color_for(value: float) -> str:
    """Hex color for a value already scaled to [0, 1]."""
    x = min(max(float(value), 0.0), 1.0) * (len(_ANCHORS) - 1)
    i = min(int(x), len(_ANCHORS) - 2)
    frac = x - i
    rgb = (1.0 - frac) * _ANCHORS[i] + frac * _ANCHORS[i + 1]
    return "#{:02x}{:02x}{:02x}".format(*(int(round(c)) for c in rgb))


def emit_heatmap(matrix, path, *, title: str = "", row_labels=None,
                 col_labels=None, cell: int = 12,
                 vmin: float | None = None, vmax: float | None = None) -> Path:
    """Write ``matrix`` as an SVG heatmap plus a sibling CSV.

    Rows run top to bottom; the color scale is linear between ``vmin``
    and ``vmax`` (data range by default) and is printed in the footer so
    the mapping is reproducible.  Returns the SVG path.
    """
    data = np.asarray(matrix, dtype=float)
    if data.ndim != 2 or data.size == 0:
        raise ValueError("heatmap needs a non-empty 2D matrix")
    path = Path(path)
    lo = float(data.min()) if vmin is None else float(vmin)
    hi = float(data.max()) if vmax is None else float(vmax)
    span = hi - lo if hi > lo else 1.0

    n_rows, n_cols = data.shape
    margin_left, margin_top, margin_bottom = 60, 24, 20
    width = margin_left + n_cols * cell + 10
    height = margin_top + n_rows * cell + margin_bottom
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<text x="{margin_left}" y="16" font-size="12" '
        f'font-family="sans-serif">{title}</text>',
    ]
    for r in range(n_rows):
        for c in range(n_cols):
            color = color_for((data[r, c] - lo) / span)
            parts.append(
                f'<rect x="{margin_left + c * cell}" '
                f'y="{margin_top + r * cell}" width="{cell}" '
                f'height="{cell}" fill="{color}"/>')
    labels = list(row_labels) if row_labels is not None else range(n_rows)
    step = max(1, n_rows // 12)
    for r in range(0, n_rows, step):
        parts.append(
            f'<text x="{margin_left - 6}" '
            f'y="{margin_top + r * cell + cell}" font-size="9" '
            f'text-anchor="end" font-family="sans-serif">{labels[r]}</text>')
    parts.append(
        f'<text x="{margin_left}" y="{height - 6}" font-size="9" '
        f'font-family="sans-serif">scale {lo:.4g} to {hi:.4g}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts))

    csv_path = path.with_suffix(".csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["row"] + [str(c) for c in
                            (col_labels if col_labels is not None
                             else range(n_cols))]
        writer.writerow(header)
        for r in range(n_rows):
            writer.writerow([labels[r]] + [f"{v:.12g}" for v in data[r]])
    return path
