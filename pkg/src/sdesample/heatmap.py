"""Static SVG heatmaps of grid measurements with an optional training-point overlay."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from sdesample.dataset import Dataset

__all__ = ["render_svg", "ramp_color"]

# viridis control points
_RAMP = np.array([
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
], dtype=np.float64)


def ramp_color(t: float) -> str:
    """Hex colour for ``t`` in [0, 1] on a sequential ramp."""
    t = min(max(float(t), 0.0), 1.0) * (len(_RAMP) - 1)
    i = min(int(t), len(_RAMP) - 2)
    f = t - i
    rgb = _RAMP[i] * (1 - f) + _RAMP[i + 1] * f
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def render_svg(d: Dataset, *, values=None, train_indices=None, cell: int = 6,
               title: str | None = None) -> str:
    """Render one ``<rect class="cell">`` per point; train points get an outline.

    Parameters
    ----------
    d : Dataset
    values : array_like, optional
        Replacement values per point (e.g. predictions); defaults to ``d.value``.
    train_indices : array_like of int, optional
        Points outlined as ``<rect class="train">``.
    cell : int
        Cell edge length in pixels.
    """
    if len(d) == 0:
        raise ValueError("empty dataset")
    v = d.value if values is None else np.asarray(values, dtype=np.float64)
    finite = np.isfinite(v)
    if not finite.any():
        raise ValueError("no finite values to render")
    vmin = float(v[finite].min())
    vmax = float(v[finite].max())
    span = vmax - vmin

    legend_h = 40
    title_h = 20 if title else 0
    width = max(d.grid_width * cell, 200)
    height = d.grid_height * cell + legend_h + title_h
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
    ]
    if title:
        out.append(f'<text x="2" y="14" font-family="sans-serif" font-size="12">{escape(title)}</text>')
    out.append(f'<g id="cells" transform="translate(0,{title_h})">')
    for xi, yi, vi in zip(d.x.tolist(), d.y.tolist(), v.tolist()):
        if vi != vi:
            fill = "#cccccc"
        else:
            fill = ramp_color(0.5 if span == 0 else (vi - vmin) / span)
        px = (xi - d.grid_x0) * cell
        py = (yi - d.grid_y0) * cell
        out.append(f'<rect class="cell" x="{px}" y="{py}" width="{cell}" height="{cell}" fill="{fill}"/>')
    out.append("</g>")

    if train_indices is not None:
        out.append(f'<g id="train" transform="translate(0,{title_h})" fill="none" '
                   'stroke="#ff2020" stroke-width="1">')
        for i in np.asarray(train_indices, dtype=np.int64).tolist():
            px = (int(d.x[i]) - d.grid_x0) * cell
            py = (int(d.y[i]) - d.grid_y0) * cell
            out.append(f'<rect class="train" x="{px + 0.5}" y="{py + 0.5}" '
                       f'width="{cell - 1}" height="{cell - 1}"/>')
        out.append("</g>")

    ly = title_h + d.grid_height * cell + 8
    unit = d.metadata.get("unit", "")
    out.append(f'<g id="legend" transform="translate(0,{ly})" font-family="sans-serif" font-size="10">')
    out.append('<defs><linearGradient id="ramp">')
    for k in range(len(_RAMP)):
        t = k / (len(_RAMP) - 1)
        out.append(f'<stop offset="{t:g}" stop-color="{ramp_color(t)}"/>')
    out.append("</linearGradient></defs>")
    if span == 0:
        out.append(f'<rect x="2" y="0" width="120" height="10" fill="{ramp_color(0.5)}"/>')
        out.append(f'<text class="legend-degenerate" x="2" y="24">min = max = {_fmt(vmin)} {escape(unit)}</text>')
    else:
        out.append('<rect x="2" y="0" width="120" height="10" fill="url(#ramp)"/>')
        out.append(f'<text class="legend-min" x="2" y="24">min {_fmt(vmin)}</text>')
        out.append(f'<text class="legend-max" x="122" y="24" text-anchor="end">max {_fmt(vmax)}</text>')
        if unit:
            out.append(f'<text x="130" y="9">{escape(unit)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
