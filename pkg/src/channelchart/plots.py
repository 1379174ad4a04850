"""Deterministic hand-rolled SVG emitters for charts and sweep curves.

No plotting library: output bytes are a pure function of the inputs, so
regenerating a figure from the same data is byte-identical.
"""

from __future__ import annotations

import colorsys

import numpy as np

_WIDTH = 640
_HEIGHT = 640
_PAD = 60


def position_colors(xy: np.ndarray) -> list[str]:
    """Map 2-D positions to hex colors via a fixed hue/lightness ramp over
    the normalized bounding box, so ground-truth and chart scatters of the
    same dataset share colors point-for-point."""
    xy = np.asarray(xy, dtype=np.float64)[:, :2]
    lo = xy.min(axis=0)
    span = xy.max(axis=0) - lo
    span[span == 0] = 1.0
    uv = (xy - lo) / span
    colors = []
    for u, v in uv:
        r, g, b = colorsys.hls_to_rgb(u * 300.0 / 360.0, 0.30 + 0.45 * v, 0.85)
        colors.append(f"#{int(round(r * 255)):02x}{int(round(g * 255)):02x}{int(round(b * 255)):02x}")
    return colors


def _axis_transform(values: np.ndarray, lo_px: float, hi_px: float, flip: bool = False):
    vmin = float(values.min())
    vmax = float(values.max())
    span = vmax - vmin if vmax > vmin else 1.0

    def to_px(v):
        frac = (v - vmin) / span
        if flip:
            frac = 1.0 - frac
        return lo_px + frac * (hi_px - lo_px)

    return to_px, vmin, vmax


def scatter_svg(points: np.ndarray, colors: list[str], title: str, xlabel: str, ylabel: str) -> str:
    """Colored scatter plot with a plain frame and min/max tick labels."""
    pts = np.asarray(points, dtype=np.float64)
    x_px, xmin, xmax = _axis_transform(pts[:, 0], _PAD, _WIDTH - _PAD)
    y_px, ymin, ymax = _axis_transform(pts[:, 1], _PAD, _HEIGHT - _PAD, flip=True)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<rect x="{_PAD}" y="{_PAD}" width="{_WIDTH - 2 * _PAD}" height="{_HEIGHT - 2 * _PAD}" '
        f'fill="none" stroke="#444444" stroke-width="1"/>',
        f'<text x="{_WIDTH // 2}" y="30" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{title}</text>',
        f'<text x="{_WIDTH // 2}" y="{_HEIGHT - 14}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12">{xlabel}</text>',
        f'<text x="18" y="{_HEIGHT // 2}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12" transform="rotate(-90 18 {_HEIGHT // 2})">{ylabel}</text>',
        f'<text x="{_PAD}" y="{_HEIGHT - _PAD + 16}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="10">{xmin:.2f}</text>',
        f'<text x="{_WIDTH - _PAD}" y="{_HEIGHT - _PAD + 16}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="10">{xmax:.2f}</text>',
        f'<text x="{_PAD - 6}" y="{_HEIGHT - _PAD}" text-anchor="end" font-family="sans-serif" '
        f'font-size="10">{ymin:.2f}</text>',
        f'<text x="{_PAD - 6}" y="{_PAD + 4}" text-anchor="end" font-family="sans-serif" '
        f'font-size="10">{ymax:.2f}</text>',
    ]
    for (px, py), color in zip(pts, colors):
        parts.append(f'<circle cx="{x_px(px):.2f}" cy="{y_px(py):.2f}" r="2.2" fill="{color}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


_SERIES_COLORS = ("#1f77b4", "#2ca02c", "#ff7f0e", "#d62728", "#9467bd")


def line_chart_svg(
    x_values,
    series: dict[str, list],
    title: str,
    xlabel: str,
    log_x: bool = False,
) -> str:
    """Multi-series line chart; series share one y axis."""
    xs = np.asarray(x_values, dtype=np.float64)
    if log_x:
        xs = np.log10(xs)
    all_y = np.concatenate([np.asarray(v, dtype=np.float64) for v in series.values()])
    x_px, xmin, xmax = _axis_transform(xs, _PAD, _WIDTH - _PAD)
    y_px, ymin, ymax = _axis_transform(all_y, _PAD, _HEIGHT - _PAD, flip=True)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<rect x="{_PAD}" y="{_PAD}" width="{_WIDTH - 2 * _PAD}" height="{_HEIGHT - 2 * _PAD}" '
        f'fill="none" stroke="#444444" stroke-width="1"/>',
        f'<text x="{_WIDTH // 2}" y="30" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{title}</text>',
        f'<text x="{_WIDTH // 2}" y="{_HEIGHT - 14}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12">{xlabel}{" (log10)" if log_x else ""}</text>',
        f'<text x="{_PAD}" y="{_HEIGHT - _PAD + 16}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="10">{xmin:.2f}</text>',
        f'<text x="{_WIDTH - _PAD}" y="{_HEIGHT - _PAD + 16}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="10">{xmax:.2f}</text>',
        f'<text x="{_PAD - 6}" y="{_HEIGHT - _PAD}" text-anchor="end" font-family="sans-serif" '
        f'font-size="10">{ymin:.3f}</text>',
        f'<text x="{_PAD - 6}" y="{_PAD + 4}" text-anchor="end" font-family="sans-serif" '
        f'font-size="10">{ymax:.3f}</text>',
    ]
    for si, (name, values) in enumerate(series.items()):
        color = _SERIES_COLORS[si % len(_SERIES_COLORS)]
        ys = np.asarray(values, dtype=np.float64)
        coords = " ".join(f"{x_px(px):.2f},{y_px(py):.2f}" for px, py in zip(xs, ys))
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        for px, py in zip(xs, ys):
            parts.append(f'<circle cx="{x_px(px):.2f}" cy="{y_px(py):.2f}" r="3" fill="{color}"/>')
        parts.append(
            f'<text x="{_WIDTH - _PAD - 6}" y="{_PAD + 18 + 16 * si}" text-anchor="end" '
            f'font-family="sans-serif" font-size="12" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
