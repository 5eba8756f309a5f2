"""Minimal deterministic SVG line plots (no plotting dependency).

Output is plain string building with fixed formatting, so identical inputs
produce byte-identical documents.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence, Tuple

Series = Tuple[str, Sequence[float], Sequence[float]]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")

WIDTH, HEIGHT = 640, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 16, 36, 48


def _f(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def line_plot(
    series: Sequence[Series],
    title: str = "",
    x_label: str = "t",
    y_label: str = "f(x)",
    log_y: bool = False,
) -> str:
    """Render labelled (x, y) series as an SVG polyline chart.

    Non-finite samples are dropped; with log_y the y axis is log10 and
    non-positive samples are dropped as well.
    """
    cleaned = []
    for label, xs, ys in series:
        pts = []
        for x, y in zip(xs, ys):
            x, y = float(x), float(y)
            if not (math.isfinite(x) and math.isfinite(y)):
                continue
            if log_y:
                if y <= 0.0:
                    continue
                y = math.log10(y)
            pts.append((x, y))
        cleaned.append((label, pts))

    all_pts = [p for _, pts in cleaned for p in pts]
    if all_pts:
        x_lo, x_hi = min(p[0] for p in all_pts), max(p[0] for p in all_pts)
        y_lo, y_hi = min(p[1] for p in all_pts), max(p[1] for p in all_pts)
    else:
        x_lo, x_hi, y_lo, y_hi = 0.0, 1.0, 0.0, 1.0
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x: float) -> float:
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return MARGIN_T + (y_hi - y) / (y_hi - y_lo) * plot_h

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#333333" stroke-width="1"/>',
    ]
    if title:
        out.append(
            f'<text x="{WIDTH // 2}" y="22" text-anchor="middle" '
            f'font-family="monospace" font-size="14">{title}</text>'
        )

    for t in _ticks(x_lo, x_hi):
        x = px(t)
        out.append(
            f'<line x1="{_f(x)}" y1="{MARGIN_T + plot_h}" x2="{_f(x)}" '
            f'y2="{MARGIN_T + plot_h + 5}" stroke="#333333" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_f(x)}" y="{MARGIN_T + plot_h + 20}" text-anchor="middle" '
            f'font-family="monospace" font-size="11">{t:.6g}</text>'
        )
    for t in _ticks(y_lo, y_hi):
        y = py(t)
        label = f"1e{t:.3g}" if log_y else f"{t:.6g}"
        out.append(
            f'<line x1="{MARGIN_L - 5}" y1="{_f(y)}" x2="{MARGIN_L}" '
            f'y2="{_f(y)}" stroke="#333333" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{MARGIN_L - 8}" y="{_f(y + 4)}" text-anchor="end" '
            f'font-family="monospace" font-size="11">{label}</text>'
        )
    out.append(
        f'<text x="{MARGIN_L + plot_w // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="monospace" font-size="12">{x_label}</text>'
    )
    ylab = f"log10 {y_label}" if log_y else y_label
    out.append(
        f'<text x="16" y="{MARGIN_T + plot_h // 2}" text-anchor="middle" '
        f'font-family="monospace" font-size="12" '
        f'transform="rotate(-90 16 {MARGIN_T + plot_h // 2})">{ylab}</text>'
    )

    for i, (label, pts) in enumerate(cleaned):
        color = PALETTE[i % len(PALETTE)]
        if pts:
            coords = " ".join(f"{_f(px(x))},{_f(py(y))}" for x, y in pts)
            out.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
        ly = MARGIN_T + 16 + 16 * i
        out.append(
            f'<line x1="{MARGIN_L + plot_w - 130}" y1="{ly - 4}" x2="{MARGIN_L + plot_w - 110}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        out.append(
            f'<text x="{MARGIN_L + plot_w - 104}" y="{ly}" font-family="monospace" '
            f'font-size="11">{label}</text>'
        )

    out.append("</svg>")
    return "\n".join(out) + "\n"


def save_plot(path, series: Sequence[Series], **kwargs) -> None:
    with open(path, "w") as fh:
        fh.write(line_plot(series, **kwargs))
