"""Tiny SVG renderers for line plots and heat maps. The CSV files are the real output."""

from __future__ import annotations

from pathlib import Path

import numpy as np

W, H, PAD = 480, 320, 48


def _scale(v, lo, hi, a, b):
    if hi == lo:
        return (a + b) / 2
    return a + (v - lo) * (b - a) / (hi - lo)


def line_plot(path, series: dict, xlabel: str = "", ylabel: str = "", title: str = ""):
    """``series`` maps a name to (xs, ys)."""
    xs_all = np.concatenate([np.asarray(xs, float) for xs, _ in series.values()])
    ys_all = np.concatenate([np.asarray(ys, float) for _, ys in series.values()])
    ys_all = ys_all[np.isfinite(ys_all)]
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = (float(ys_all.min()), float(ys_all.max())) if ys_all.size else (0.0, 1.0)
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
           f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
           f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle" font-size="12">{xlabel}</text>',
           f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 14 {H / 2})">{ylabel}</text>',
           f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="13">{title}</text>',
           f'<text x="{PAD}" y="{H - PAD + 14}" font-size="10">{x0:.3g}</text>',
           f'<text x="{W - PAD}" y="{H - PAD + 14}" text-anchor="end" font-size="10">{x1:.3g}</text>',
           f'<text x="{PAD - 4}" y="{H - PAD}" text-anchor="end" font-size="10">{y0:.3g}</text>',
           f'<text x="{PAD - 4}" y="{PAD + 8}" text-anchor="end" font-size="10">{y1:.3g}</text>']
    for i, (name, (xs, ys)) in enumerate(series.items()):
        pts = " ".join(f"{_scale(x, x0, x1, PAD, W - PAD):.2f},{_scale(y, y0, y1, H - PAD, PAD):.2f}"
                       for x, y in zip(xs, ys) if np.isfinite(y))
        c = colors[i % len(colors)]
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{W - PAD}" y="{PAD + 14 * i}" text-anchor="end" font-size="11" fill="{c}">{name}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def heatmap(path, grid, title: str = ""):
    grid = np.asarray(grid, float)
    rows, cols = grid.shape
    lo, hi = float(np.nanmin(grid)), float(np.nanmax(grid))
    cw, ch = (W - 2 * PAD) / cols, (H - 2 * PAD) / rows
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="13">{title}</text>']
    for r in range(rows):
        for c in range(cols):
            v = int(round(_scale(grid[r, c], lo, hi, 0, 255)))
            out.append(f'<rect x="{PAD + c * cw:.2f}" y="{PAD + r * ch:.2f}" width="{cw + 0.05:.2f}" '
                       f'height="{ch + 0.05:.2f}" fill="rgb({v},{v // 3},{255 - v})"/>')
    out.append(f'<text x="{PAD}" y="{H - PAD + 16}" font-size="10">min {lo:.4g}  max {hi:.4g}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
