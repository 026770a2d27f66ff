"""Minimal static SVG line and scatter plots (no plotting dependency)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

W, H = 640, 420
ML, MR, MT, MB = 70, 150, 40, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")

Series = tuple[str, Sequence[float], Sequence[float]]


def _finite(x, y, logy):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    if logy:
        ok &= y > 0
    return x[ok], (np.log10(y[ok]) if logy else y[ok])


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    return np.linspace(lo, hi, n)


def _plot(path: Path, series: Sequence[Series], title: str, xlabel: str, ylabel: str, logy: bool, scatter: bool):
    pts = [_finite(x, y, logy) for _, x, y in series]
    xs = np.concatenate([p[0] for p in pts]) if pts else np.array([])
    ys = np.concatenate([p[1] for p in pts]) if pts else np.array([])
    if xs.size == 0:
        xs, ys = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = W - ML - MR, H - MT - MB

    def sx(v):
        return ML + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MT + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1):
        out.append(f'<text x="{sx(v):.1f}" y="{MT + ph + 15}" text-anchor="middle">{v:.3g}</text>')
    for v in _ticks(y0, y1):
        lab = f"1e{v:.1f}" if logy else f"{v:.3g}"
        out.append(f'<text x="{ML - 5}" y="{sy(v) + 4:.1f}" text-anchor="end">{lab}</text>')
    out.append(f'<text x="{ML + pw / 2:.1f}" y="{H - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    ylab = escape(ylabel + (" (log10)" if logy else ""))
    out.append(f'<text x="15" y="{MT + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 15 {MT + ph / 2:.1f})">{ylab}</text>')
    for k, ((label, _, _), (x, y)) in enumerate(zip(series, pts)):
        c = COLORS[k % len(COLORS)]
        if scatter:
            out.extend(f'<circle cx="{sx(a):.1f}" cy="{sy(b):.1f}" r="2" fill="{c}"/>' for a, b in zip(x, y))
        elif x.size:
            coords = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in zip(x, y))
            out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.2" points="{coords}"/>')
        ly = MT + 12 + 16 * k
        out.append(f'<rect x="{ML + pw + 10}" y="{ly - 8}" width="10" height="10" fill="{c}"/>')
        out.append(f'<text x="{ML + pw + 25}" y="{ly + 1}">{escape(label)}</text>')
    out.append("</svg>")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n")
    return path


def line_plot(path: Path, series: Sequence[Series], title="", xlabel="", ylabel="", logy=False) -> Path:
    return _plot(Path(path), series, title, xlabel, ylabel, logy, scatter=False)


def scatter_plot(path: Path, series: Sequence[Series], title="", xlabel="", ylabel="", logy=False) -> Path:
    return _plot(Path(path), series, title, xlabel, ylabel, logy, scatter=True)
