"""Minimal self-contained SVG line plots. Presentation only."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass
class Series:
    label: str
    x: list[float]
    y: list[float]
    dashed: bool = False
    markers: bool = False
    err: list[float] | None = None


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        return [10.0**k for k in range(math.floor(lo), math.ceil(hi) + 1)]
    span = hi - lo or 1.0
    step = 10 ** math.floor(math.log10(span / 5))
    for m in (1, 2, 5, 10):
        if span / (step * m) <= 6:
            step *= m
            break
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step) + 1)]


def line_plot(series: list[Series], title: str, xlabel: str, ylabel: str,
              logx: bool = False, logy: bool = False, width: int = 640, height: int = 420) -> str:
    tx = (lambda v: math.log10(v)) if logx else float
    ty = (lambda v: math.log10(v)) if logy else float
    pts = []
    for s in series:
        for x, y in zip(s.x, s.y):
            if math.isfinite(x) and math.isfinite(y) and (x > 0 or not logx) and (y > 0 or not logy):
                pts.append((tx(x), ty(y)))
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    ml, mr, mt, mb = 70, 150, 36, 50
    pw, ph = width - ml - mr, height - mt - mb
    sx = lambda v: ml + (v - x0) / (x1 - x0) * pw
    sy = lambda v: mt + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>']
    for v in _ticks(x0, x1, False):
        if x0 <= v <= x1:
            lab = f"1e{v:g}" if logx else f"{v:g}"
            out.append(f'<line x1="{sx(v):.1f}" y1="{mt + ph}" x2="{sx(v):.1f}" y2="{mt + ph + 4}" stroke="#333"/>'
                       f'<text x="{sx(v):.1f}" y="{mt + ph + 16}" text-anchor="middle">{lab}</text>')
    for v in _ticks(y0, y1, False):
        if y0 <= v <= y1:
            lab = f"1e{v:g}" if logy else f"{v:.3g}"
            out.append(f'<line x1="{ml - 4}" y1="{sy(v):.1f}" x2="{ml}" y2="{sy(v):.1f}" stroke="#333"/>'
                       f'<text x="{ml - 6}" y="{sy(v) + 4:.1f}" text-anchor="end">{lab}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(ylabel)}</text>')
    for i, s in enumerate(series):
        c = COLORS[i % len(COLORS)]
        xy = [(sx(tx(x)), sy(ty(y))) for x, y in zip(s.x, s.y)
              if math.isfinite(x) and math.isfinite(y) and (x > 0 or not logx) and (y > 0 or not logy)]
        if len(xy) > 1 and not s.markers:
            path = " ".join(f"{a:.2f},{b:.2f}" for a, b in xy)
            dash = ' stroke-dasharray="6,4"' if s.dashed else ""
            out.append(f'<polyline points="{path}" fill="none" stroke="{c}" stroke-width="1.6"{dash}/>')
        if s.markers:
            for a, b in xy:
                out.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2.6" fill="{c}"/>')
        if s.err is not None:
            for x, y, e in zip(s.x, s.y, s.err):
                lo, hi = y - 2 * e, y + 2 * e
                if logy and lo <= 0:
                    continue
                out.append(f'<line x1="{sx(tx(x)):.2f}" y1="{sy(ty(lo)):.2f}" x2="{sx(tx(x)):.2f}" '
                           f'y2="{sy(ty(hi)):.2f}" stroke="{c}"/>')
        ly = mt + 14 + 16 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 30}" y2="{ly - 4}" stroke="{c}" '
                   f'stroke-width="2"/><text x="{ml + pw + 34}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
