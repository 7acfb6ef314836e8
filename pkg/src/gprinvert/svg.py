"""Minimal deterministic SVG 1.1 line and scatter panels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
PANEL_W, PANEL_H = 320, 240
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 52, 12, 28, 40


def _num(x: float) -> str:
    return f"{x:.2f}"


def _tick(x: float) -> str:
    return f"{x:.3g}"


@dataclass
class Series:
    x: Sequence[float]
    y: Sequence[float]
    label: str = ""
    style: str = "line"  # or "points"


@dataclass
class Panel:
    title: str
    xlabel: str
    ylabel: str
    series: list[Series] = field(default_factory=list)
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None
    diagonal: bool = False

    def limits(self) -> tuple[float, float, float, float]:
        xs = [v for s in self.series for v in s.x if math.isfinite(v)]
        ys = [v for s in self.series for v in s.y if math.isfinite(v)]
        x0, x1 = self.xlim or ((min(xs), max(xs)) if xs else (0.0, 1.0))
        y0, y1 = self.ylim or ((min(ys), max(ys)) if ys else (0.0, 1.0))
        if x1 <= x0:
            x0, x1 = x0 - 0.5, x0 + 0.5
        if y1 <= y0:
            y0, y1 = y0 - 0.5, y0 + 0.5
        return x0, x1, y0, y1


def _panel(panel: Panel, ox: float, oy: float) -> list[str]:
    x0, x1, y0, y1 = panel.limits()
    w = PANEL_W - MARGIN_L - MARGIN_R
    h = PANEL_H - MARGIN_T - MARGIN_B
    left, top = ox + MARGIN_L, oy + MARGIN_T

    def px(x):
        return left + (x - x0) / (x1 - x0) * w

    def py(y):
        return top + h - (y - y0) / (y1 - y0) * h

    out = [
        f'<rect x="{_num(left)}" y="{_num(top)}" width="{_num(w)}" height="{_num(h)}" '
        'fill="none" stroke="#000" stroke-width="1"/>',
        f'<text x="{_num(ox + PANEL_W / 2)}" y="{_num(oy + 18)}" text-anchor="middle" '
        f'font-size="12">{escape(panel.title)}</text>',
        f'<text x="{_num(left + w / 2)}" y="{_num(top + h + 32)}" text-anchor="middle" '
        f'font-size="10">{escape(panel.xlabel)}</text>',
        f'<text x="{_num(ox + 12)}" y="{_num(top + h / 2)}" text-anchor="middle" font-size="10" '
        f'transform="rotate(-90 {_num(ox + 12)} {_num(top + h / 2)})">{escape(panel.ylabel)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        out.append(f'<text x="{_num(px(xv))}" y="{_num(top + h + 14)}" text-anchor="middle" '
                   f'font-size="9">{_tick(xv)}</text>')
        out.append(f'<text x="{_num(left - 4)}" y="{_num(py(yv) + 3)}" text-anchor="end" '
                   f'font-size="9">{_tick(yv)}</text>')
    if panel.diagonal:
        lo, hi = max(x0, y0), min(x1, y1)
        if hi > lo:
            out.append(f'<line x1="{_num(px(lo))}" y1="{_num(py(lo))}" x2="{_num(px(hi))}" '
                       f'y2="{_num(py(hi))}" stroke="#999" stroke-dasharray="4 3"/>')
    for k, s in enumerate(panel.series):
        color = PALETTE[k % len(PALETTE)]
        pts = [(px(a), py(b)) for a, b in zip(s.x, s.y) if math.isfinite(a) and math.isfinite(b)]
        if s.style == "points":
            out.extend(f'<circle cx="{_num(a)}" cy="{_num(b)}" r="2.5" fill="{color}"/>' for a, b in pts)
        elif pts:
            path = " ".join(f"{_num(a)},{_num(b)}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1"/>')
        if s.label:
            ly = top + 12 + 12 * k
            out.append(f'<text x="{_num(left + w - 4)}" y="{_num(ly)}" text-anchor="end" '
                       f'font-size="9" fill="{color}">{escape(s.label)}</text>')
    return out


def render(panels: Sequence[Panel], columns: int) -> str:
    """Lay panels out row-major on a fixed grid and return the SVG document."""
    columns = max(1, min(columns, len(panels) or 1))
    rows = max(1, -(-len(panels) // columns))
    width, height = columns * PANEL_W, rows * PANEL_H
    body = []
    for i, panel in enumerate(panels):
        body.extend(_panel(panel, (i % columns) * PANEL_W, (i // columns) * PANEL_H))
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">\n'
        f'<rect width="{width}" height="{height}" fill="#fff"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"
