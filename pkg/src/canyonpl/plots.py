"""Static SVG figures: RMSE box plot, measured-vs-predicted scatter, weight bars.

Output is plain text with fixed number formatting, so the same inputs give
byte-identical files.
"""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = (60, 20, 30, 70)  # left, right, top, bottom


def _f(v: float) -> str:
    return f"{v:.2f}"


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
    ]


class _Axis:
    def __init__(self, lo, hi, a, b):
        if hi <= lo:
            hi = lo + 1.0
        self.lo, self.hi, self.a, self.b = lo, hi, a, b

    def __call__(self, v):
        return self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)


def _y_ticks(ax: _Axis, x0: float, x1: float, label: str) -> list[str]:
    out = []
    for v in np.linspace(ax.lo, ax.hi, 5):
        y = ax(v)
        out.append(f'<line x1="{_f(x0)}" y1="{_f(y)}" x2="{_f(x1)}" y2="{_f(y)}" stroke="#ddd"/>')
        out.append(f'<text x="{_f(x0 - 4)}" y="{_f(y + 4)}" text-anchor="end">{v:.1f}</text>')
    mid = (ax.a + ax.b) / 2
    out.append(f'<text x="14" y="{_f(mid)}" transform="rotate(-90 14 {_f(mid)})" '
               f'text-anchor="middle">{escape(label)}</text>')
    return out


def _padded(lo, hi, frac=0.05):
    pad = (hi - lo) * frac or 1.0
    return lo - pad, hi + pad


def box_plot_svg(rows: Sequence[tuple[str, Sequence[float]]], title: str = "RMSE per fold",
                 ylabel: str = "RMSE (dB)") -> str:
    """One box (quartiles, median, min/max whiskers) per row."""
    if not rows:
        raise ValueError("box plot needs at least one row")
    left, right, top, bottom = MARGIN
    allv = np.concatenate([np.asarray(v, dtype=float) for _, v in rows])
    ax = _Axis(*_padded(float(allv.min()), float(allv.max())), HEIGHT - bottom, top)
    slot = (WIDTH - left - right) / len(rows)
    out = _header(title) + _y_ticks(ax, left, WIDTH - right, ylabel)
    for k, (label, vals) in enumerate(rows):
        v = np.asarray(vals, dtype=float)
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        cx = left + slot * (k + 0.5)
        hw = min(24.0, slot * 0.3)
        out.append(f'<g class="box" data-label="{escape(label)}">')
        out.append(f'<line x1="{_f(cx)}" y1="{_f(ax(v.min()))}" x2="{_f(cx)}" y2="{_f(ax(v.max()))}" stroke="black"/>')
        out.append(f'<rect x="{_f(cx - hw)}" y="{_f(ax(q3))}" width="{_f(2 * hw)}" '
                   f'height="{_f(ax(q1) - ax(q3))}" fill="#9ecae1" stroke="black"/>')
        out.append(f'<line x1="{_f(cx - hw)}" y1="{_f(ax(med))}" x2="{_f(cx + hw)}" y2="{_f(ax(med))}" '
                   f'stroke="black" stroke-width="2"/>')
        out.append('</g>')
        ty = HEIGHT - bottom + 14
        out.append(f'<text x="{_f(cx)}" y="{ty}" text-anchor="end" '
                   f'transform="rotate(-30 {_f(cx)} {ty})">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scatter_svg(measured: Sequence[float], predicted: Sequence[float],
                title: str = "Measured vs predicted path loss") -> str:
    """One circle per test link plus the identity line."""
    m = np.asarray(measured, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if len(m) != len(p) or len(m) == 0:
        raise ValueError("scatter needs two equal-length, non-empty vectors")
    left, right, top, bottom = MARGIN
    lo, hi = _padded(float(min(m.min(), p.min())), float(max(m.max(), p.max())))
    ax_x = _Axis(lo, hi, left, WIDTH - right)
    ax_y = _Axis(lo, hi, HEIGHT - bottom, top)
    out = _header(title) + _y_ticks(ax_y, left, WIDTH - right, "Predicted PL (dB)")
    out.append(f'<text x="{(left + WIDTH - right) / 2:.0f}" y="{HEIGHT - 20}" '
               f'text-anchor="middle">Measured PL (dB)</text>')
    out.append(f'<line x1="{_f(ax_x(lo))}" y1="{_f(ax_y(lo))}" x2="{_f(ax_x(hi))}" y2="{_f(ax_y(hi))}" '
               f'stroke="#888" stroke-dasharray="4 3"/>')
    for a, b in zip(m.tolist(), p.tolist()):
        out.append(f'<circle class="pt" cx="{_f(ax_x(a))}" cy="{_f(ax_y(b))}" r="2.5" '
                   f'fill="#3182bd" fill-opacity="0.6"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def weight_bars_svg(rows: Sequence[tuple[str, float, float, float]],
                    title: str = "Lasso feature weights") -> str:
    """Bars at the mean weight with min/max range markers; rows are (name, mean, min, max)."""
    if not rows:
        raise ValueError("weight plot needs at least one row")
    left, right, top, bottom = MARGIN
    vals = [v for r in rows for v in r[1:]] + [0.0]
    ax = _Axis(*_padded(min(vals), max(vals)), HEIGHT - bottom, top)
    slot = (WIDTH - left - right) / len(rows)
    out = _header(title) + _y_ticks(ax, left, WIDTH - right, "Weight (dB per std)")
    for k, (name, mean, lo, hi) in enumerate(rows):
        cx = left + slot * (k + 0.5)
        hw = slot * 0.3
        y0, y1 = sorted((ax(0.0), ax(mean)))
        out.append(f'<rect class="bar" x="{_f(cx - hw)}" y="{_f(y0)}" width="{_f(2 * hw)}" '
                   f'height="{_f(y1 - y0)}" fill="#fd8d3c"/>')
        out.append(f'<line x1="{_f(cx)}" y1="{_f(ax(lo))}" x2="{_f(cx)}" y2="{_f(ax(hi))}" stroke="black"/>')
        ty = HEIGHT - bottom + 14
        out.append(f'<text x="{_f(cx)}" y="{ty}" text-anchor="end" '
                   f'transform="rotate(-30 {_f(cx)} {ty})">{escape(name)}</text>')
    out.append(f'<line x1="{left}" y1="{_f(ax(0.0))}" x2="{WIDTH - right}" y2="{_f(ax(0.0))}" stroke="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, svg: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
