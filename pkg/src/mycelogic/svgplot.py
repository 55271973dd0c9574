"""Minimal deterministic SVG charts for census and sweep reports.

Hand-rolled so output bytes depend only on the data (no timestamps, no
random ids), which the reproducibility contract requires.
"""
from __future__ import annotations

import math

WIDTH, HEIGHT = 860, 520
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 180, 40, 60
COLORS = ("#000000", "#2a9d2a", "#d62728", "#1f77b4", "#9467bd", "#e8a838", "#17becf")


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _axis_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1, 2, 2.5, 5, 10):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _tick_label(value: float) -> str:
    if value == int(value) and abs(value) < 1e7:
        return str(int(value))
    return f"{value:g}"


class _Canvas:
    def __init__(self, x_lo, x_hi, y_lo, y_hi, title, x_label, y_label):
        self.x_lo, self.x_hi = x_lo, x_hi
        self.y_lo, self.y_hi = y_lo, y_hi
        self.parts: list[str] = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="13">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH // 2}" y="22" text-anchor="middle" font-size="16">{title}</text>',
            f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) // 2}" y="{HEIGHT - 14}" text-anchor="middle">{x_label}</text>',
            f'<text x="18" y="{(MARGIN_T + HEIGHT - MARGIN_B) // 2}" text-anchor="middle" '
            f'transform="rotate(-90 18 {(MARGIN_T + HEIGHT - MARGIN_B) // 2})">{y_label}</text>',
            f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{WIDTH - MARGIN_L - MARGIN_R}" '
            f'height="{HEIGHT - MARGIN_T - MARGIN_B}" fill="none" stroke="#444"/>',
        ]

    def px(self, x: float) -> float:
        span = self.x_hi - self.x_lo or 1.0
        return MARGIN_L + (x - self.x_lo) / span * (WIDTH - MARGIN_L - MARGIN_R)

    def py(self, y: float) -> float:
        span = self.y_hi - self.y_lo or 1.0
        return HEIGHT - MARGIN_B - (y - self.y_lo) / span * (HEIGHT - MARGIN_T - MARGIN_B)

    def x_ticks(self, ticks_labels: list[tuple[float, str]]):
        for x, label in ticks_labels:
            p = self.px(x)
            self.parts.append(f'<line x1="{_fmt(p)}" y1="{HEIGHT - MARGIN_B}" x2="{_fmt(p)}" y2="{HEIGHT - MARGIN_B + 5}" stroke="#444"/>')
            self.parts.append(f'<text x="{_fmt(p)}" y="{HEIGHT - MARGIN_B + 20}" text-anchor="middle">{label}</text>')

    def y_ticks(self):
        for y in _axis_ticks(self.y_lo, self.y_hi):
            p = self.py(y)
            self.parts.append(f'<line x1="{MARGIN_L - 5}" y1="{_fmt(p)}" x2="{MARGIN_L}" y2="{_fmt(p)}" stroke="#444"/>')
            self.parts.append(f'<text x="{MARGIN_L - 9}" y="{_fmt(p + 4)}" text-anchor="end">{_tick_label(y)}</text>')

    def polyline(self, xs, ys, color: str, label: str, series_idx: int, markers: bool = True):
        pts = " ".join(f"{_fmt(self.px(x))},{_fmt(self.py(y))}" for x, y in zip(xs, ys))
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if markers:
            for x, y in zip(xs, ys):
                self.parts.append(f'<circle cx="{_fmt(self.px(x))}" cy="{_fmt(self.py(y))}" r="2.5" fill="{color}"/>')
        ly = MARGIN_T + 16 + series_idx * 18
        lx = WIDTH - MARGIN_R + 12
        self.parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        self.parts.append(f'<text x="{lx + 30}" y="{ly}">{label}</text>')

    def vline(self, x: float, y: float, color: str):
        self.parts.append(
            f'<line x1="{_fmt(self.px(x))}" y1="{_fmt(self.py(self.y_lo))}" '
            f'x2="{_fmt(self.px(x))}" y2="{_fmt(self.py(y))}" stroke="{color}" stroke-width="1"/>'
        )

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def category_polylines(
    categories: list[str],
    series: list[tuple[str, list[float]]],
    title: str,
    y_label: str,
) -> str:
    """Ratio-style chart: categories on x, one polyline per labelled series."""
    y_hi = max((max(vals) for _, vals in series if len(vals)), default=1.0) or 1.0
    cv = _Canvas(0, max(len(categories) - 1, 1), 0.0, y_hi * 1.05, title, "gate", y_label)
    cv.x_ticks([(i, c) for i, c in enumerate(categories)])
    cv.y_ticks()
    for i, (label, vals) in enumerate(series):
        cv.polyline(list(range(len(vals))), vals, COLORS[i % len(COLORS)], label, i)
    return cv.render()


def xy_polylines(
    xs: list[float],
    series: list[tuple[str, list[float]]],
    title: str,
    x_label: str,
    y_label: str,
) -> str:
    """Sweep-style chart: shared numeric x, one polyline per labelled series."""
    y_hi = max((max(vals) for _, vals in series if len(vals)), default=1.0) or 1.0
    cv = _Canvas(min(xs), max(xs), 0.0, y_hi * 1.05, title, x_label, y_label)
    cv.x_ticks([(x, _tick_label(x)) for x in _axis_ticks(min(xs), max(xs))])
    cv.y_ticks()
    for i, (label, vals) in enumerate(series):
        cv.polyline(xs, vals, COLORS[i % len(COLORS)], label, i, markers=len(xs) <= 60)
    return cv.render()


def histogram_stems(
    values: list[int],
    counts: list[int],
    title: str,
    x_label: str,
    y_label: str,
    x_hi: float | None = None,
) -> str:
    """Stem chart for integer-keyed histograms (function census style)."""
    hi = x_hi if x_hi is not None else (max(values) if values else 1)
    y_hi = max(counts, default=1) or 1
    cv = _Canvas(0, hi or 1, 0.0, y_hi * 1.05, title, x_label, y_label)
    cv.x_ticks([(x, _tick_label(x)) for x in _axis_ticks(0, hi or 1)])
    cv.y_ticks()
    for v, c in zip(values, counts):
        cv.vline(v, c, COLORS[0])
    return cv.render()
