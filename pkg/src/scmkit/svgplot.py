"""Minimal SVG line charts for gap and placebo plots.

Only ``<polyline>`` elements carry data and the treatment-time marker is the
single ``<line>`` element, so tests can count both. Axis frames are
``<path>`` elements. Text labels print values exactly as handed in.
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 720, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 90, 30, 40, 50


@dataclass
class Series:
    name: str
    xs: list[float]
    ys: list[float]
    stroke: str = "#000000"
    width: float = 1.0
    dash: str | None = None
    opacity: float = 1.0
    css_class: str = "series"


def _c(v: float) -> str:
    return f"{v:.2f}"


def line_chart(series: list[Series], vline: float | None = None, title: str = "",
               y_label: str = "", x_labels: list[str] | None = None,
               y_labels: tuple[str, str] | None = None, legend: bool = False) -> str:
    xs = [x for s in series for x in s.xs]
    ys = [y for s in series for y in s.ys]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN_T + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<path class="axes" d="M{MARGIN_L},{MARGIN_T} V{MARGIN_T + ph} H{MARGIN_L + pw}" '
        'fill="none" stroke="#444444" stroke-width="1"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.0f}" y="22" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="15">{escape(title)}</text>')
    if y_label:
        out.append(f'<text x="14" y="{MARGIN_T + ph / 2:.0f}" font-family="sans-serif" '
                   f'font-size="12" transform="rotate(-90 14 {MARGIN_T + ph / 2:.0f})" '
                   f'text-anchor="middle">{escape(y_label)}</text>')
    for lab in x_labels or []:
        out.append(f'<text x="{_c(px(float(lab)))}" y="{HEIGHT - MARGIN_B + 18}" '
                   f'text-anchor="middle" font-family="sans-serif" font-size="11">'
                   f'{escape(lab)}</text>')
    if y_labels:
        lo, hi = y_labels
        out.append(f'<text x="{MARGIN_L - 6}" y="{_c(py(float(lo)))}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{escape(lo)}</text>')
        out.append(f'<text x="{MARGIN_L - 6}" y="{_c(py(float(hi)))}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{escape(hi)}</text>')
    for s in series:
        pts = " ".join(f"{_c(px(x))},{_c(py(y))}" for x, y in zip(s.xs, s.ys))
        dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
        out.append(
            f'<polyline class="{s.css_class}" data-name="{escape(s.name, {chr(34): "&quot;"})}" '
            f'points="{pts}" fill="none" stroke="{s.stroke}" stroke-width="{s.width}" '
            f'stroke-opacity="{s.opacity}"{dash}/>'
        )
    if vline is not None:
        out.append(f'<line class="treatment" x1="{_c(px(vline))}" y1="{MARGIN_T}" '
                   f'x2="{_c(px(vline))}" y2="{MARGIN_T + ph}" stroke="#aa0000" '
                   'stroke-width="1" stroke-dasharray="4 3"/>')
    if legend:
        for i, s in enumerate(series):
            y = MARGIN_T + 14 + 16 * i
            out.append(f'<text x="{MARGIN_L + 12}" y="{y}" font-family="sans-serif" '
                       f'font-size="11" fill="{s.stroke}">{escape(s.name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
