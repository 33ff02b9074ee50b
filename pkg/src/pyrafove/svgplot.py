"""Tiny deterministic SVG charts.

Hand-rolled on purpose: plot files double as diff-able fixtures, so the
output may contain nothing volatile (ids, timestamps, library versions).
Every coordinate is formatted with %.6g; identical data gives identical
bytes.
"""

from __future__ import annotations

import math

from .errors import ParameterError

WIDTH = 640
HEIGHT = 420
MARGIN_L = 66
MARGIN_R = 18
MARGIN_T = 34
MARGIN_B = 50

PALETTE = ("#1f6fb2", "#c03d2e", "#2c8c4b", "#8451a0", "#b07c18", "#4a4a4a")


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Round tick positions covering [lo, hi]; deterministic."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ParameterError("axis range must be finite")
    if hi <= lo:
        hi = lo + (abs(lo) if lo != 0 else 1.0)
    span = hi - lo
    raw = span / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((m for m in (1.0, 2.0, 5.0, 10.0)), key=lambda m: abs(span / (m * mag) - target)) * mag
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + step * 1e-9:
        ticks.append(0.0 if abs(t) < step * 1e-9 else t)
        t += step
    return ticks


class Axis:
    def __init__(self, lo: float, hi: float, px_lo: float, px_hi: float):
        if hi <= lo:
            pad = abs(lo) if lo != 0 else 1.0
            lo, hi = lo - 0.05 * pad, hi + 0.05 * pad
            if hi <= lo:
                lo, hi = lo - 1.0, hi + 1.0
        self.lo, self.hi = lo, hi
        self.px_lo, self.px_hi = px_lo, px_hi

    def __call__(self, v: float) -> float:
        t = (v - self.lo) / (self.hi - self.lo)
        return self.px_lo + t * (self.px_hi - self.px_lo)


def _escape(text: str) -> str:
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def svg_chart(series, title: str, x_label: str, y_label: str) -> str:
    """Render line/scatter series to an SVG document string.

    series: list of dicts with keys x (list), y (list), label (str) and
    optional kind ("line", "scatter", or "both"; default "both").
    Points where y is None are skipped (censored sweep entries).
    """
    pts_all = []
    cleaned = []
    for s in series:
        xs, ys = [], []
        for x, y in zip(s["x"], s["y"]):
            if y is None or x is None:
                continue
            xs.append(float(x))
            ys.append(float(y))
        cleaned.append({"x": xs, "y": ys, "label": s.get("label", ""),
                        "kind": s.get("kind", "both")})
        pts_all.extend(zip(xs, ys))
    if not pts_all:
        raise ParameterError("nothing to plot: all points empty or censored")

    x_lo = min(p[0] for p in pts_all)
    x_hi = max(p[0] for p in pts_all)
    y_lo = min(0.0, min(p[1] for p in pts_all))
    y_hi = max(p[1] for p in pts_all)
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    y_hi += 0.06 * (y_hi - y_lo)

    ax = Axis(x_lo, x_hi, MARGIN_L, WIDTH - MARGIN_R)
    ay = Axis(y_lo, y_hi, HEIGHT - MARGIN_B, MARGIN_T)

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">'
    )
    out.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>')
    out.append(
        f'<text x="{WIDTH / 2:g}" y="20" text-anchor="middle" font-size="14">'
        f"{_escape(title)}</text>"
    )

    for t in _nice_ticks(ax.lo, ax.hi):
        px = ax(t)
        out.append(
            f'<line x1="{_fmt(px)}" y1="{HEIGHT - MARGIN_B}" x2="{_fmt(px)}" '
            f'y2="{MARGIN_T}" stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_fmt(px)}" y="{HEIGHT - MARGIN_B + 16}" text-anchor="middle" '
            f'font-size="11">{_fmt(t)}</text>'
        )
    for t in _nice_ticks(ay.lo, ay.hi):
        py = ay(t)
        out.append(
            f'<line x1="{MARGIN_L}" y1="{_fmt(py)}" x2="{WIDTH - MARGIN_R}" '
            f'y2="{_fmt(py)}" stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{MARGIN_L - 6}" y="{_fmt(py + 4)}" text-anchor="end" '
            f'font-size="11">{_fmt(t)}</text>'
        )
    out.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{WIDTH - MARGIN_L - MARGIN_R}" '
        f'height="{HEIGHT - MARGIN_T - MARGIN_B}" fill="none" stroke="#444444"/>'
    )
    out.append(
        f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) / 2:g}" y="{HEIGHT - 12}" '
        f'text-anchor="middle" font-size="12">{_escape(x_label)}</text>'
    )
    out.append(
        f'<text x="16" y="{(MARGIN_T + HEIGHT - MARGIN_B) / 2:g}" text-anchor="middle" '
        f'font-size="12" transform="rotate(-90 16 {(MARGIN_T + HEIGHT - MARGIN_B) / 2:g})">'
        f"{_escape(y_label)}</text>"
    )

    for i, s in enumerate(cleaned):
        color = PALETTE[i % len(PALETTE)]
        if not s["x"]:
            continue
        if s["kind"] in ("line", "both") and len(s["x"]) > 1:
            d = " ".join(
                f"{'M' if j == 0 else 'L'}{_fmt(ax(x))},{_fmt(ay(y))}"
                for j, (x, y) in enumerate(zip(s["x"], s["y"]))
            )
            out.append(f'<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if s["kind"] in ("scatter", "both"):
            for x, y in zip(s["x"], s["y"]):
                out.append(
                    f'<circle cx="{_fmt(ax(x))}" cy="{_fmt(ay(y))}" r="3" fill="{color}"/>'
                )
        if s["label"]:
            ly = MARGIN_T + 14 + 15 * i
            out.append(
                f'<rect x="{MARGIN_L + 8}" y="{ly - 8}" width="10" height="10" fill="{color}"/>'
            )
            out.append(
                f'<text x="{MARGIN_L + 22}" y="{ly + 1}" font-size="11">'
                f"{_escape(s['label'])}</text>"
            )

    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_chart(path: str, series, title: str, x_label: str, y_label: str) -> None:
    data = svg_chart(series, title, x_label, y_label)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(data)
