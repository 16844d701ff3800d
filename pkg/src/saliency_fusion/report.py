"""Self-contained SVG line charts with s.e.m. bands."""
from __future__ import annotations

import math
from collections import defaultdict
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .fusion import WeightDatabase
from .metrics import FrameScore

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=60, right=150, top=40, bottom=50)


def mean_sem(values: Sequence[float]) -> tuple[float, float]:
    """Mean and standard error (sample sd / sqrt(n)); sem is 0 for a single value."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size > 1:
        return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))
    return float(arr.mean()), 0.0


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def line_chart_svg(title: str, xlabel: str, ylabel: str, series: list) -> str:
    """``series`` is a list of ``(label, xs, means, half_widths)``."""
    xs_all = [x for _, xs, _, _ in series for x in xs]
    lo_all = [m - h for _, _, ms, hs in series for m, h in zip(ms, hs)]
    hi_all = [m + h for _, _, ms, hs in series for m, h in zip(ms, hs)]
    x0, x1 = (min(xs_all), max(xs_all)) if xs_all else (0, 1)
    y0, y1 = (min(lo_all), max(hi_all)) if lo_all else (0, 1)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN["top"] + (y1 - y) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<title>{escape(title)}</title>',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<g class="axes" stroke="black" fill="none">'
           f'<line x1="{MARGIN["left"]}" y1="{MARGIN["top"] + ph}" x2="{MARGIN["left"] + pw}" y2="{MARGIN["top"] + ph}"/>'
           f'<line x1="{MARGIN["left"]}" y1="{MARGIN["top"]}" x2="{MARGIN["left"]}" y2="{MARGIN["top"] + ph}"/></g>']
    for k in range(5):
        yv = y0 + (y1 - y0) * k / 4
        xv = x0 + (x1 - x0) * k / 4
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{py(yv) + 4:.1f}" text-anchor="end" font-size="11">{yv:.3g}</text>')
        out.append(f'<text x="{px(xv):.1f}" y="{MARGIN["top"] + ph + 16}" text-anchor="middle" font-size="11">{xv:.3g}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(16,{MARGIN["top"] + ph / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle" font-size="12">{escape(ylabel)}</text>')
    for i, (label, xs, ms, hs) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        upper = " ".join(f"{_fmt(px(x))},{_fmt(py(m + h))}" for x, m, h in zip(xs, ms, hs))
        lower = " ".join(f"{_fmt(px(x))},{_fmt(py(m - h))}" for x, m, h in reversed(list(zip(xs, ms, hs))))
        line = " ".join(f"{_fmt(px(x))},{_fmt(py(m))}" for x, m in zip(xs, ms))
        ly = MARGIN["top"] + 14 + 18 * i
        out.append(f'<g class="series" data-label="{escape(label)}">')
        out.append(f'<polygon class="sem-band" points="{upper} {lower}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        out.append(f'<polyline class="mean" points="{line}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<line x1="{WIDTH - MARGIN["right"] + 10}" y1="{ly}" x2="{WIDTH - MARGIN["right"] + 30}" '
                   f'y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text class="legend" x="{WIDTH - MARGIN["right"] + 35}" y="{ly + 4}" font-size="12">{escape(label)}</text>')
        out.append('</g>')
    out.append('</svg>')
    return "\n".join(out) + "\n"


def weight_series(db: WeightDatabase, method: str, category: str) -> list:
    """Per-feature normalized weight vs frame: mean and s.e.m. across videos."""
    by = defaultdict(lambda: defaultdict(list))
    names = None
    for (v, c, f, m), w in sorted(db.entries.items()):
        if c != category or m != method:
            continue
        names = w.names
        for name, bn in zip(w.names, w.beta_norm):
            by[name][f].append(float(bn))
    series = []
    for name in names or ():
        frames = sorted(by[name])
        stats = [mean_sem(by[name][f]) for f in frames]
        series.append((name, frames, [s[0] for s in stats], [s[1] for s in stats]))
    return series


def score_series(scores: Sequence[FrameScore], metric: str) -> list:
    """Per-scheme metric vs frame: mean and s.e.m. across videos."""
    by = defaultdict(lambda: defaultdict(list))
    for s in scores:
        by[s.scheme][s.frame_index].append(getattr(s, metric))
    series = []
    for scheme in sorted(by):
        frames = sorted(by[scheme])
        stats = [mean_sem(by[scheme][f]) for f in frames]
        series.append((scheme, frames, [s[0] for s in stats], [s[1] for s in stats]))
    return series


def weight_charts(db: WeightDatabase) -> dict:
    """``{filename: svg}`` for every (method, category) in the database."""
    out = {}
    for method in db.methods():
        for category in db.categories():
            series = weight_series(db, method, category)
            if series:
                out[f"weights_{method}_{category}.svg"] = line_chart_svg(
                    f"{method} weights - {category}", "frame", "normalized weight", series)
    return out


def score_charts(scores: Sequence[FrameScore]) -> dict:
    return {f"scores_{metric}.svg": line_chart_svg(f"{metric.upper()} per frame", "frame",
                                                   metric.upper(), score_series(scores, metric))
            for metric in ("nss", "kld")}
