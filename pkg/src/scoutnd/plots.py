"""Minimal static SVG rendering for variance box plots, data profiles and error curves.

Every data series is a ``<polyline class="series">`` (or ``<g class="box">`` for
box plots) carrying ``data-label``; tests compare plotted coordinates by
parsing these elements back.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 30, 50
COLORS = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02")


class _Axis:
    def __init__(self, lo, hi, log, pix_lo, pix_hi):
        if log:
            lo, hi = math.log10(lo), math.log10(hi)
        if hi <= lo:
            hi = lo + 1.0
        self.lo, self.hi, self.log = lo, hi, log
        self.p0, self.p1 = pix_lo, pix_hi

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if self.log:
            v = np.log10(v)
        return self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)

    def ticks(self):
        if self.log:
            return [10.0**e for e in range(math.floor(self.lo), math.ceil(self.hi) + 1)]
        return list(np.linspace(self.lo, self.hi, 6))


def _fmt(v):
    return f"{v:.3g}"


def _frame(title, xlabel, ylabel, xa: _Axis, ya: _Axis, xticks: bool = True) -> list:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{H - BOTTOM}" x2="{W - RIGHT}" y2="{H - BOTTOM}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{H - BOTTOM}" stroke="black"/>',
        f'<text x="{(LEFT + W - RIGHT) / 2}" y="{H - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="15" y="{(TOP + H - BOTTOM) / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {(TOP + H - BOTTOM) / 2})">{escape(ylabel)}</text>',
    ]
    lo_x, hi_x = sorted((xa.p0, xa.p1))
    for t in xa.ticks() if xticks else ():
        px = float(xa(t))
        if lo_x - 1e-9 <= px <= hi_x + 1e-9:
            out.append(f'<text x="{px:.2f}" y="{H - BOTTOM + 15}" text-anchor="middle" font-size="10">{_fmt(t)}</text>')
    lo_y, hi_y = sorted((ya.p0, ya.p1))
    for t in ya.ticks():
        py = float(ya(t))
        if lo_y - 1e-9 <= py <= hi_y + 1e-9:
            out.append(f'<text x="{LEFT - 5}" y="{py + 3:.2f}" text-anchor="end" font-size="10">{_fmt(t)}</text>')
    return out


def _legend(labels) -> list:
    out = []
    for i, lab in enumerate(labels):
        y = TOP + 15 + 18 * i
        c = COLORS[i % len(COLORS)]
        out.append(f'<line x1="{W - RIGHT + 10}" y1="{y}" x2="{W - RIGHT + 30}" y2="{y}" stroke="{c}" stroke-width="2"/>')
        out.append(f'<text x="{W - RIGHT + 35}" y="{y + 4}" font-size="11">{escape(lab)}</text>')
    return out


def _points(xs, ys) -> str:
    return " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))


def line_plot_svg(curves: dict, path, title="", xlabel="", ylabel="", logx=False, logy=False, step=False) -> None:
    """One polyline per ``{label: (x, y)}``; ``step`` draws right-continuous steps."""
    cleaned = {}
    for lab, (x, y) in curves.items():
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        if logx:
            keep &= x > 0
        if logy:
            keep &= y > 0
        cleaned[lab] = (x[keep], y[keep])
    allx = np.concatenate([c[0] for c in cleaned.values()] or [np.array([1.0])])
    ally = np.concatenate([c[1] for c in cleaned.values()] or [np.array([1.0])])
    if allx.size == 0:
        allx = np.array([1.0])
    if ally.size == 0:
        ally = np.array([1.0])
    xa = _Axis(allx.min(), allx.max(), logx, LEFT, W - RIGHT)
    ya = _Axis(ally.min(), ally.max(), logy, H - BOTTOM, TOP)
    out = _frame(title, xlabel, ylabel, xa, ya)
    for i, (lab, (x, y)) in enumerate(cleaned.items()):
        if step and x.size:
            x = np.repeat(x, 2)[1:]
            y = np.repeat(y, 2)[:-1]
        px, py = xa(x), ya(y)
        out.append(f'<polyline class="series" data-label="{escape(lab)}" fill="none" '
                   f'stroke="{COLORS[i % len(COLORS)]}" stroke-width="1.5" points="{_points(px, py)}"/>')
    out += _legend(cleaned)
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def box_plot_svg(groups: dict, path, title="", xlabel="", ylabel="", logy=True) -> None:
    """Box plots of ``{group: {series: values}}`` side by side per group."""
    series = list(dict.fromkeys(s for g in groups.values() for s in g))
    vals = np.concatenate([np.asarray(v, dtype=float) for g in groups.values() for v in g.values()] or [np.ones(1)])
    vals = vals[vals > 0] if logy else vals
    ya = _Axis(vals.min(), vals.max(), logy, H - BOTTOM, TOP)
    n = max(len(groups), 1)
    slot = (W - RIGHT - LEFT) / n
    xa = _Axis(0, n, False, LEFT, W - RIGHT)
    out = _frame(title, xlabel, ylabel, xa, ya, xticks=False)
    width = slot / (len(series) + 1)
    for gi, (gname, g) in enumerate(groups.items()):
        gx = LEFT + gi * slot
        out.append(f'<text x="{gx + slot / 2:.2f}" y="{H - BOTTOM + 15}" text-anchor="middle" font-size="10">{escape(str(gname))}</text>')
        for si, s in enumerate(series):
            if s not in g:
                continue
            v = np.asarray(g[s], dtype=float)
            q0, q1, q2, q3, q4 = (float(q) for q in np.percentile(v, [0, 25, 50, 75, 100]))
            cx = gx + width * (si + 1)
            c = COLORS[si % len(COLORS)]
            y0, y1, y2, y3, y4 = (float(ya(q)) for q in (q0, q1, q2, q3, q4))
            out.append(
                f'<g class="box" data-label="{escape(s)}" data-group="{escape(str(gname))}" '
                f'data-quartiles="{q0!r},{q1!r},{q2!r},{q3!r},{q4!r}">'
                f'<line x1="{cx:.2f}" y1="{y0:.2f}" x2="{cx:.2f}" y2="{y4:.2f}" stroke="{c}"/>'
                f'<rect x="{cx - width / 3:.2f}" y="{y3:.2f}" width="{2 * width / 3:.2f}" height="{max(y1 - y3, 0.5):.2f}" '
                f'fill="{c}" fill-opacity="0.4" stroke="{c}"/>'
                f'<line x1="{cx - width / 3:.2f}" y1="{y2:.2f}" x2="{cx + width / 3:.2f}" y2="{y2:.2f}" stroke="black"/>'
                f"</g>"
            )
    out += _legend(series)
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
