"""Dependency-free SVG charts: line plots, box plots, bar charts.

Output is deterministic for fixed inputs (no timestamps, stable number
formatting) so emitted plots can be diffed byte-for-byte.
"""

import math

import numpy as np

from .dataio import _atomic_write

__all__ = ["line_plot", "box_plot", "bar_chart"]

WIDTH = 640
HEIGHT = 480
MARGIN = {"left": 64, "right": 16, "top": 36, "bottom": 46}

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b"]


def _num(v):
    """Format a coordinate or tick label compactly and deterministically."""
    s = "%.6g" % float(v)
    return "0" if s == "-0" else s


def _nice_ticks(lo, hi, n=6):
    """Return up to ~n round tick values covering [lo, hi]."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        lo, hi = 0.0, 1.0
    if hi - lo <= 0:
        pad = max(abs(lo), 1.0) * 0.1
        lo, hi = lo - pad, hi + pad
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + step * 1e-9:
        ticks.append(0.0 if abs(t) < step * 1e-9 else t)
        t += step
    return ticks


class _Canvas:
    def __init__(self, title, xlabel, ylabel):
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
            'viewBox="0 0 %d %d">' % (WIDTH, HEIGHT, WIDTH, HEIGHT),
            '<rect width="%d" height="%d" fill="white"/>' % (WIDTH, HEIGHT),
            '<text x="%d" y="22" font-family="sans-serif" font-size="15" '
            'text-anchor="middle">%s</text>' % (WIDTH // 2, _esc(title)),
        ]
        self.x0 = MARGIN["left"]
        self.x1 = WIDTH - MARGIN["right"]
        self.y0 = HEIGHT - MARGIN["bottom"]
        self.y1 = MARGIN["top"]
        self.parts.append(
            '<text x="%d" y="%d" font-family="sans-serif" font-size="12" '
            'text-anchor="middle">%s</text>'
            % ((self.x0 + self.x1) // 2, HEIGHT - 8, _esc(xlabel)))
        self.parts.append(
            '<text x="14" y="%d" font-family="sans-serif" font-size="12" '
            'text-anchor="middle" transform="rotate(-90 14 %d)">%s</text>'
            % ((self.y0 + self.y1) // 2, (self.y0 + self.y1) // 2,
               _esc(ylabel)))

    def set_scales(self, xlo, xhi, ylo, yhi):
        if xhi - xlo <= 0:
            xlo, xhi = xlo - 0.5, xhi + 0.5
        if yhi - ylo <= 0:
            pad = max(abs(ylo), 1.0) * 0.1
            ylo, yhi = ylo - pad, yhi + pad
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi

    def px(self, x):
        return self.x0 + (x - self.xlo) / (self.xhi - self.xlo) \
            * (self.x1 - self.x0)

    def py(self, y):
        return self.y0 + (y - self.ylo) / (self.yhi - self.ylo) \
            * (self.y1 - self.y0)

    def axes(self, xticks, yticks, xtick_labels=None):
        for i, t in enumerate(xticks):
            x = self.px(t)
            lab = xtick_labels[i] if xtick_labels is not None else _num(t)
            self.parts.append(
                '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#cccccc" '
                'stroke-width="0.5"/>'
                % (_num(x), _num(self.y0), _num(x), _num(self.y1)))
            self.parts.append(
                '<text x="%s" y="%s" font-family="sans-serif" font-size="11" '
                'text-anchor="middle">%s</text>'
                % (_num(x), _num(self.y0 + 16), _esc(lab)))
        for t in yticks:
            y = self.py(t)
            self.parts.append(
                '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#cccccc" '
                'stroke-width="0.5"/>'
                % (_num(self.x0), _num(y), _num(self.x1), _num(y)))
            self.parts.append(
                '<text x="%s" y="%s" font-family="sans-serif" font-size="11" '
                'text-anchor="end">%s</text>'
                % (_num(self.x0 - 6), _num(y + 4), _num(t)))
        self.parts.append(
            '<rect x="%s" y="%s" width="%s" height="%s" fill="none" '
            'stroke="black"/>'
            % (_num(self.x0), _num(self.y1), _num(self.x1 - self.x0),
               _num(self.y0 - self.y1)))

    def finish(self, path):
        self.parts.append("</svg>")
        text = "\n".join(self.parts) + "\n"
        _atomic_write(path, lambda fh: fh.write(text))


def _esc(s):
    return (str(s).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


def line_plot(path, x, series, labels=None, title="", xlabel="",
              ylabel="", hline=None):
    """Draw one polyline per series over shared x values.

    NaN entries break the polyline; ``hline`` adds a dashed horizontal
    reference line.
    """
    x = np.asarray(x, dtype=float)
    series = [np.asarray(s, dtype=float) for s in series]
    finite = [s[np.isfinite(s)] for s in series]
    allvals = (np.concatenate([f for f in finite if f.size])
               if any(f.size for f in finite) else np.array([0.0, 1.0]))
    ylo, yhi = float(allvals.min()), float(allvals.max())
    if hline is not None:
        ylo, yhi = min(ylo, hline), max(yhi, hline)
    cv = _Canvas(title, xlabel, ylabel)
    yticks = _nice_ticks(ylo, yhi)
    ylo = min(ylo, yticks[0])
    yhi = max(yhi, yticks[-1])
    cv.set_scales(float(x.min()), float(x.max()), ylo, yhi)
    if x.size <= 12 and np.allclose(x, np.round(x)):
        xticks = list(x)
    else:
        xticks = _nice_ticks(float(x.min()), float(x.max()))
    cv.axes(xticks, yticks)
    if hline is not None:
        y = cv.py(hline)
        cv.parts.append(
            '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="black" '
            'stroke-dasharray="4 3"/>'
            % (_num(cv.x0), _num(y), _num(cv.x1), _num(y)))
    many = len(series) > len(_PALETTE)
    for k, s in enumerate(series):
        color = _PALETTE[0] if many else _PALETTE[k % len(_PALETTE)]
        opacity = ' stroke-opacity="0.35"' if many else ""
        pts = []
        for xi, yi in zip(x, s):
            if np.isfinite(yi):
                pts.append("%s,%s" % (_num(cv.px(xi)), _num(cv.py(yi))))
            elif pts:
                cv.parts.append(
                    '<polyline points="%s" fill="none" stroke="%s"%s/>'
                    % (" ".join(pts), color, opacity))
                pts = []
        if pts:
            cv.parts.append(
                '<polyline points="%s" fill="none" stroke="%s"%s/>'
                % (" ".join(pts), color, opacity))
    if labels and not many:
        for k, lab in enumerate(labels):
            cv.parts.append(
                '<rect x="%d" y="%d" width="10" height="10" fill="%s"/>'
                % (cv.x1 - 120, cv.y1 + 8 + 16 * k,
                   _PALETTE[k % len(_PALETTE)]))
            cv.parts.append(
                '<text x="%d" y="%d" font-family="sans-serif" '
                'font-size="11">%s</text>'
                % (cv.x1 - 106, cv.y1 + 17 + 16 * k, _esc(lab)))
    cv.finish(path)


def box_plot(path, groups, labels, title="", ylabel=""):
    """Draw one box (median, quartiles, min-max whiskers) per group."""
    groups = [np.asarray(g, dtype=float) for g in groups]
    allvals = (np.concatenate([g for g in groups if g.size])
               if any(g.size for g in groups) else np.array([0.0, 1.0]))
    cv = _Canvas(title, "", ylabel)
    yticks = _nice_ticks(float(allvals.min()), float(allvals.max()))
    cv.set_scales(0.0, float(len(groups)),
                  min(float(allvals.min()), yticks[0]),
                  max(float(allvals.max()), yticks[-1]))
    centers = [k + 0.5 for k in range(len(groups))]
    cv.axes(centers, yticks, xtick_labels=[str(l) for l in labels])
    half = 0.28
    for k, g in enumerate(groups):
        if g.size == 0:
            continue
        color = _PALETTE[k % len(_PALETTE)]
        q1, med, q3 = (float(v) for v in
                       np.percentile(g, [25.0, 50.0, 75.0]))
        lo, hi = float(g.min()), float(g.max())
        cx = centers[k]
        xl, xr = cv.px(cx - half), cv.px(cx + half)
        cv.parts.append(
            '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="black"/>'
            % (_num(cv.px(cx)), _num(cv.py(lo)), _num(cv.px(cx)),
               _num(cv.py(q1))))
        cv.parts.append(
            '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="black"/>'
            % (_num(cv.px(cx)), _num(cv.py(q3)), _num(cv.px(cx)),
               _num(cv.py(hi))))
        cv.parts.append(
            '<rect x="%s" y="%s" width="%s" height="%s" fill="%s" '
            'fill-opacity="0.5" stroke="black"/>'
            % (_num(xl), _num(cv.py(q3)), _num(xr - xl),
               _num(cv.py(q1) - cv.py(q3)), color))
        cv.parts.append(
            '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="black" '
            'stroke-width="2"/>'
            % (_num(xl), _num(cv.py(med)), _num(xr), _num(cv.py(med))))
        for v in g:
            cv.parts.append(
                '<circle cx="%s" cy="%s" r="2" fill="black" '
                'fill-opacity="0.4"/>'
                % (_num(cv.px(cx)), _num(cv.py(float(v)))))
    cv.finish(path)


def bar_chart(path, categories, counts, title="", xlabel="",
              ylabel="count"):
    """Draw one labeled bar per category (counts are non-negative)."""
    counts = [float(c) for c in counts]
    top = max(counts) if counts else 1.0
    cv = _Canvas(title, xlabel, ylabel)
    yticks = [t for t in _nice_ticks(0.0, max(top, 1.0)) if t >= 0]
    cv.set_scales(0.0, float(len(categories)), 0.0,
                  max(max(top, 1.0), yticks[-1]))
    centers = [k + 0.5 for k in range(len(categories))]
    cv.axes(centers, yticks, xtick_labels=[str(c) for c in categories])
    half = 0.38
    for k, c in enumerate(counts):
        xl = cv.px(centers[k] - half)
        xr = cv.px(centers[k] + half)
        cv.parts.append(
            '<rect x="%s" y="%s" width="%s" height="%s" fill="%s" '
            'stroke="black"/>'
            % (_num(xl), _num(cv.py(c)), _num(xr - xl),
               _num(cv.py(0.0) - cv.py(c)), _PALETTE[0]))
    cv.finish(path)
