"""Dependency-free static SVG output: polyline plots and field heatmaps.

Deliberately minimal; the plots accompany the CSV exports rather than
replace them.
"""

from __future__ import annotations

import numpy as np

_W, _H = 640, 440
_ML, _MR, _MT, _MB = 60, 20, 20, 45
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _finite_limits(arrays):
    lo, hi = np.inf, -np.inf
    for a in arrays:
        a = np.asarray(a, dtype=float)
        a = a[np.isfinite(a)]
        if a.size:
            lo = min(lo, float(a.min()))
            hi = max(hi, float(a.max()))
    if not np.isfinite(lo):
        lo, hi = 0.0, 1.0
    if hi <= lo:
        hi = lo + 1.0
    return lo, hi


def _ticks(lo, hi, n=5):
    raw = np.linspace(lo, hi, n)
    return [(v, f"{v:.4g}") for v in raw]


def line_plot(path, curves, xlabel="", ylabel="", title=""):
    """curves: list of (x, y, label or None, stroke_width or None)."""
    xs = [c[0] for c in curves]
    ys = [c[1] for c in curves]
    x_lo, x_hi = _finite_limits(xs)
    y_lo, y_hi = _finite_limits(ys)
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def sx(v):
        return _ML + (v - x_lo) / (x_hi - x_lo) * pw

    def sy(v):
        return _MT + (y_hi - v) / (y_hi - y_lo) * ph

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
             f'height="{_H}" viewBox="0 0 {_W} {_H}">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>']
    for v, lab in _ticks(x_lo, x_hi):
        x = sx(v)
        parts.append(f'<line x1="{x:.1f}" y1="{_MT + ph}" x2="{x:.1f}" '
                     f'y2="{_MT + ph + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{_MT + ph + 18}" font-size="11" '
                     f'text-anchor="middle">{lab}</text>')
    for v, lab in _ticks(y_lo, y_hi):
        y = sy(v)
        parts.append(f'<line x1="{_ML - 5}" y1="{y:.1f}" x2="{_ML}" '
                     f'y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{_ML - 8}" y="{y + 4:.1f}" font-size="11" '
                     f'text-anchor="end">{lab}</text>')
    parts.append(f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" '
                 f'fill="none" stroke="black"/>')
    legend_y = _MT + 14
    for i, curve in enumerate(curves):
        x, y = np.asarray(curve[0], dtype=float), np.asarray(curve[1], dtype=float)
        label = curve[2] if len(curve) > 2 else None
        width = curve[3] if len(curve) > 3 and curve[3] else 1.5
        color = _COLORS[i % len(_COLORS)]
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[ok], y[ok]))
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="{width}"/>')
        if label:
            parts.append(f'<line x1="{_ML + pw - 130}" y1="{legend_y}" '
                         f'x2="{_ML + pw - 105}" y2="{legend_y}" '
                         f'stroke="{color}" stroke-width="{width}"/>')
            parts.append(f'<text x="{_ML + pw - 100}" y="{legend_y + 4}" '
                         f'font-size="11">{label}</text>')
            legend_y += 16
    if xlabel:
        parts.append(f'<text x="{_ML + pw / 2}" y="{_H - 8}" font-size="12" '
                     f'text-anchor="middle">{xlabel}</text>')
    if ylabel:
        parts.append(f'<text x="14" y="{_MT + ph / 2}" font-size="12" '
                     f'text-anchor="middle" '
                     f'transform="rotate(-90 14 {_MT + ph / 2})">{ylabel}</text>')
    if title:
        parts.append(f'<text x="{_ML + pw / 2}" y="14" font-size="13" '
                     f'text-anchor="middle">{title}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


def heatmap(path, xs, ts, values, cap=None, xlabel="x", ylabel="t", title=""):
    """Field heatmap values[i, k] at (xs[i], ts[k]); values above cap (or
    non-finite) are clipped to the top color."""
    v = np.asarray(values, dtype=float).copy()
    if cap is None:
        finite = v[np.isfinite(v)]
        cap = float(np.percentile(finite, 99.5)) if finite.size else 1.0
    v = np.where(np.isfinite(v), np.minimum(v, cap), cap)
    lo, hi = float(v.min()), float(max(v.max(), v.min() + 1e-30))
    pw, ph = _W - _ML - _MR, _H - _MT - _MB
    nx, nt = v.shape
    cw, chh = pw / nx, ph / nt
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
             f'height="{_H}" viewBox="0 0 {_W} {_H}">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>']
    for i in range(nx):
        for k in range(nt):
            f = (v[i, k] - lo) / (hi - lo)
            r = int(255 * f)
            b = int(255 * (1.0 - f))
            g = int(96 * (1.0 - abs(2 * f - 1)))
            parts.append(
                f'<rect x="{_ML + i * cw:.2f}" '
                f'y="{_MT + (nt - 1 - k) * chh:.2f}" width="{cw + 0.5:.2f}" '
                f'height="{chh + 0.5:.2f}" fill="rgb({r},{g},{b})"/>')
    parts.append(f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" '
                 f'fill="none" stroke="black"/>')
    parts.append(f'<text x="{_ML}" y="{_MT + ph + 18}" font-size="11">'
                 f'{xs[0]:.3g}</text>')
    parts.append(f'<text x="{_ML + pw}" y="{_MT + ph + 18}" font-size="11" '
                 f'text-anchor="end">{xs[-1]:.3g}</text>')
    parts.append(f'<text x="{_ML - 8}" y="{_MT + ph}" font-size="11" '
                 f'text-anchor="end">{ts[0]:.3g}</text>')
    parts.append(f'<text x="{_ML - 8}" y="{_MT + 10}" font-size="11" '
                 f'text-anchor="end">{ts[-1]:.3g}</text>')
    parts.append(f'<text x="{_ML + pw / 2}" y="{_H - 8}" font-size="12" '
                 f'text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="14" y="{_MT + ph / 2}" font-size="12" '
                 f'text-anchor="middle" '
                 f'transform="rotate(-90 14 {_MT + ph / 2})">{ylabel}</text>')
    if title:
        parts.append(f'<text x="{_ML + pw / 2}" y="14" font-size="13" '
                     f'text-anchor="middle">{title}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
