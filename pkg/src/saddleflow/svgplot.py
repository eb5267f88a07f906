"""Self-contained SVG emission for experiment figures.

Plain text generation, no renderer dependency: output is byte-deterministic
for fixed input, which lets experiment runs be diffed. Line plots draw one
polyline per series with an optional shaded min/max band; the phase plot
draws objective contours (marching squares on a sampled grid) under
trajectory curves.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["emit_plot", "emit_phase_plot"]

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 72, 16, 28, 48

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Round tick locations covering [lo, hi] with a 1/2/5 step."""
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * mag
        if raw <= step:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _tick_label(v: float) -> str:
    return f"{v:g}"


class _Frame:
    """Affine data-to-pixel map for one plot area."""

    def __init__(self, xlo, xhi, ylo, yhi):
        if xhi <= xlo:
            xhi = xlo + 1.0
        if yhi <= ylo:
            pad = 1.0 if ylo == 0 else abs(ylo) * 0.1
            ylo, yhi = ylo - pad, yhi + pad
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi

    def px(self, x: float) -> float:
        t = (x - self.xlo) / (self.xhi - self.xlo)
        return MARGIN_L + t * (WIDTH - MARGIN_L - MARGIN_R)

    def py(self, y: float) -> float:
        t = (y - self.ylo) / (self.yhi - self.ylo)
        return HEIGHT - MARGIN_B - t * (HEIGHT - MARGIN_T - MARGIN_B)


def _axes(frame: _Frame, xlabel: str, ylabel: str, title: str, ylog: bool) -> list[str]:
    parts = []
    x0, x1 = frame.px(frame.xlo), frame.px(frame.xhi)
    y0, y1 = frame.py(frame.ylo), frame.py(frame.yhi)
    parts.append(
        f'<rect x="{_fmt(x0)}" y="{_fmt(y1)}" width="{_fmt(x1 - x0)}" '
        f'height="{_fmt(y0 - y1)}" fill="none" stroke="#333333" stroke-width="1"/>'
    )
    for t in _nice_ticks(frame.xlo, frame.xhi):
        px = frame.px(t)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{_fmt(y0)}" x2="{_fmt(px)}" y2="{_fmt(y0 + 4)}" '
            f'stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(px)}" y="{_fmt(y0 + 18)}" font-size="11" '
            f'text-anchor="middle" fill="#333333">{_tick_label(t)}</text>'
        )
    for t in _nice_ticks(frame.ylo, frame.yhi):
        py = frame.py(t)
        label = f"1e{t:g}" if ylog else _tick_label(t)
        parts.append(
            f'<line x1="{_fmt(x0 - 4)}" y1="{_fmt(py)}" x2="{_fmt(x0)}" y2="{_fmt(py)}" '
            f'stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(x0 - 7)}" y="{_fmt(py + 4)}" font-size="11" '
            f'text-anchor="end" fill="#333333">{label}</text>'
        )
    parts.append(
        f'<text x="{_fmt((x0 + x1) / 2)}" y="{HEIGHT - 10}" font-size="12" '
        f'text-anchor="middle" fill="#333333">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{_fmt((y0 + y1) / 2)}" font-size="12" text-anchor="middle" '
        f'fill="#333333" transform="rotate(-90 16 {_fmt((y0 + y1) / 2)})">{ylabel}</text>'
    )
    if title:
        parts.append(
            f'<text x="{_fmt((x0 + x1) / 2)}" y="18" font-size="13" '
            f'text-anchor="middle" fill="#111111">{title}</text>'
        )
    return parts


def _polyline(frame: _Frame, xs, ys, color: str, width: float = 1.5) -> str:
    pts = " ".join(f"{_fmt(frame.px(x))},{_fmt(frame.py(y))}" for x, y in zip(xs, ys))
    return (
        f'<polyline points="{pts}" fill="none" stroke="{color}" '
        f'stroke-width="{width:g}"/>'
    )


def _document(body: list[str]) -> str:
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">\n'
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def emit_plot(
    path,
    x,
    curves,
    labels,
    bands=None,
    ylog: bool = False,
    xlabel: str = "t",
    ylabel: str = "",
    title: str = "",
) -> None:
    """Write a line plot: one polyline per curve, optional min/max bands.

    ``bands`` is an optional list (one entry per curve, each ``None`` or a
    ``(lo, hi)`` pair of series) shaded behind the curves. With ``ylog`` the
    data are log10-transformed and ticks labelled as powers of ten; values
    must then be positive.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0 or not curves:
        raise ValueError("emit_plot needs non-empty series")
    if len(labels) != len(curves):
        raise ValueError("one label per curve required")
    curves = [np.asarray(c, dtype=float) for c in curves]
    for c in curves:
        if c.shape != x.shape:
            raise ValueError("all curves must match the x grid")
    if bands is not None:
        if len(bands) != len(curves):
            raise ValueError("one band entry per curve required")
        bands = [
            None if b is None else (np.asarray(b[0], float), np.asarray(b[1], float))
            for b in bands
        ]
    else:
        bands = [None] * len(curves)

    def tf(values: np.ndarray) -> np.ndarray:
        if not ylog:
            return values
        if np.any(values <= 0):
            raise ValueError("log-scale plots require positive values")
        return np.log10(values)

    tcurves = [tf(c) for c in curves]
    tbands = [None if b is None else (tf(b[0]), tf(b[1])) for b in bands]
    all_y = np.concatenate(tcurves + [v for b in tbands if b is not None for v in b])
    frame = _Frame(float(x[0]), float(x[-1]), float(np.min(all_y)), float(np.max(all_y)))

    body = _axes(frame, xlabel, ylabel, title, ylog)
    for i, band in enumerate(tbands):
        if band is None:
            continue
        lo, hi = band
        fwd = [f"{_fmt(frame.px(a))},{_fmt(frame.py(b))}" for a, b in zip(x, lo)]
        rev = [f"{_fmt(frame.px(a))},{_fmt(frame.py(b))}" for a, b in zip(x[::-1], hi[::-1])]
        color = PALETTE[i % len(PALETTE)]
        body.append(
            f'<polygon points="{" ".join(fwd + rev)}" fill="{color}" '
            f'fill-opacity="0.18" stroke="none"/>'
        )
    for i, c in enumerate(tcurves):
        body.append(_polyline(frame, x, c, PALETTE[i % len(PALETTE)]))
    # legend, top right inside the frame
    lx = WIDTH - MARGIN_R - 150
    ly = MARGIN_T + 12
    for i, label in enumerate(labels):
        color = PALETTE[i % len(PALETTE)]
        body.append(
            f'<line x1="{lx}" y1="{ly + 16 * i}" x2="{lx + 22}" y2="{ly + 16 * i}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        body.append(
            f'<text x="{lx + 28}" y="{ly + 16 * i + 4}" font-size="11" '
            f'fill="#333333">{label}</text>'
        )
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(_document(body))


def _contour_segments(xg, yg, F, level):
    """Marching-squares line segments of ``F(x, y) == level`` on the grid."""
    segs = []
    nx, ny = len(xg), len(yg)
    for i in range(nx - 1):
        for j in range(ny - 1):
            corners = [
                (xg[i], yg[j], F[j, i]),
                (xg[i + 1], yg[j], F[j, i + 1]),
                (xg[i + 1], yg[j + 1], F[j + 1, i + 1]),
                (xg[i], yg[j + 1], F[j + 1, i]),
            ]
            pts = []
            for k in range(4):
                x1, y1, f1 = corners[k]
                x2, y2, f2 = corners[(k + 1) % 4]
                if (f1 - level) * (f2 - level) < 0:
                    t = (level - f1) / (f2 - f1)
                    pts.append((x1 + t * (x2 - x1), y1 + t * (y2 - y1)))
            if len(pts) == 2:
                segs.append((pts[0], pts[1]))
            elif len(pts) == 4:  # saddle cell: pair crossings in edge order
                segs.append((pts[0], pts[1]))
                segs.append((pts[2], pts[3]))
    return segs


def emit_phase_plot(
    path,
    objective,
    box,
    trajectories,
    labels,
    reference=None,
    levels: int = 10,
    grid: int = 60,
    xlabel: str = "x",
    ylabel: str = "y",
    title: str = "",
) -> None:
    """Write a 2-D phase plot: objective contours plus trajectory curves.

    ``objective`` maps a length-2 point to a scalar; ``box`` is
    ``(xlo, xhi, ylo, yhi)``; each trajectory is an array of shape (k, 2).
    ``reference`` marks the target point.
    """
    xlo, xhi, ylo, yhi = (float(v) for v in box)
    xg = np.linspace(xlo, xhi, grid)
    yg = np.linspace(ylo, yhi, grid)
    F = np.array([[objective(np.array([a, b])) for a in xg] for b in yg])
    frame = _Frame(xlo, xhi, ylo, yhi)
    body = _axes(frame, xlabel, ylabel, title, ylog=False)
    level_values = np.quantile(F, np.linspace(0.05, 0.95, levels))
    for level in level_values:
        for (xa, ya), (xb, yb) in _contour_segments(xg, yg, F, level):
            body.append(
                f'<line x1="{_fmt(frame.px(xa))}" y1="{_fmt(frame.py(ya))}" '
                f'x2="{_fmt(frame.px(xb))}" y2="{_fmt(frame.py(yb))}" '
                f'stroke="#bbbbbb" stroke-width="0.8"/>'
            )
    for i, traj in enumerate(trajectories):
        pts = np.asarray(traj, dtype=float)
        body.append(_polyline(frame, pts[:, 0], pts[:, 1], PALETTE[i % len(PALETTE)]))
        body.append(
            f'<circle cx="{_fmt(frame.px(pts[0, 0]))}" cy="{_fmt(frame.py(pts[0, 1]))}" '
            f'r="3" fill="{PALETTE[i % len(PALETTE)]}"/>'
        )
    if reference is not None:
        rx, ry = frame.px(float(reference[0])), frame.py(float(reference[1]))
        body.append(
            f'<path d="M {_fmt(rx - 5)} {_fmt(ry)} L {_fmt(rx + 5)} {_fmt(ry)} '
            f'M {_fmt(rx)} {_fmt(ry - 5)} L {_fmt(rx)} {_fmt(ry + 5)}" '
            f'stroke="#000000" stroke-width="2"/>'
        )
    lx = WIDTH - MARGIN_R - 150
    ly = MARGIN_T + 12
    for i, label in enumerate(labels):
        color = PALETTE[i % len(PALETTE)]
        body.append(
            f'<line x1="{lx}" y1="{ly + 16 * i}" x2="{lx + 22}" y2="{ly + 16 * i}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        body.append(
            f'<text x="{lx + 28}" y="{ly + 16 * i + 4}" font-size="11" '
            f'fill="#333333">{label}</text>'
        )
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(_document(body))
