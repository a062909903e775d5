"""Static SVG line charts, written by hand (no plotting dependency)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    dashed: bool = False
    markers: bool = False


@dataclass
class Panel:
    title: str
    xlabel: str
    ylabel: str
    logy: bool = False
    series: list[Series] = field(default_factory=list)

    def add(self, label, x, y, *, dashed=False, markers=False) -> "Panel":
        self.series.append(Series(label, np.asarray(x, float), np.asarray(y, float), dashed, markers))
        return self


def _nice_ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(count - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _fmt(v: float, log: bool) -> str:
    if log:
        return f"1e{int(round(v))}"
    return f"{v:g}"


def _render_panel(p: Panel, x0: float, y0: float, w: float, h: float) -> list[str]:
    ml, mr, mt, mb = 70, 150, 30, 45
    pw, ph = w - ml - mr, h - mt - mb
    out = [f'<text x="{x0 + ml + pw / 2:.1f}" y="{y0 + 18:.1f}" text-anchor="middle" font-size="14">{escape(p.title)}</text>']

    xs, ys = [], []
    for s in p.series:
        y = s.y
        keep = np.isfinite(s.x) & np.isfinite(y)
        if p.logy:
            keep &= y > 0
        xs.append(s.x[keep])
        ys.append(np.log10(y[keep]) if p.logy else y[keep])
    allx = np.concatenate(xs) if xs else np.array([])
    ally = np.concatenate(ys) if ys else np.array([])
    if allx.size == 0:
        out.append(f'<text x="{x0 + w / 2:.1f}" y="{y0 + h / 2:.1f}" text-anchor="middle">no data</text>')
        return out
    xlo, xhi = float(allx.min()), float(allx.max())
    ylo, yhi = float(ally.min()), float(ally.max())
    if p.logy:
        ylo, yhi = math.floor(ylo), math.ceil(yhi)
        if yhi == ylo:
            yhi = ylo + 1
    else:
        pad = 0.05 * (yhi - ylo) if yhi > ylo else 1.0
        ylo, yhi = ylo - pad, yhi + pad
    if xhi == xlo:
        xlo, xhi = xlo - 1, xhi + 1

    def px(v):
        return x0 + ml + (v - xlo) / (xhi - xlo) * pw

    def py(v):
        return y0 + mt + (yhi - v) / (yhi - ylo) * ph

    out.append(f'<rect x="{x0 + ml}" y="{y0 + mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>')
    for tx in _nice_ticks(xlo, xhi):
        X = px(tx)
        out.append(f'<line x1="{X:.1f}" y1="{y0 + mt + ph}" x2="{X:.1f}" y2="{y0 + mt + ph + 5}" stroke="#444"/>')
        out.append(f'<text x="{X:.1f}" y="{y0 + mt + ph + 18}" text-anchor="middle" font-size="11">{_fmt(tx, False)}</text>')
    yt = [float(v) for v in range(int(ylo), int(yhi) + 1)] if p.logy else _nice_ticks(ylo, yhi)
    if p.logy and len(yt) > 9:
        stride = math.ceil(len(yt) / 8)
        yt = yt[::stride]
    for ty in yt:
        Y = py(ty)
        out.append(f'<line x1="{x0 + ml - 5}" y1="{Y:.1f}" x2="{x0 + ml + pw}" y2="{Y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{x0 + ml - 8}" y="{Y + 4:.1f}" text-anchor="end" font-size="11">{_fmt(ty, p.logy)}</text>')
    out.append(f'<text x="{x0 + ml + pw / 2:.1f}" y="{y0 + h - 8:.1f}" text-anchor="middle" font-size="12">{escape(p.xlabel)}</text>')
    out.append(
        f'<text x="{x0 + 16}" y="{y0 + mt + ph / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 {x0 + 16} {y0 + mt + ph / 2:.1f})">{escape(p.ylabel)}</text>'
    )

    for i, (s, x, y) in enumerate(zip(p.series, xs, ys)):
        color = PALETTE[i % len(PALETTE)]
        if x.size:
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
            dash = ' stroke-dasharray="6,4"' if s.dashed else ""
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
            if s.markers:
                out.extend(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="{color}"/>' for a, b in zip(x, y))
        ly = y0 + mt + 10 + 18 * i
        lx = x0 + ml + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 28}" y="{ly + 4}" font-size="11">{escape(s.label)}</text>')
    return out


def render(panels: Sequence[Panel], width: int = 760, panel_height: int = 360) -> str:
    """Stack ``panels`` vertically into one SVG document."""
    height = panel_height * len(panels)
    body = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for i, p in enumerate(panels):
        body.extend(_render_panel(p, 0, i * panel_height, width, panel_height))
    body.append("</svg>")
    return "\n".join(body) + "\n"


def error_vs_K(cells: Sequence[dict], title: str = "global error") -> str:
    """Log-scale global error against K, one line per n.

    ``cells`` are sweep rows with keys ``n``, ``K`` and ``global_error``
    (None for failed cells, which are left out).
    """
    panel = Panel(title, "K", "infinity-norm error", logy=True)
    for n in sorted({c["n"] for c in cells}):
        row = sorted((c["K"], c["global_error"]) for c in cells if c["n"] == n and c.get("global_error") is not None)
        if row:
            K, err = zip(*row)
            panel.add(f"n = {n}", K, err, markers=True)
    return render([panel])


def solution_overlay(t, numeric, exact: Optional[np.ndarray] = None, title: str = "solution") -> str:
    """Numerical curve, the analytic one when given, and then an absolute-error panel."""
    t = np.asarray(t, float)
    top = Panel(title, "t", "x(t)").add("numerical", t, numeric)
    panels = [top]
    if exact is not None:
        top.add("analytic", t, exact, dashed=True)
        err = np.abs(np.asarray(numeric, float) - np.asarray(exact, float))
        panels.append(Panel("absolute error", "t", "|error|", logy=True).add("error", t, err))
    return render(panels)
