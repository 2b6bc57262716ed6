"""Minimal hand-emitted SVG output: mesh drawings, log-log charts, histograms."""
from __future__ import annotations

import math
from pathlib import Path

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _svg_document(width: int, height: int, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )
    return "\n".join([head] + body + ["</svg>"]) + "\n"


def _metric_color(value: float) -> str:
    """Blue (0) to red (1) ramp for per-element metric coloring."""
    t = min(1.0, max(0.0, value))
    r = int(40 + 215 * t)
    b = int(255 - 215 * t)
    return f"rgb({r},60,{b})"


def polygons_svg(loops, path, values=None, size: int = 640, title: str | None = None) -> None:
    """Draw closed polygon outlines; `values` in [0,1] optionally fill them.

    `loops` is an iterable of (n, 2) coordinate sequences.
    """
    loops = [[(float(x), float(y)) for x, y in loop] for loop in loops]
    xs = [x for loop in loops for x, _ in loop]
    ys = [y for loop in loops for _, y in loop]
    lo = (min(xs), min(ys))
    span = max(max(xs) - lo[0], max(ys) - lo[1]) or 1.0
    pad = 10
    scale = (size - 2 * pad) / span

    def sx(x):
        return pad + (x - lo[0]) * scale

    def sy(y):
        return size - pad - (y - lo[1]) * scale

    body = [f'<rect width="{size}" height="{size}" fill="white"/>']
    if title:
        body.append(f'<text x="{pad}" y="{pad + 4}" font-size="12">{title}</text>')
    for i, loop in enumerate(loops):
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in loop)
        fill = _metric_color(values[i]) if values is not None else "none"
        body.append(
            f'<polygon points="{pts}" fill="{fill}" stroke="black" stroke-width="0.6"/>'
        )
    Path(path).write_text(_svg_document(size, size, body))


def _log_ticks(lo: float, hi: float) -> list[float]:
    first = math.floor(math.log10(lo))
    last = math.ceil(math.log10(hi))
    return [10.0**k for k in range(first, last + 1)]


def loglog_svg(
    series: dict[str, tuple[list, list]],
    path,
    xlabel: str = "x",
    ylabel: str = "y",
    title: str | None = None,
    width: int = 640,
    height: int = 480,
) -> None:
    """Log-log chart: one polyline with markers per named series."""
    all_x = [x for xs, _ in series.values() for x in xs]
    all_y = [y for _, ys in series.values() for y in ys]
    if not all_x or min(all_x) <= 0 or min(all_y) <= 0:
        raise ValueError("log-log plot needs positive data")
    lx0, lx1 = math.log10(min(all_x)), math.log10(max(all_x))
    ly0, ly1 = math.log10(min(all_y)), math.log10(max(all_y))
    lx0, lx1 = lx0 - 0.05 * (lx1 - lx0 + 1e-9), lx1 + 0.05 * (lx1 - lx0 + 1e-9)
    ly0, ly1 = ly0 - 0.05 * (ly1 - ly0 + 1e-9), ly1 + 0.05 * (ly1 - ly0 + 1e-9)
    ml, mr, mt, mb = 70, 20, 30, 50

    def sx(x):
        return ml + (math.log10(x) - lx0) / (lx1 - lx0) * (width - ml - mr)

    def sy(y):
        return height - mb - (math.log10(y) - ly0) / (ly1 - ly0) * (height - mt - mb)

    body = [f'<rect width="{width}" height="{height}" fill="white"/>']
    body.append(
        f'<rect x="{ml}" y="{mt}" width="{width - ml - mr}" height="{height - mt - mb}" '
        'fill="none" stroke="black"/>'
    )
    for t in _log_ticks(10**lx0, 10**lx1):
        if not (10**lx0 <= t <= 10**lx1):
            continue
        x = sx(t)
        body.append(
            f'<line x1="{x:.1f}" y1="{mt}" x2="{x:.1f}" y2="{height - mb}" '
            'stroke="#cccccc" stroke-width="0.5"/>'
        )
        body.append(
            f'<text x="{x:.1f}" y="{height - mb + 16}" font-size="11" '
            f'text-anchor="middle">1e{int(round(math.log10(t)))}</text>'
        )
    for t in _log_ticks(10**ly0, 10**ly1):
        if not (10**ly0 <= t <= 10**ly1):
            continue
        y = sy(t)
        body.append(
            f'<line x1="{ml}" y1="{y:.1f}" x2="{width - mr}" y2="{y:.1f}" '
            'stroke="#cccccc" stroke-width="0.5"/>'
        )
        body.append(
            f'<text x="{ml - 6}" y="{y + 4:.1f}" font-size="11" '
            f'text-anchor="end">1e{int(round(math.log10(t)))}</text>'
        )
    for i, (name, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        body.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        for x, y in zip(xs, ys):
            body.append(
                f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>'
            )
        body.append(
            f'<rect x="{ml + 10}" y="{mt + 8 + 16 * i}" width="12" height="4" fill="{color}"/>'
        )
        body.append(
            f'<text x="{ml + 28}" y="{mt + 14 + 16 * i}" font-size="11">{name}</text>'
        )
    body.append(
        f'<text x="{(ml + width - mr) / 2}" y="{height - 12}" font-size="12" '
        f'text-anchor="middle">{xlabel}</text>'
    )
    body.append(
        f'<text x="16" y="{(mt + height - mb) / 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 16 {(mt + height - mb) / 2})">{ylabel}</text>'
    )
    if title:
        body.append(
            f'<text x="{(ml + width - mr) / 2}" y="18" font-size="13" '
            f'text-anchor="middle">{title}</text>'
        )
    Path(path).write_text(_svg_document(width, height, body))


def histograms_svg(
    histograms: dict[str, "list[int]"],
    path,
    panel_width: int = 300,
    panel_height: int = 150,
) -> None:
    """One bar-chart panel per named histogram (bins assumed on [0, 1])."""
    names = list(histograms)
    cols = 2
    rows = -(-len(names) // cols)
    width = cols * (panel_width + 20) + 20
    height = rows * (panel_height + 40) + 20
    body = [f'<rect width="{width}" height="{height}" fill="white"/>']
    for idx, name in enumerate(names):
        hist = list(histograms[name])
        r, c = divmod(idx, cols)
        ox = 20 + c * (panel_width + 20)
        oy = 20 + r * (panel_height + 40)
        peak = max(hist) or 1
        body.append(
            f'<text x="{ox + panel_width / 2}" y="{oy - 4}" font-size="12" '
            f'text-anchor="middle">{name}</text>'
        )
        body.append(
            f'<rect x="{ox}" y="{oy}" width="{panel_width}" height="{panel_height}" '
            'fill="none" stroke="black" stroke-width="0.6"/>'
        )
        bw = panel_width / len(hist)
        for b, count in enumerate(hist):
            bh = panel_height * count / peak
            body.append(
                f'<rect x="{ox + b * bw:.1f}" y="{oy + panel_height - bh:.1f}" '
                f'width="{bw:.1f}" height="{bh:.1f}" fill="{PALETTE[0]}" '
                'stroke="white" stroke-width="0.4"/>'
            )
        body.append(
            f'<text x="{ox}" y="{oy + panel_height + 14}" font-size="10">0</text>'
        )
        body.append(
            f'<text x="{ox + panel_width}" y="{oy + panel_height + 14}" font-size="10" '
            'text-anchor="end">1</text>'
        )
    Path(path).write_text(_svg_document(width, height, body))
