"""Dependency-free SVG rendering for the CLI's ``plot`` subcommand.

Charts are deterministic byte-for-byte for a given CSV: no timestamps, no
generated ids. Every data value appears verbatim as a text label so numbers
can be spot-checked against the source CSV.
"""

from __future__ import annotations

import csv
from pathlib import Path

WIDTH, HEIGHT = 720, 480
MARGIN_LEFT, MARGIN_RIGHT = 70, 20
MARGIN_TOP, MARGIN_BOTTOM = 40, 60


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or len(rows[0]) < 2:
        raise ValueError(f"{path}: need a header and at least one data row")
    header = rows[0]
    data = [row for row in rows[1:] if row]
    return header, data


def _scale(values, lo_px, hi_px, flip=False):
    lo, hi = min(values), max(values)
    span = hi - lo
    if span == 0:
        lo -= 0.5
        span = 1.0

    def to_px(v):
        frac = (v - lo) / span
        if flip:
            frac = 1.0 - frac
        return lo_px + frac * (hi_px - lo_px)

    return to_px, lo, hi


def _esc(text):
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def _frame(title, x_label, y_label, x_lo, x_hi, y_lo, y_hi):
    parts = [
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">'
        f"{_esc(title)}</text>",
        f'<line x1="{MARGIN_LEFT}" y1="{HEIGHT - MARGIN_BOTTOM}" '
        f'x2="{WIDTH - MARGIN_RIGHT}" y2="{HEIGHT - MARGIN_BOTTOM}" stroke="black"/>',
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" '
        f'x2="{MARGIN_LEFT}" y2="{HEIGHT - MARGIN_BOTTOM}" stroke="black"/>',
        f'<text x="{(MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2}" y="{HEIGHT - 15}" '
        f'text-anchor="middle" font-size="12">{_esc(x_label)}</text>',
        f'<text x="18" y="{(MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2}" '
        f'text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 18 {(MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2})">'
        f"{_esc(y_label)}</text>",
        f'<text x="{MARGIN_LEFT}" y="{HEIGHT - MARGIN_BOTTOM + 16}" '
        f'font-size="10">{x_lo:g}</text>',
        f'<text x="{WIDTH - MARGIN_RIGHT}" y="{HEIGHT - MARGIN_BOTTOM + 16}" '
        f'text-anchor="end" font-size="10">{x_hi:g}</text>',
        f'<text x="{MARGIN_LEFT - 6}" y="{HEIGHT - MARGIN_BOTTOM}" '
        f'text-anchor="end" font-size="10">{y_lo:g}</text>',
        f'<text x="{MARGIN_LEFT - 6}" y="{MARGIN_TOP + 10}" '
        f'text-anchor="end" font-size="10">{y_hi:g}</text>',
    ]
    return parts


def render_line(header, data, title=""):
    """Polyline of column 1 vs column 2, each point labeled with its raw text."""
    xs = [float(row[0]) for row in data]
    ys = [float(row[1]) for row in data]
    to_x, x_lo, x_hi = _scale(xs, MARGIN_LEFT, WIDTH - MARGIN_RIGHT)
    to_y, y_lo, y_hi = _scale(ys, MARGIN_TOP, HEIGHT - MARGIN_BOTTOM, flip=True)
    parts = _frame(title or f"{header[1]} vs {header[0]}", header[0], header[1],
                   x_lo, x_hi, y_lo, y_hi)
    points = " ".join(f"{to_x(x):.2f},{to_y(y):.2f}" for x, y in zip(xs, ys))
    parts.append(f'<polyline points="{points}" fill="none" stroke="#1f6fb2" '
                 'stroke-width="1.5"/>')
    for row, x, y in zip(data, xs, ys):
        parts.append(f'<circle cx="{to_x(x):.2f}" cy="{to_y(y):.2f}" r="2" '
                     'fill="#1f6fb2"/>')
        parts.append(f'<text x="{to_x(x):.2f}" y="{to_y(y) - 4:.2f}" '
                     f'font-size="6" text-anchor="middle">'
                     f"{_esc(row[0])},{_esc(row[1])}</text>")
    return _document(parts)


def render_bar(header, data, title=""):
    """Bars of column 2 per category in column 1, labeled with raw values."""
    ys = [float(row[1]) for row in data]
    to_y, y_lo, y_hi = _scale([0.0, *ys], MARGIN_TOP, HEIGHT - MARGIN_BOTTOM,
                              flip=True)
    parts = _frame(title or f"{header[1]} per {header[0]}", header[0], header[1],
                   0, len(data) - 1, y_lo, y_hi)
    base = to_y(0.0)
    slot = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / max(len(data), 1)
    bar_w = max(slot * 0.7, 1.0)
    for i, (row, y) in enumerate(zip(data, ys)):
        x0 = MARGIN_LEFT + i * slot + (slot - bar_w) / 2
        y0 = min(to_y(y), base)
        h = abs(base - to_y(y))
        parts.append(f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{bar_w:.2f}" '
                     f'height="{h:.2f}" fill="#d1722f"/>')
        parts.append(f'<text x="{x0 + bar_w / 2:.2f}" y="{y0 - 4:.2f}" '
                     f'font-size="7" text-anchor="middle">'
                     f"{_esc(row[0])}:{_esc(row[1])}</text>")
    return _document(parts)


def _document(parts):
    body = "\n".join(f"  {p}" for p in parts)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">\n{body}\n</svg>\n')


def plot_csv(csv_path, out_path, kind="line", title=""):
    header, data = read_csv(csv_path)
    if kind == "line":
        svg = render_line(header, data, title)
    elif kind == "bar":
        svg = render_bar(header, data, title)
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    Path(out_path).write_text(svg)
