"""Deterministic JSON/CSV/SVG writers.

Floats are written with 17 significant digits so doubles round-trip exactly.
Non-finite floats become the JSON strings ``"inf"``, ``"-inf"`` and ``"nan"``
(strict JSON has no literal for them); in CSV they are written the same way
and parse back with ``float()``. ``None`` is an empty CSV field.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    obj = _plain(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if math.isfinite(obj):
            return fmt_float(obj)
        return json.dumps(fmt_float(obj))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(_plain(v), (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def _cell(v) -> str:
    v = _plain(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return fmt_float(v)
    return str(v)


def write_csv(path: str | Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    Path(path).write_text(buf.getvalue())


def sweep_svg(betas, series: dict[str, list[float]], width: int = 640, height: int = 400) -> str:
    """Line chart of each series against log10(beta), one shared y axis."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    left, right, top, bottom = 70, 170, 30, 50
    pw, ph = width - left - right, height - top - bottom
    xs = [math.log10(b) for b in betas]
    ys = [v for vals in series.values() for v in vals if math.isfinite(v)]
    x0, x1 = min(xs), max(xs)
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for b, x in zip(betas, xs):
        out.append(f'<line x1="{px(x):.3f}" y1="{top + ph}" x2="{px(x):.3f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(x):.3f}" y="{top + ph + 20}" font-size="11" text-anchor="middle">{b:g}</text>')
    for y in (y0, (y0 + y1) / 2, y1):
        out.append(f'<text x="{left - 8}" y="{py(y) + 4:.3f}" font-size="11" text-anchor="end">{y:.3g}</text>')
    out.append(f'<text x="{left + pw / 2:.3f}" y="{height - 10}" font-size="12" text-anchor="middle">beta (log scale)</text>')
    for k, (name, vals) in enumerate(series.items()):
        color = colors[k % len(colors)]
        pts = " ".join(f"{px(x):.3f},{py(v):.3f}" for x, v in zip(xs, vals) if math.isfinite(v))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, v in zip(xs, vals):
            if math.isfinite(v):
                out.append(f'<circle cx="{px(x):.3f}" cy="{py(v):.3f}" r="3" fill="{color}"/>')
        ly = top + 20 * k + 10
        out.append(f'<line x1="{left + pw + 15}" y1="{ly}" x2="{left + pw + 35}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 40}" y="{ly + 4}" font-size="12">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
