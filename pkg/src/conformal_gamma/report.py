"""Deterministic report files: JSON, versioned CSV and small SVG line plots.

Every file is written to a temporary sibling and renamed into place, so
readers never see a partial file.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

CSV_VERSION = 1


def atomic_write(path, data: str | bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": "", "encoding": "utf-8"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings "inf", "-inf", "nan"."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    atomic_write(path, dumps(obj))


def csv_text(columns, rows, kind: str) -> str:
    buf = io.StringIO()
    buf.write(f"# conformal-gamma {kind} table, csv format v{CSV_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path, columns, rows, kind: str):
    atomic_write(path, csv_text(columns, rows, kind))


def svg_lines(series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
              hlines: dict | None = None, width: int = 480, height: int = 320) -> str:
    """Line plot of ``{label: (xs, ys)}`` with optional horizontal reference lines."""
    pad = 48
    xs_all = np.concatenate([np.asarray(v[0], float) for v in series.values()])
    ys_all = np.concatenate([np.asarray(v[1], float) for v in series.values()]
                            + [np.asarray(list((hlines or {}).values()), float)])
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = float(ys_all.min()), float(ys_all.max())
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    sx = lambda x: pad + (x - x0) / (x1 - x0) * (width - 2 * pad)  # noqa: E731
    sy = lambda y: height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)  # noqa: E731
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
           f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 14 {height / 2:.1f})">{escape(ylabel)}</text>',
           f'<text x="{pad - 4}" y="{height - pad + 4}" text-anchor="end" font-size="10">{y0:.4g}</text>',
           f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end" font-size="10">{y1:.4g}</text>',
           f'<text x="{pad}" y="{height - pad + 14}" text-anchor="middle" font-size="10">{x0:.4g}</text>',
           f'<text x="{width - pad}" y="{height - pad + 14}" text-anchor="middle" font-size="10">{x1:.4g}</text>']
    for k, (label, y) in enumerate(sorted((hlines or {}).items())):
        out.append(f'<line x1="{pad}" y1="{sy(y):.2f}" x2="{width - pad}" y2="{sy(y):.2f}" '
                   f'stroke="gray" stroke-dasharray="4 3"/>')
        out.append(f'<text x="{width - pad}" y="{sy(y) - 3:.2f}" text-anchor="end" font-size="10">'
                   f'{escape(label)}</text>')
    for k, (label, (xs, ys)) in enumerate(series.items()):
        c = colors[k % len(colors)]
        pts = " ".join(f"{sx(float(a)):.2f},{sy(float(b)):.2f}" for a, b in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        out.append(f'<text x="{pad + 6}" y="{pad + 14 * (k + 1)}" font-size="11" fill="{c}">{escape(label)}</text>')
    out.append("</svg>\n")
    return "\n".join(out)


def write_svg(path, text: str):
    atomic_write(path, text)
