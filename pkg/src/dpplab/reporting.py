"""Deterministic report and series serialization.

Reports are JSON with every float rendered at 17 significant digits (exact
binary round trip); series are RFC-4180 CSV.  Wall-clock times and other
nondeterministic fields go to a sidecar meta file so that identical
config + seed reproduces report.json and series.csv byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time

import numpy as np

__all__ = ["format_float", "render_json", "write_report"]


def format_float(x: float) -> str:
    x = float(x)
    if np.isnan(x):
        return '"nan"'
    if np.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = format(x, ".17g")
    return s


def _render(obj, out: list, indent: int):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for i, (k, v) in enumerate(items):
            out.append(f'{pad}  {json.dumps(str(k))}: ')
            _render(v, out, indent + 1)
            out.append(",\n" if i + 1 < len(items) else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad + "  ")
            _render(v, out, indent + 1)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(pad + "]")
    elif isinstance(obj, bool) or isinstance(obj, np.bool_):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(float(obj)))
    elif obj is None:
        out.append("null")
    elif isinstance(obj, np.ndarray):
        _render(obj.tolist(), out, indent)
    else:
        out.append(json.dumps(str(obj)))


def render_json(obj) -> str:
    out: list[str] = []
    _render(obj, out, 0)
    return "".join(out) + "\n"


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        s = format_float(float(v))
        return s.strip('"')
    return str(v)


def write_report(outdir: str, report: dict, series_header=None, series_rows=None,
                 wall_time: float | None = None) -> None:
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "report.json"), "w", newline="") as fh:
        fh.write(render_json(report))
    if series_header is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(series_header)
        for row in series_rows or []:
            w.writerow([_cell(v) for v in row])
        with open(os.path.join(outdir, "series.csv"), "w", newline="") as fh:
            fh.write(buf.getvalue())
    meta = {"wall_time_s": wall_time, "written_at": time.strftime("%Y-%m-%dT%H:%M:%S")}
    with open(os.path.join(outdir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
