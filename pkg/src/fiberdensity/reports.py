"""Deterministic report serialization: JSON, CSV and plot-ready .dat tables.

Floats are printed with 17 significant digits so every value round-trips
exactly and re-running a configuration reproduces output files byte for byte.
Infinities serialize as ``Infinity`` / ``-Infinity`` (accepted back by
``json.loads``).
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np


def format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(float(x), ".17g")


def _dump(value, out: list[str]) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, str):
        out.append(json.dumps(value))
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        out.append(format_float(float(value)))
    elif isinstance(value, dict):
        out.append("{")
        for i, (k, v) in enumerate(value.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(str(k)))
            out.append(": ")
            _dump(v, out)
        out.append("}")
    elif isinstance(value, (list, tuple, np.ndarray)):
        seq = value.tolist() if isinstance(value, np.ndarray) else value
        out.append("[")
        for i, v in enumerate(seq):
            if i:
                out.append(", ")
            _dump(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(value)!r}")


def dump_json(value) -> str:
    """Serialize to JSON with stable formatting (insertion-ordered keys)."""
    out: list[str] = []
    _dump(value, out)
    return "".join(out)


def write_json(value, path) -> None:
    Path(path).write_text(dump_json(value) + "\n", encoding="utf-8")


def _format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format_float(float(v))
    return str(v)


def write_table(path, header: list[str], rows, sep: str = ",") -> None:
    """CSV when sep is ','; whitespace-separated .dat otherwise."""
    lines = [sep.join(header)]
    if sep != ",":
        lines[0] = "# " + lines[0]
    for row in rows:
        lines.append(sep.join(_format_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def curve_rows(curves) -> list[tuple]:
    """Rows (method, t, r, value, stderr, reliable) for a list of DensityCurve."""
    rows = []
    for curve in curves:
        for s in curve.samples:
            rows.append((curve.method, curve.t, s.r, s.value, s.stderr, s.reliable))
    return rows


CURVE_HEADER = ["method", "t", "r", "value", "stderr", "reliable"]
ENVELOPE_HEADER = ["r", "bin_center", "min_nu"]
PROFILE_HEADER = ["t", "theta", "stderr"]
RUGOSITY_HEADER = ["r", "max_ratio"]


def emit_tables(out_dir, tables: dict[str, tuple[list[str], list]]) -> list[str]:
    """Write each named table as tables/<name>.csv and plots/<name>.dat."""
    out_dir = Path(out_dir)
    (out_dir / "tables").mkdir(parents=True, exist_ok=True)
    (out_dir / "plots").mkdir(parents=True, exist_ok=True)
    written = []
    for name, (header, rows) in tables.items():
        csv_path = out_dir / "tables" / f"{name}.csv"
        dat_path = out_dir / "plots" / f"{name}.dat"
        write_table(csv_path, header, rows, sep=",")
        write_table(dat_path, header, rows, sep=" ")
        written.extend([str(csv_path), str(dat_path)])
    return written
