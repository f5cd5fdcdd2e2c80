"""Run reports in JSON and plain text.

The text form is generated from the JSON-ready dictionary, so both carry the
same numbers; floats are printed with 10 significant digits in both.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

FLOAT_FMT = "{:.10g}"


def to_jsonable(obj: Any):
    """Recursively convert numpy scalars/arrays, tuples and complex numbers."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items() if not str(k).startswith("_")}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_round(obj.real), _round(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return _round(obj)
    return obj


def _round(x) -> float:
    x = float(x)
    if not np.isfinite(x):
        return x
    return float(FLOAT_FMT.format(x))


def render_text(data: dict, indent: int = 0) -> str:
    lines = []
    pad = "  " * indent
    for k, v in data.items():
        if isinstance(v, dict):
            lines.append(f"{pad}{k}:")
            lines.append(render_text(v, indent + 1))
        elif isinstance(v, list) and v and isinstance(v[0], dict):
            lines.append(f"{pad}{k}:")
            for i, item in enumerate(v):
                lines.append(f"{pad}  [{i}]")
                lines.append(render_text(item, indent + 2))
        else:
            lines.append(f"{pad}{k}: {_fmt(v)}")
    return "\n".join(l for l in lines if l)


def _fmt(v) -> str:
    if isinstance(v, float):
        return FLOAT_FMT.format(v)
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def write_report(out_dir, data: dict, name: str = "report") -> dict:
    """Write ``<name>.json`` and ``<name>.txt``; returns the JSON-ready dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    clean = to_jsonable(data)
    (out / f"{name}.json").write_text(json.dumps(clean, indent=2, sort_keys=False) + "\n")
    (out / f"{name}.txt").write_text(render_text(clean) + "\n")
    return clean
