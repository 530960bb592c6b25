"""Deterministic serialization helpers for CLI outputs.

Floats are always rendered with 17 significant digits in scientific
notation so identical runs produce byte-identical CSV and JSON files and
values round-trip exactly through text.
"""

from __future__ import annotations

import os
import tempfile
from fractions import Fraction

import numpy as np

from .errors import UsageError


def fmt17(x: float) -> str:
    """17-significant-digit scientific rendering, '.' decimal separator."""
    return f"{float(x):.16e}"


def _cell_text(v) -> str:
    if isinstance(v, bool):
        raise UsageError("booleans do not belong in CSV cells")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt17(v)
    if isinstance(v, Fraction):
        return str(v)
    return str(v)


def render_csv(header: list, rows: list) -> str:
    lines = [",".join(str(h) for h in header)]
    for row in rows:
        lines.append(",".join(_cell_text(v) for v in row))
    return "\n".join(lines) + "\n"


def _json_fragment(obj, out: list, indent: int, level: int) -> None:
    pad = " " * (indent * (level + 1))
    closing = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isfinite(x):
            out.append(fmt17(x))
        else:
            out.append('"inf"' if x > 0 else ('"-inf"' if x < 0 else '"nan"'))
    elif isinstance(obj, Fraction):
        out.append(f'"{obj}"')
    elif isinstance(obj, str):
        escaped = obj.replace("\\", "\\\\").replace('"', '\\"')
        escaped = escaped.replace("\n", "\\n").replace("\t", "\\t")
        out.append(f'"{escaped}"')
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(f'{pad}"{k}": ')
            _json_fragment(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(closing + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(np.asarray(obj).tolist()) if isinstance(obj, np.ndarray) else list(obj)
        if not seq:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(seq):
            out.append(pad)
            _json_fragment(v, out, indent, level + 1)
            out.append(",\n" if i < len(seq) - 1 else "\n")
        out.append(closing + "]")
    else:
        raise UsageError(f"cannot serialize {type(obj).__name__} to JSON")


def render_json(obj, indent: int = 2) -> str:
    """JSON text with floats as fmt17 numbers and stable key order."""
    out: list = []
    _json_fragment(obj, out, indent, 0)
    return "".join(out) + "\n"


def atomic_write_text(path: str, text: str) -> str:
    """Write text to path through a same-directory temp file + rename."""
    path = os.path.abspath(path)
    d = os.path.dirname(path)
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path: str, header: list, rows: list) -> str:
    return atomic_write_text(path, render_csv(header, rows))


def write_json(path: str, obj, indent: int = 2) -> str:
    return atomic_write_text(path, render_json(obj, indent))


def manifest_path(out_path: str) -> str:
    return str(out_path) + ".manifest.json"


def write_manifest(out_path: str, config: dict, wall_seconds: float,
                   status: str = "ok", error: str | None = None) -> str:
    """Record the resolved config, library versions and wall time."""
    import platform

    import scipy

    try:
        from importlib.metadata import version
        pkg_version = version("artifact")
    except Exception:
        pkg_version = "unknown"
    doc = {
        "config": config,
        "versions": {
            "artifact": pkg_version,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wall_seconds": wall_seconds,
        "status": status,
    }
    if error is not None:
        doc["error"] = error
    return write_json(manifest_path(out_path), doc)
