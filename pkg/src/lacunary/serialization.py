"""Canonical JSON: sorted keys, floats with 17 significant digits.

Identical objects always produce identical bytes, so content hashes of the
text are usable as ids.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if "." not in s and "e" not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj, out: list, indent, level):
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append("null" if obj is None else ("true" if obj else "false"))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        pad, inner = _pads(indent, level)
        out.append("{")
        for n, (k, v) in enumerate(items):
            if n:
                out.append(",")
            out.append(inner + json.dumps(str(k), ensure_ascii=False) + (": " if indent else ":"))
            _encode(v, out, indent, level + 1)
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not seq:
            out.append("[]")
            return
        # numeric rows stay on one line
        flat = all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq)
        pad, inner = _pads(indent, level)
        out.append("[")
        for n, v in enumerate(seq):
            if n:
                out.append(", " if flat and indent else ",")
            if not flat:
                out.append(inner)
            _encode(v, out, indent, level + 1)
        out.append("]" if flat else pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _pads(indent, level):
    if not indent:
        return "", ""
    return "\n" + " " * (indent * level), "\n" + " " * (indent * (level + 1))


def dumps(obj, indent: int | None = 2) -> str:
    out: list[str] = []
    _encode(obj, out, indent, 0)
    return "".join(out)


def content_hash(obj) -> str:
    return hashlib.sha256(dumps(obj, indent=None).encode()).hexdigest()


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
