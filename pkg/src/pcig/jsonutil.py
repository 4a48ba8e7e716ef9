"""Canonical JSON formatting shared by plan and request serializers.

Canonical form: UTF-8, 2-space indent, object keys sorted lexicographically,
floats printed with exactly 6 fractional digits, strings ASCII-escaped.
Byte-equal output for equal input is the point; ``json.dumps`` cannot pin
float formatting, hence the hand-rolled emitter.
"""

from __future__ import annotations

import json
import math
from typing import Any


def format_fraction(value: float) -> str:
    """Render a float with exactly 6 fractional digits."""
    if not math.isfinite(value):
        raise ValueError(f"cannot canonically format non-finite float {value!r}")
    text = f"{value:.6f}"
    if text == "-0.000000":
        text = "0.000000"
    return text


def quantize(value: float) -> float:
    """Snap a float to the 6-decimal grid used by the canonical format."""
    return float(format_fraction(value))


def canonical_dumps(value: Any) -> str:
    """Serialize nested dict/list/str/int/float/bool/None canonically."""
    out: list[str] = []
    _emit(value, out, 0)
    out.append("\n")
    return "".join(out)


def canonical_dump_bytes(value: Any) -> bytes:
    return canonical_dumps(value).encode("utf-8")


def _emit(value: Any, out: list[str], depth: int) -> None:
    pad = "  " * depth
    inner = "  " * (depth + 1)
    if value is None or value is True or value is False:
        out.append(json.dumps(value))
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=True))
    elif isinstance(value, bool):  # pragma: no cover - caught by the first branch
        out.append(json.dumps(value))
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        out.append(format_fraction(value))
    elif isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(value.keys())
        for i, key in enumerate(keys):
            if not isinstance(key, str):
                raise TypeError(f"canonical JSON requires string keys, got {key!r}")
            out.append(inner)
            out.append(json.dumps(key, ensure_ascii=True))
            out.append(": ")
            _emit(value[key], out, depth + 1)
            out.append(",\n" if i < len(keys) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(value, (list, tuple)):
        if not value:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(value):
            out.append(inner)
            _emit(item, out, depth + 1)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(pad + "]")
    else:
        raise TypeError(f"cannot canonically serialize {type(value).__name__}")
