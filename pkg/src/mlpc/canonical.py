"""Byte-stable JSON rendering.

Golden-file tests and cross-run reproducibility require that structurally
identical data always serializes to identical bytes.  The stdlib ``json``
module almost provides this, but its float rendering follows ``repr`` (shortest
round-trip form), which varies in digit count.  Here every float is rendered
with exactly six decimal places and every ``Fraction`` as an exact
``[numerator, denominator]`` pair, so no tolerance question ever leaks into a
serialized artifact.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Any


def format_float(value: float) -> str:
    """Render a float with fixed 6-decimal formatting (``-0.0`` normalized)."""
    if not math.isfinite(value):
        raise ValueError(f"non-finite float not representable: {value!r}")
    if value == 0.0:
        value = 0.0
    return f"{value:.6f}"


def _render(value: Any, out: list[str], indent: int | None, level: int) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, Fraction):
        _render([value.numerator, value.denominator], out, indent, level)
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        out.append(format_float(value))
    elif isinstance(value, str):
        out.append(_escape(value))
    elif isinstance(value, (list, tuple)):
        _render_seq(list(value), out, indent, level)
    elif isinstance(value, dict):
        _render_map(value, out, indent, level)
    else:
        raise TypeError(f"cannot canonically serialize {type(value).__name__}")


_ESCAPES = {'"': '\\"', "\\": "\\\\", "\n": "\\n", "\r": "\\r", "\t": "\\t",
            "\b": "\\b", "\f": "\\f"}


def _escape(s: str) -> str:
    parts = ['"']
    for ch in s:
        if ch in _ESCAPES:
            parts.append(_ESCAPES[ch])
        elif ord(ch) < 0x20:
            parts.append(f"\\u{ord(ch):04x}")
        else:
            parts.append(ch)
    parts.append('"')
    return "".join(parts)


def _render_seq(items: list, out: list[str], indent: int | None, level: int) -> None:
    if not items:
        out.append("[]")
        return
    if indent is None:
        out.append("[")
        for i, item in enumerate(items):
            if i:
                out.append(",")
            _render(item, out, None, level)
        out.append("]")
        return
    pad = " " * (indent * (level + 1))
    out.append("[\n")
    for i, item in enumerate(items):
        if i:
            out.append(",\n")
        out.append(pad)
        _render(item, out, indent, level + 1)
    out.append("\n" + " " * (indent * level) + "]")


def _render_map(mapping: dict, out: list[str], indent: int | None, level: int) -> None:
    keys = sorted(mapping)
    for key in keys:
        if not isinstance(key, str):
            raise TypeError(f"canonical JSON object keys must be strings, got {key!r}")
    if not keys:
        out.append("{}")
        return
    if indent is None:
        out.append("{")
        for i, key in enumerate(keys):
            if i:
                out.append(",")
            out.append(_escape(key))
            out.append(":")
            _render(mapping[key], out, None, level)
        out.append("}")
        return
    pad = " " * (indent * (level + 1))
    out.append("{\n")
    for i, key in enumerate(keys):
        if i:
            out.append(",\n")
        out.append(pad)
        out.append(_escape(key))
        out.append(": ")
        _render(mapping[key], out, indent, level + 1)
    out.append("\n" + " " * (indent * level) + "}")


def canonical_json(value: Any, *, indent: int | None = None) -> str:
    """Serialize ``value`` to a deterministic JSON string.

    Keys are sorted, floats use fixed 6-decimal formatting, ``Fraction``
    values become exact ``[num, den]`` pairs.  ``indent=None`` yields the
    compact single-line form used for JSONL records.
    """
    out: list[str] = []
    _render(value, out, indent, 0)
    return "".join(out)


def canonical_json_line(value: Any) -> str:
    """Compact canonical JSON, newline-terminated, for JSONL output."""
    return canonical_json(value) + "\n"
