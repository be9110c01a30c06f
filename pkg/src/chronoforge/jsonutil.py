"""Canonical JSON emission.

All JSON artifacts (metadata, feature lists, provenance, models) are
emitted with sorted keys, 2-space indent, LF line endings, UTF-8, and a
trailing newline, so identical documents are identical bytes.

Floats render with Python's shortest round-trip repr unless wrapped in
a FormattedNumber, which carries an exact rendering chosen by the
producer (provenance uses this for significant-digit metric formatting
and directed-rounded value ranges).
"""

from __future__ import annotations

import json
import math
from decimal import ROUND_CEILING, ROUND_FLOOR, Context, Decimal


class FormattedNumber(float):
    """A float that remembers exactly how it should be printed."""

    __slots__ = ("text",)
    text: str

    def __new__(cls, value: float, text: str) -> "FormattedNumber":
        obj = super().__new__(cls, value)
        obj.text = text
        return obj


def _render_float(value: float) -> str:
    if isinstance(value, FormattedNumber):
        return value.text
    if math.isnan(value) or math.isinf(value):
        raise ValueError(f"cannot emit non-finite number {value!r} as JSON")
    return repr(value)


def _emit(value, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, float):
        out.append(_render_float(value))
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(value)
        for i, key in enumerate(keys):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {key!r}")
            out.append(inner)
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(": ")
            _emit(value[key], indent + 1, out)
            out.append(",\n" if i + 1 < len(keys) else "\n")
        out.append(pad + "}")
    elif isinstance(value, (list, tuple)):
        if not value:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(value):
            out.append(inner)
            _emit(item, indent + 1, out)
            out.append(",\n" if i + 1 < len(value) else "\n")
        out.append(pad + "]")
    else:
        raise TypeError(f"cannot emit {type(value).__name__} as JSON")


def canonical_dumps(value) -> str:
    """Serialize to the canonical text form (with trailing newline)."""
    out: list[str] = []
    _emit(value, 0, out)
    out.append("\n")
    return "".join(out)


def format_significant(value: float, digits: int = 6) -> FormattedNumber:
    """Round to at most `digits` significant digits, minimal rendering."""
    if value != value or math.isinf(value):
        raise ValueError(f"cannot format non-finite {value!r}")
    text = f"{value:.{digits}g}"
    if "e" not in text and "E" not in text and "." not in text:
        text += ".0"
    return FormattedNumber(float(text), text)


def _directed_round(value: float, digits: int, mode: str) -> Decimal:
    ctx = Context(prec=digits, rounding=mode)
    return ctx.plus(Decimal(repr(value)))


def format_range_bound(value: float, *, kind: str, digits: int = 6) -> FormattedNumber:
    """Format a range bound with directed rounding so the range only widens.

    kind='min' rounds toward -inf, kind='max' toward +inf; output keeps
    at least two decimal places (value-range entries are currency-like).
    """
    mode = ROUND_FLOOR if kind == "min" else ROUND_CEILING
    dec = _directed_round(value, digits, mode)
    text = format(dec, "f")
    if "." not in text:
        text += ".00"
    else:
        frac = text.split(".", 1)[1]
        if len(frac) < 2:
            text += "0" * (2 - len(frac))
    return FormattedNumber(float(text), text)
