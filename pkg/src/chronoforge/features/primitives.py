"""The primitive registry.

Aggregations reduce a multiset of child values (null inputs excluded,
empty multiset yields null) to one scalar; transforms map one value to
one value within an entity. Index, id, and time_index variables never
feed features, except that a time index may feed the time-derived
transforms.
"""

from __future__ import annotations

from dataclasses import dataclass

from chronoforge.errors import UnknownPrimitiveError

DATETIME_INPUTS = frozenset({"datetime", "time_index"})


@dataclass(frozen=True)
class Primitive:
    name: str
    kind: str  # "aggregation" | "transform"
    input_types: frozenset[str]
    output_type: str


_ANY_VALUE = frozenset(
    {"numeric", "categorical", "boolean", "datetime", "text", "latitude", "longitude"}
)
_NUMERIC = frozenset({"numeric"})

AGGREGATIONS: dict[str, Primitive] = {
    p.name: p
    for p in (
        Primitive("COUNT", "aggregation", _ANY_VALUE, "numeric"),
        Primitive("SUM", "aggregation", _NUMERIC, "numeric"),
        Primitive("MEAN", "aggregation", _NUMERIC, "numeric"),
        Primitive("MIN", "aggregation", _NUMERIC, "numeric"),
        Primitive("MAX", "aggregation", _NUMERIC, "numeric"),
        Primitive("STD", "aggregation", _NUMERIC, "numeric"),
        Primitive("NUM_UNIQUE", "aggregation", frozenset({"categorical", "text"}), "numeric"),
        Primitive("PERCENT", "aggregation", frozenset({"boolean"}), "numeric"),
        Primitive("TREND", "aggregation", _NUMERIC, "numeric"),
    )
}

TRANSFORMS: dict[str, Primitive] = {
    p.name: p
    for p in (
        Primitive("WEEKEND", "transform", DATETIME_INPUTS, "boolean"),
        Primitive("DAY", "transform", DATETIME_INPUTS, "numeric"),
        Primitive("MONTH", "transform", DATETIME_INPUTS, "numeric"),
        Primitive("WEEKDAY", "transform", DATETIME_INPUTS, "numeric"),
        Primitive("PERCENTILE", "transform", _NUMERIC, "numeric"),
    )
}

PRIMITIVES: dict[str, Primitive] = {**AGGREGATIONS, **TRANSFORMS}


def get_primitive(name: str) -> Primitive:
    try:
        return PRIMITIVES[name]
    except KeyError:
        raise UnknownPrimitiveError(name) from None


def accepts(primitive: Primitive, semantic_type: str) -> bool:
    """Whether a variable of the given semantic type can feed this primitive."""
    if semantic_type in ("index", "id"):
        return False
    return semantic_type in primitive.input_types
