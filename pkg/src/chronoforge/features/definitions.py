"""Feature definitions, the canonical name grammar, and serialization.

A feature is a tree: a transform applied to a variable within an
entity, or an aggregation applied over a relationship path to a raw
variable, a transform output, or a nested aggregation. Canonical names
render as ``PRIM(entity.column)``, ``PRIM(TPRIM(entity.column))`` for
aggregated transforms, and ``PRIM(entity.INNER(...))`` for nested
aggregations; parsing a generated name yields an equal definition.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from chronoforge.entityset import EntitySet, Relationship
from chronoforge.errors import ConfigError, FeatureNameError, SchemaError, UnknownPrimitiveError
from chronoforge.features.primitives import AGGREGATIONS, PRIMITIVES, TRANSFORMS
from chronoforge.jsonutil import canonical_dumps
from chronoforge.timeutil import Duration, parse_duration


@dataclass(frozen=True)
class RawVariable:
    entity: str
    column: str


@dataclass(frozen=True)
class TransformFeature:
    primitive: str
    entity: str
    column: str


@dataclass(frozen=True)
class AggregationFeature:
    primitive: str
    path: tuple[Relationship, ...]
    input: "RawVariable | TransformFeature | AggregationFeature"

    @property
    def terminal_entity(self) -> str:
        return self.path[-1].child_entity


FeatureDefinition = TransformFeature | AggregationFeature


def feature_name(feature: FeatureDefinition) -> str:
    """Render the canonical name."""
    if isinstance(feature, TransformFeature):
        return f"{feature.primitive}({feature.entity}.{feature.column})"
    inner = feature.input
    if isinstance(inner, RawVariable):
        body = f"{inner.entity}.{inner.column}"
    elif isinstance(inner, TransformFeature):
        body = feature_name(inner)
    else:
        body = f"{feature.terminal_entity}.{feature_name(inner)}"
    return f"{feature.primitive}({body})"


def feature_kind(feature: FeatureDefinition) -> str:
    """Column kind of the computed feature: 'boolean' or 'numeric'."""
    if isinstance(feature, TransformFeature):
        return "boolean" if PRIMITIVES[feature.primitive].output_type == "boolean" else "numeric"
    return "numeric"


def feature_depth(feature: FeatureDefinition) -> int:
    """Depth counts stacked primitives and relationship hops, whichever stacks."""
    if isinstance(feature, TransformFeature):
        return 1
    inner = feature.input
    if isinstance(inner, RawVariable):
        extra = 0
    elif isinstance(inner, TransformFeature):
        extra = 1
    else:
        extra = feature_depth(inner)
    return len(feature.path) + extra


def referenced_fields(feature: FeatureDefinition, es: EntitySet) -> set[tuple[str, str]]:
    """Every (entity, variable) pair the runtime needs to evaluate this feature."""
    fields: set[tuple[str, str]] = set()

    def add_entity_time(entity_name: str) -> None:
        entity = es.entity(entity_name)
        if entity.time_index is not None:
            fields.add((entity_name, entity.time_index))

    def walk(node) -> None:
        if isinstance(node, RawVariable):
            fields.add((node.entity, node.column))
        elif isinstance(node, TransformFeature):
            fields.add((node.entity, node.column))
            add_entity_time(node.entity)
        else:
            for rel in node.path:
                fields.add((rel.parent_entity, rel.parent_variable))
                fields.add((rel.child_entity, rel.child_variable))
                add_entity_time(rel.child_entity)
            walk(node.input)

    walk(feature)
    return fields


# ---------------------------------------------------------------------------
# Name grammar
# ---------------------------------------------------------------------------

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class _Parser:
    def __init__(self, text: str, es: EntitySet, base_entity: str) -> None:
        self.text = text
        self.pos = 0
        self.es = es
        self.base_entity = base_entity

    def fail(self, message: str):
        raise FeatureNameError(self.text, self.pos, message)

    def ident(self) -> str:
        m = _IDENT.match(self.text, self.pos)
        if m is None:
            self.fail("expected identifier")
        self.pos = m.end()
        return m.group()

    def expect(self, ch: str) -> None:
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            self.fail(f"expected {ch!r}")
        self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def column_until_close(self) -> str:
        end = self.text.find(")", self.pos)
        if end < 0:
            self.fail("expected ')'")
        column = self.text[self.pos : end]
        if not column or "(" in column:
            self.fail("invalid column name")
        self.pos = end
        return column

    def parse_feature(self, base_entity: str) -> FeatureDefinition:
        prim_name = self.ident()
        primitive = PRIMITIVES.get(prim_name)
        if primitive is None:
            self.fail(f"unknown primitive {prim_name!r}")
        self.expect("(")

        if primitive.kind == "transform":
            entity = self.ident()
            self.expect(".")
            column = self.column_until_close()
            self.expect(")")
            return TransformFeature(prim_name, entity, column)

        # aggregation body: PRIM(...), entity.column, or entity.PRIM(...)
        mark = self.pos
        head = self.ident()
        if self.peek() == "(":
            # transform (or bare aggregation) input; entity comes from the inner node
            self.pos = mark
            inner = self.parse_feature(base_entity)
            if isinstance(inner, AggregationFeature):
                self.fail("nested aggregation requires an entity prefix")
            self.expect(")")
            path = self._resolve_path(base_entity, inner.entity)
            return AggregationFeature(prim_name, path, inner)
        self.expect(".")
        after = self.pos
        inner_head = _IDENT.match(self.text, after)
        if (
            inner_head is not None
            and inner_head.group() in AGGREGATIONS
            and after + len(inner_head.group()) < len(self.text)
            and self.text[after + len(inner_head.group())] == "("
        ):
            inner = self.parse_feature(head)
            self.expect(")")
            path = self._resolve_path(base_entity, head)
            return AggregationFeature(prim_name, path, inner)
        column = self.column_until_close()
        self.expect(")")
        path = self._resolve_path(base_entity, head)
        return AggregationFeature(prim_name, path, RawVariable(head, column))

    def _resolve_path(self, src: str, dst: str) -> tuple[Relationship, ...]:
        for path in self.es.downward_paths(src):
            if path[-1].child_entity == dst:
                return path
        self.fail(f"no relationship path from {src!r} down to {dst!r}")
        raise AssertionError  # unreachable


def parse_feature_name(text: str, es: EntitySet, target_entity: str) -> FeatureDefinition:
    """Parse a canonical feature name back into a definition."""
    parser = _Parser(text, es, target_entity)
    feature = parser.parse_feature(target_entity)
    if parser.pos != len(text):
        parser.fail("trailing characters")
    return feature


# ---------------------------------------------------------------------------
# DFS parameters and feature-list serialization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DfsParams:
    target_entity: str
    training_window: Duration | None = None  # None = unlimited
    aggregation_primitives: tuple[str, ...] = ()
    transform_primitives: tuple[str, ...] = ()
    ignore_variables: dict = field(default_factory=dict)
    max_depth: int = 2

    def validate(self, es: EntitySet) -> None:
        if self.max_depth < 1:
            raise ConfigError("max_depth must be a positive integer")
        for name in self.aggregation_primitives:
            if name not in AGGREGATIONS:
                raise UnknownPrimitiveError(name)
        for name in self.transform_primitives:
            if name not in TRANSFORMS:
                raise UnknownPrimitiveError(name)
        es.entity(self.target_entity)
        for entity_name, variables in self.ignore_variables.items():
            entity = es.entity(entity_name)
            for var in variables:
                if entity.variable(var) is None:
                    raise ConfigError(
                        f"ignore_variables: entity {entity_name!r} has no variable {var!r}"
                    )

    def ignored(self, entity: str) -> frozenset[str]:
        return frozenset(self.ignore_variables.get(entity, ()))

    @property
    def window_seconds(self) -> int | None:
        return self.training_window.seconds if self.training_window is not None else None


def dfs_params_to_json(params: DfsParams) -> dict:
    return {
        "target_entity": params.target_entity,
        "training_window": params.training_window.render() if params.training_window else None,
        "aggregation_primitives": list(params.aggregation_primitives),
        "transform_primitives": list(params.transform_primitives),
        "ignore_variables": {k: list(v) for k, v in sorted(params.ignore_variables.items())},
        "max_depth": params.max_depth,
    }


def dfs_params_from_json(raw: dict, pointer: str = "/dfs_params") -> DfsParams:
    if not isinstance(raw, dict):
        raise SchemaError(pointer, "expected object")
    try:
        window = raw.get("training_window")
        return DfsParams(
            target_entity=raw["target_entity"],
            training_window=parse_duration(window) if window is not None else None,
            aggregation_primitives=tuple(raw.get("aggregation_primitives", ())),
            transform_primitives=tuple(raw.get("transform_primitives", ())),
            ignore_variables={k: list(v) for k, v in raw.get("ignore_variables", {}).items()},
            max_depth=int(raw.get("max_depth", 2)),
        )
    except KeyError as exc:
        raise SchemaError(f"{pointer}/{exc.args[0]}", "missing required key") from None


def serialize_feature_list(features: list[FeatureDefinition], params: DfsParams) -> str:
    """Canonical JSON: the name array plus the DFS parameter echo."""
    payload = {
        "dfs_params": dfs_params_to_json(params),
        "features": [feature_name(f) for f in features],
    }
    return canonical_dumps(payload)


def parse_feature_list(text: str, es: EntitySet) -> tuple[list[FeatureDefinition], DfsParams]:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict) or "features" not in raw or "dfs_params" not in raw:
        raise SchemaError("", "feature list document needs 'features' and 'dfs_params'")
    params = dfs_params_from_json(raw["dfs_params"])
    features = [parse_feature_name(name, es, params.target_entity) for name in raw["features"]]
    return features, params
