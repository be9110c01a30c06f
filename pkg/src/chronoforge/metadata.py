"""metadata.json: the document describing an entityset's structure.

The schema is closed and validated here: entities with an index, an
optional time index, typed variables, and foreign-key relationships.
Unknown top-level keys are preserved opaquely so documents written by
newer tooling survive a parse/emit round trip.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from chronoforge.errors import SchemaError
from chronoforge.jsonutil import canonical_dumps

SEMANTIC_TYPES = frozenset(
    {
        "index",
        "id",
        "time_index",
        "numeric",
        "categorical",
        "boolean",
        "datetime",
        "text",
        "latitude",
        "longitude",
    }
)


@dataclass(frozen=True)
class VariableSpec:
    name: str
    semantic_type: str


@dataclass(frozen=True)
class EntitySpec:
    name: str
    index: str
    variables: tuple[VariableSpec, ...]
    time_index: str | None = None

    def variable(self, name: str) -> VariableSpec | None:
        for v in self.variables:
            if v.name == name:
                return v
        return None


@dataclass(frozen=True)
class RelationshipSpec:
    parent_entity: str
    parent_variable: str
    child_entity: str
    child_variable: str


@dataclass
class MetadataDocument:
    entityset_name: str
    entities: list[EntitySpec]
    relationships: list[RelationshipSpec]
    extra: dict = field(default_factory=dict)

    def entity(self, name: str) -> EntitySpec | None:
        for e in self.entities:
            if e.name == name:
                return e
        return None


def _require(obj: dict, key: str, pointer: str, typ: type, type_name: str):
    if key not in obj:
        raise SchemaError(f"{pointer}/{key}", "missing required key")
    value = obj[key]
    if not isinstance(value, typ) or isinstance(value, bool):
        raise SchemaError(f"{pointer}/{key}", f"expected {type_name}")
    return value


def parse_metadata(text: str) -> MetadataDocument:
    """Parse and validate a metadata.json document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise SchemaError("", "document root must be an object")

    name = _require(raw, "entityset_name", "", str, "string")
    raw_entities = _require(raw, "entities", "", list, "array")
    raw_relationships = _require(raw, "relationships", "", list, "array")

    entities: list[EntitySpec] = []
    for i, raw_entity in enumerate(raw_entities):
        pointer = f"/entities/{i}"
        if not isinstance(raw_entity, dict):
            raise SchemaError(pointer, "expected object")
        ename = _require(raw_entity, "name", pointer, str, "string")
        index = _require(raw_entity, "index", pointer, str, "string")
        time_index = raw_entity.get("time_index")
        if time_index is not None and not isinstance(time_index, str):
            raise SchemaError(f"{pointer}/time_index", "expected string or null")
        raw_vars = _require(raw_entity, "variables", pointer, list, "array")
        variables = []
        for j, raw_var in enumerate(raw_vars):
            vpointer = f"{pointer}/variables/{j}"
            if not isinstance(raw_var, dict):
                raise SchemaError(vpointer, "expected object")
            vname = _require(raw_var, "name", vpointer, str, "string")
            stype = _require(raw_var, "semantic_type", vpointer, str, "string")
            if stype not in SEMANTIC_TYPES:
                raise SchemaError(f"{vpointer}/semantic_type", f"unknown semantic_type {stype!r}")
            variables.append(VariableSpec(vname, stype))
        entities.append(EntitySpec(ename, index, tuple(variables), time_index))

    relationships: list[RelationshipSpec] = []
    for i, raw_rel in enumerate(raw_relationships):
        pointer = f"/relationships/{i}"
        if not isinstance(raw_rel, dict):
            raise SchemaError(pointer, "expected object")
        fieldvals = {}
        for key in ("parent_entity", "parent_variable", "child_entity", "child_variable"):
            fieldvals[key] = _require(raw_rel, key, pointer, str, "string")
        relationships.append(RelationshipSpec(**fieldvals))

    extra = {
        k: v
        for k, v in raw.items()
        if k not in ("entityset_name", "entities", "relationships")
    }
    doc = MetadataDocument(name, entities, relationships, extra)
    validate_metadata(doc)
    return doc


def validate_metadata(doc: MetadataDocument) -> None:
    """Check internal consistency; raises SchemaError with a pointer path."""
    seen_entities: set[str] = set()
    for i, entity in enumerate(doc.entities):
        pointer = f"/entities/{i}"
        if entity.name in seen_entities:
            raise SchemaError(f"{pointer}/name", f"duplicate entity name {entity.name!r}")
        seen_entities.add(entity.name)

        seen_vars: set[str] = set()
        index_vars = []
        time_vars = []
        for j, var in enumerate(entity.variables):
            vpointer = f"{pointer}/variables/{j}"
            if var.name in seen_vars:
                raise SchemaError(f"{vpointer}/name", f"duplicate variable name {var.name!r}")
            seen_vars.add(var.name)
            if var.semantic_type not in SEMANTIC_TYPES:
                raise SchemaError(
                    f"{vpointer}/semantic_type", f"unknown semantic_type {var.semantic_type!r}"
                )
            if var.semantic_type == "index":
                index_vars.append(var.name)
            if var.semantic_type == "time_index":
                time_vars.append(var.name)
        if len(index_vars) != 1:
            raise SchemaError(pointer, f"entity must declare exactly one index variable, found {len(index_vars)}")
        if len(time_vars) > 1:
            raise SchemaError(pointer, f"entity may declare at most one time_index variable, found {len(time_vars)}")
        if entity.index not in seen_vars:
            raise SchemaError(f"{pointer}/index", f"index names undeclared variable {entity.index!r}")
        if entity.index != index_vars[0]:
            raise SchemaError(
                f"{pointer}/index",
                f"index {entity.index!r} does not match the variable typed 'index' ({index_vars[0]!r})",
            )
        if entity.time_index is not None:
            if entity.time_index not in seen_vars:
                raise SchemaError(
                    f"{pointer}/time_index",
                    f"time_index names undeclared variable {entity.time_index!r}",
                )
            if not time_vars or entity.time_index != time_vars[0]:
                raise SchemaError(
                    f"{pointer}/time_index",
                    f"time_index {entity.time_index!r} does not match the variable typed 'time_index'",
                )
        elif time_vars:
            raise SchemaError(
                pointer,
                f"variable {time_vars[0]!r} is typed 'time_index' but the entity declares none",
            )

    for i, rel in enumerate(doc.relationships):
        pointer = f"/relationships/{i}"
        parent = doc.entity(rel.parent_entity)
        if parent is None:
            raise SchemaError(f"{pointer}/parent_entity", f"undeclared entity {rel.parent_entity!r}")
        child = doc.entity(rel.child_entity)
        if child is None:
            raise SchemaError(f"{pointer}/child_entity", f"undeclared entity {rel.child_entity!r}")
        if parent.variable(rel.parent_variable) is None:
            raise SchemaError(
                f"{pointer}/parent_variable",
                f"undeclared variable {rel.parent_variable!r} in entity {rel.parent_entity!r}",
            )
        if rel.parent_variable != parent.index:
            raise SchemaError(
                f"{pointer}/parent_variable",
                f"parent_variable must be the parent's index ({parent.index!r})",
            )
        if child.variable(rel.child_variable) is None:
            raise SchemaError(
                f"{pointer}/child_variable",
                f"undeclared variable {rel.child_variable!r} in entity {rel.child_entity!r}",
            )

    # child -> parent edges must not form a cycle
    edges: dict[str, list[str]] = {}
    for rel in doc.relationships:
        edges.setdefault(rel.child_entity, []).append(rel.parent_entity)
    state: dict[str, int] = {}

    def visit(node: str) -> None:
        state[node] = 1
        for nxt in edges.get(node, ()):
            mark = state.get(nxt, 0)
            if mark == 1:
                raise SchemaError("/relationships", f"relationship cycle through entity {node!r}")
            if mark == 0:
                visit(nxt)
        state[node] = 2

    for entity in doc.entities:
        if state.get(entity.name, 0) == 0:
            visit(entity.name)


def emit_metadata(doc: MetadataDocument) -> str:
    """Canonical serialization: sorted keys, 2-space indent, LF."""
    payload: dict = {
        "entityset_name": doc.entityset_name,
        "entities": [
            {
                "name": e.name,
                "index": e.index,
                "time_index": e.time_index,
                "variables": [
                    {"name": v.name, "semantic_type": v.semantic_type} for v in e.variables
                ],
            }
            for e in doc.entities
        ],
        "relationships": [
            {
                "parent_entity": r.parent_entity,
                "parent_variable": r.parent_variable,
                "child_entity": r.child_entity,
                "child_variable": r.child_variable,
            }
            for r in doc.relationships
        ],
    }
    payload.update(doc.extra)
    return canonical_dumps(payload)


def load_metadata(path) -> MetadataDocument:
    with open(path, encoding="utf-8") as fh:
        return parse_metadata(fh.read())
