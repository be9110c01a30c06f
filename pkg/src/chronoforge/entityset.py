"""In-memory relational store with strict point-in-time semantics.

Entities hold columnar data sorted by their time index; query_by_time
is a binary search for the prefix strictly before the cutoff. An
EntitySet version is immutable once constructed: add_new_data and
normalize_entity build a new version and bump the version counter.

Rows of entities without a time index are timeless reference data,
visible at every cutoff; rows of timeless entities reached through a
relationship path inherit the availability time of their nearest
time-indexed ancestor along that path (see PathIndex).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from chronoforge.errors import (
    ConfigError,
    ConsistencyError,
    DanglingKeyError,
    DataError,
    DuplicateIndexError,
    FunctionalDependencyError,
    MissingFileError,
    TypeViolationError,
)
from chronoforge.metadata import MetadataDocument, EntitySpec
from chronoforge.timeutil import TimestampParseError, parse_timestamp

NUMERIC_TYPES = frozenset({"numeric", "latitude", "longitude"})
FLOAT_BACKED = frozenset({"numeric", "latitude", "longitude", "boolean", "datetime", "time_index"})
STRING_BACKED = frozenset({"index", "id", "categorical", "text"})

_TRUE_TOKENS = frozenset({"true", "True", "TRUE", "1"})
_FALSE_TOKENS = frozenset({"false", "False", "FALSE", "0"})


@dataclass(frozen=True)
class Variable:
    name: str
    semantic_type: str


@dataclass(frozen=True)
class Relationship:
    parent_entity: str
    parent_variable: str
    child_entity: str
    child_variable: str


# ---------------------------------------------------------------------------
# Raw batches (parsed but unsorted; carry file row positions for errors)
# ---------------------------------------------------------------------------


@dataclass
class RawBatch:
    """Cell-parsed rows of one entity in file order (row positions are 1-based)."""

    entity: str
    columns: dict[str, list]
    n_rows: int


def _parse_cell(text: str, semantic_type: str):
    """Parse one CSV cell; empty string is null. Raises ValueError on bad text."""
    if text == "":
        return None
    if semantic_type in NUMERIC_TYPES:
        return float(text)
    if semantic_type == "boolean":
        if text in _TRUE_TOKENS:
            return 1.0
        if text in _FALSE_TOKENS:
            return 0.0
        raise ValueError(text)
    if semantic_type in ("datetime", "time_index"):
        return float(parse_timestamp(text))
    return text


def parse_batch(entity_spec: EntitySpec, header: list[str], rows: list[list[str]]) -> RawBatch:
    """Parse raw CSV rows for one entity, reporting the first bad cell."""
    declared = [v.name for v in entity_spec.variables]
    if set(header) != set(declared):
        missing = sorted(set(declared) - set(header))
        extra = sorted(set(header) - set(declared))
        raise DataError(
            f"column set mismatch for entity {entity_spec.name!r}: "
            f"missing {missing}, unexpected {extra}"
        )
    types = {v.name: v.semantic_type for v in entity_spec.variables}
    columns: dict[str, list] = {name: [] for name in declared}
    for pos, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DataError(
                f"entity {entity_spec.name!r} row {pos}: expected {len(header)} fields, got {len(row)}"
            )
        for name, text in zip(header, row):
            stype = types[name]
            try:
                value = _parse_cell(text, stype)
            except (ValueError, TimestampParseError):
                raise TypeViolationError(entity_spec.name, name, pos, text, stype) from None
            if value is None and stype in ("index", "time_index"):
                raise TypeViolationError(entity_spec.name, name, pos, text, stype)
            columns[name].append(value)
    return RawBatch(entity_spec.name, columns, len(rows))


def read_csv_batch(path: Path, entity_spec: EntitySpec) -> RawBatch:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"entity file {path} is empty (missing header)") from None
        rows = list(reader)
    return parse_batch(entity_spec, header, rows)


# ---------------------------------------------------------------------------
# Entities
# ---------------------------------------------------------------------------


class Entity:
    """One columnar table, sorted by its time index when it has one."""

    def __init__(
        self,
        name: str,
        variables: tuple[Variable, ...],
        index: str,
        time_index: str | None,
        columns: dict[str, list | np.ndarray],
        n_rows: int,
    ) -> None:
        self.name = name
        self.variables = variables
        self.index = index
        self.time_index = time_index
        self.columns = columns
        self.n_rows = n_rows
        self.times: np.ndarray | None = None
        if time_index is not None:
            self.times = columns[time_index]  # type: ignore[assignment]
        self.index_positions: dict[str, int] = {
            key: i for i, key in enumerate(columns[index])  # type: ignore[arg-type]
        }
        self._code_cache: dict[str, tuple[np.ndarray, list[str]]] = {}

    def variable(self, name: str) -> Variable | None:
        for v in self.variables:
            if v.name == name:
                return v
        return None

    def semantic_type(self, name: str) -> str:
        var = self.variable(name)
        if var is None:
            raise ConfigError(f"entity {self.name!r} has no variable {name!r}")
        return var.semantic_type

    def visible_count(self, cutoff: float) -> int:
        """Rows strictly before the cutoff (all rows if timeless)."""
        if self.times is None:
            return self.n_rows
        return int(np.searchsorted(self.times, cutoff, side="left"))

    def float_column(self, name: str) -> np.ndarray:
        col = self.columns[name]
        if isinstance(col, np.ndarray):
            return col
        raise ConfigError(f"{self.name}.{name} is not a numeric-backed column")

    def codes(self, name: str) -> tuple[np.ndarray, list[str]]:
        """Integer codes for a string-backed column (null = -1), vocab sorted."""
        cached = self._code_cache.get(name)
        if cached is not None:
            return cached
        col = self.columns[name]
        vocab = sorted({v for v in col if v is not None})
        lookup = {v: i for i, v in enumerate(vocab)}
        codes = np.fromiter(
            (lookup[v] if v is not None else -1 for v in col), dtype=np.int64, count=len(col)
        )
        self._code_cache[name] = (codes, vocab)
        return codes, vocab

    def python_value(self, name: str, row: int):
        """Cell value as a plain Python object (None for null)."""
        col = self.columns[name]
        stype = self.semantic_type(name)
        value = col[row]
        if isinstance(col, np.ndarray):
            value = float(value)
            if value != value:
                return None
            if stype == "boolean":
                return bool(value)
            return value
        return value

    def row_dict(self, row: int) -> dict:
        return {v.name: self.python_value(v.name, row) for v in self.variables}


def _columns_from_batch(batch: RawBatch, spec: EntitySpec) -> dict[str, list | np.ndarray]:
    columns: dict[str, list | np.ndarray] = {}
    for var in spec.variables:
        values = batch.columns[var.name]
        if var.semantic_type in FLOAT_BACKED:
            arr = np.array(
                [v if v is not None else np.nan for v in values], dtype=np.float64
            )
            columns[var.name] = arr
        else:
            columns[var.name] = list(values)
    return columns


def _build_entity(spec: EntitySpec, batch: RawBatch) -> Entity:
    seen: dict[str, int] = {}
    for pos, key in enumerate(batch.columns[spec.index], start=1):
        if key in seen:
            raise DuplicateIndexError(spec.name, spec.index, pos)
        seen[key] = pos
    columns = _columns_from_batch(batch, spec)
    n = batch.n_rows
    if spec.time_index is not None and n > 0:
        order = np.argsort(columns[spec.time_index], kind="stable")
        for name, col in columns.items():
            if isinstance(col, np.ndarray):
                columns[name] = col[order]
            else:
                columns[name] = [col[i] for i in order]
    variables = tuple(Variable(v.name, v.semantic_type) for v in spec.variables)
    return Entity(spec.name, variables, spec.index, spec.time_index, columns, n)


# ---------------------------------------------------------------------------
# EntitySet
# ---------------------------------------------------------------------------


class EntitySet:
    """Versioned, immutable collection of entities and relationships."""

    def __init__(
        self,
        name: str,
        entities: dict[str, Entity],
        relationships: tuple[Relationship, ...],
        version: int,
    ) -> None:
        self.name = name
        self.entities = entities
        self.relationships = relationships
        self.version = version
        self._path_cache: dict = {}
        self._paths_cache: dict[str, list] = {}

    def entity(self, name: str) -> Entity:
        try:
            return self.entities[name]
        except KeyError:
            raise ConfigError(f"unknown entity {name!r}") from None

    def child_relationships(self, parent: str) -> list[Relationship]:
        rels = [r for r in self.relationships if r.parent_entity == parent]
        rels.sort(key=lambda r: (r.child_entity, r.child_variable))
        return rels

    def has_variable(self, entity: str, variable: str) -> bool:
        ent = self.entities.get(entity)
        return ent is not None and ent.variable(variable) is not None

    def latest_time(self) -> float | None:
        latest = None
        for entity in self.entities.values():
            if entity.times is not None and entity.n_rows:
                t = float(entity.times[-1])
                if latest is None or t > latest:
                    latest = t
        return latest

    def downward_paths(self, root: str) -> list[tuple[Relationship, ...]]:
        """All simple downward relationship paths from root, deterministic order."""
        cached = self._paths_cache.get(root)
        if cached is not None:
            return cached
        paths: list[tuple[Relationship, ...]] = []

        def walk(entity: str, prefix: tuple[Relationship, ...], seen: frozenset[str]) -> None:
            for rel in self.child_relationships(entity):
                if rel.child_entity in seen:
                    continue
                path = prefix + (rel,)
                paths.append(path)
                walk(rel.child_entity, path, seen | {rel.child_entity})

        walk(root, (), frozenset({root}))
        self._paths_cache[root] = paths
        return paths

    def path_index(self, root: str, path: tuple[Relationship, ...]) -> "PathIndex":
        key = (root, path)
        cached = self._path_cache.get(key)
        if cached is None:
            cached = PathIndex.build(self, root, path)
            self._path_cache[key] = cached
        return cached


class PathIndex:
    """Composed join of one downward path, sorted for windowed range lookups.

    Terminal rows are sorted by (owning target row, availability time);
    availability is the row's own time index when the terminal entity
    has one, else the time inherited from the nearest time-indexed
    ancestor along the path. A path with no time-indexed entity at all
    is timeless: its rows are visible at every cutoff.
    """

    def __init__(
        self,
        entityset: EntitySet,
        terminal: Entity,
        sorted_rows: np.ndarray,
        sorted_roots: np.ndarray,
        sorted_times: np.ndarray | None,
        group_starts: np.ndarray,
        group_ends: np.ndarray,
    ) -> None:
        self.entityset = entityset
        self.terminal = terminal
        self.sorted_rows = sorted_rows
        self.sorted_roots = sorted_roots
        self.sorted_times = sorted_times
        self.group_starts = group_starts
        self.group_ends = group_ends

    @property
    def has_time(self) -> bool:
        return self.sorted_times is not None

    @staticmethod
    def build(es: EntitySet, root: str, path: tuple[Relationship, ...]) -> "PathIndex":
        current = es.entity(root)
        n = current.n_rows
        roots = np.arange(n, dtype=np.int64)
        times = current.times.astype(np.float64) if current.times is not None else None
        for rel in path:
            parent = current
            child = es.entity(rel.child_entity)
            fk = child.columns[rel.child_variable]
            parent_row = np.fromiter(
                (
                    parent.index_positions.get(v, -1) if v is not None else -1
                    for v in fk  # type: ignore[union-attr]
                ),
                dtype=np.int64,
                count=child.n_rows,
            )
            alive = parent_row >= 0
            safe_parent = np.where(alive, parent_row, 0)
            child_roots = np.where(alive, roots[safe_parent], -1)
            if child.times is not None:
                child_times = child.times.astype(np.float64)
            elif times is not None:
                child_times = np.where(alive, times[safe_parent], np.nan)
            else:
                child_times = None
            roots = child_roots
            times = child_times
            current = child

        keep = roots >= 0
        row_idx = np.nonzero(keep)[0].astype(np.int64)
        kept_roots = roots[keep]
        if times is not None:
            kept_times = times[keep]
            order = np.lexsort((kept_times, kept_roots))
        else:
            kept_times = None
            order = np.argsort(kept_roots, kind="stable")
        sorted_rows = row_idx[order]
        sorted_roots = kept_roots[order]
        sorted_times = kept_times[order] if kept_times is not None else None

        n_root = es.entity(root).n_rows
        group_starts = np.searchsorted(sorted_roots, np.arange(n_root), side="left").astype(
            np.int64
        )
        group_ends = np.searchsorted(sorted_roots, np.arange(n_root), side="right").astype(
            np.int64
        )
        return PathIndex(
            es, current, sorted_rows, sorted_roots, sorted_times, group_starts, group_ends
        )

    def window_bounds(
        self, root_row: int, cutoff: float, window_seconds: float | None
    ) -> tuple[int, int]:
        """Half-open [start, end) into the sorted arrays for one target row."""
        gs = int(self.group_starts[root_row])
        ge = int(self.group_ends[root_row])
        if self.sorted_times is None:
            return gs, ge
        seg = self.sorted_times[gs:ge]
        hi = gs + int(np.searchsorted(seg, cutoff, side="left"))
        if window_seconds is None:
            lo = gs
        else:
            lo = gs + int(np.searchsorted(seg, cutoff - window_seconds, side="left"))
        return lo, hi

    def first_event_time(self, root_row: int) -> float | None:
        if self.sorted_times is None:
            return None
        gs = int(self.group_starts[root_row])
        ge = int(self.group_ends[root_row])
        if ge <= gs:
            return None
        return float(self.sorted_times[gs])


# ---------------------------------------------------------------------------
# Views
# ---------------------------------------------------------------------------


@dataclass
class EntityTimeView:
    """Prefix view of one entity's rows at a cutoff."""

    entity: Entity
    visible: int

    def column(self, name: str):
        col = self.entity.columns[name]
        return col[: self.visible]

    def row_dicts(self) -> list[dict]:
        return [self.entity.row_dict(i) for i in range(self.visible)]

    def index_values(self) -> list[str]:
        return list(self.entity.columns[self.entity.index][: self.visible])


class EntitySetView:
    """Read-only point-in-time view; only rows before the cutoff are visible."""

    def __init__(self, entityset: EntitySet, cutoff: float) -> None:
        self.entityset = entityset
        self.cutoff = cutoff
        self._counts = {
            name: entity.visible_count(cutoff) for name, entity in entityset.entities.items()
        }

    def visible_count(self, entity_name: str) -> int:
        return self._counts[entity_name]

    def entity(self, entity_name: str) -> EntityTimeView:
        return EntityTimeView(self.entityset.entity(entity_name), self._counts[entity_name])


def query_by_time(es: EntitySet, cutoff: float) -> EntitySetView:
    """View of the entityset as of the cutoff (strictly earlier rows only)."""
    return EntitySetView(es, cutoff)


# ---------------------------------------------------------------------------
# Loading and appending
# ---------------------------------------------------------------------------


def _check_referential_integrity(es: EntitySet) -> None:
    for rel in es.relationships:
        parent = es.entity(rel.parent_entity)
        child = es.entity(rel.child_entity)
        valid = set(parent.columns[parent.index])  # type: ignore[arg-type]
        for pos, value in enumerate(child.columns[rel.child_variable], start=1):  # type: ignore[arg-type]
            if value is not None and value not in valid:
                raise DanglingKeyError(
                    rel.child_entity, rel.child_variable, pos, value, rel.parent_entity
                )


def load_entityset(data_dir, metadata: MetadataDocument) -> EntitySet:
    """Load one CSV per declared entity and validate every invariant."""
    data_dir = Path(data_dir)
    entities: dict[str, Entity] = {}
    for spec in metadata.entities:
        path = data_dir / f"{spec.name}.csv"
        if not path.is_file():
            raise MissingFileError(spec.name, str(path))
        batch = read_csv_batch(path, spec)
        entities[spec.name] = _build_entity(spec, batch)
    relationships = tuple(
        Relationship(r.parent_entity, r.parent_variable, r.child_entity, r.child_variable)
        for r in metadata.relationships
    )
    es = EntitySet(metadata.entityset_name, entities, relationships, version=1)
    _check_referential_integrity(es)
    return es


@dataclass(frozen=True)
class Violation:
    kind: str  # ColumnSetMismatch | TypeViolation | DuplicateIndex | DanglingKey
    entity: str
    column: str
    row: int
    message: str


@dataclass
class ConsistencyReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_consistency(
    es: EntitySet, metadata: MetadataDocument, raw_batches: dict[str, tuple[list[str], list[list[str]]]]
) -> tuple[ConsistencyReport, dict[str, RawBatch]]:
    """Validate new row batches against the existing entityset.

    raw_batches maps entity name to (header, rows) of unparsed strings.
    Violations are collected, not raised; an empty report means
    add_new_data would succeed. Returns parsed batches for reuse.
    """
    report = ConsistencyReport()
    parsed: dict[str, RawBatch] = {}
    for name, (header, rows) in raw_batches.items():
        spec = metadata.entity(name)
        if spec is None:
            report.violations.append(
                Violation("ColumnSetMismatch", name, "", 0, f"undeclared entity {name!r}")
            )
            continue
        declared = {v.name for v in spec.variables}
        if set(header) != declared:
            missing = sorted(declared - set(header))
            extra = sorted(set(header) - declared)
            report.violations.append(
                Violation(
                    "ColumnSetMismatch",
                    name,
                    ",".join(missing + extra),
                    0,
                    f"column set mismatch for {name!r}: missing {missing}, unexpected {extra}",
                )
            )
            continue
        types = {v.name: v.semantic_type for v in spec.variables}
        columns: dict[str, list] = {v: [] for v in declared}
        batch_ok = True
        for pos, row in enumerate(rows, start=1):
            if len(row) != len(header):
                report.violations.append(
                    Violation(
                        "ColumnSetMismatch", name, "", pos,
                        f"{name!r} row {pos}: expected {len(header)} fields, got {len(row)}",
                    )
                )
                batch_ok = False
                continue
            for col, text in zip(header, row):
                stype = types[col]
                try:
                    value = _parse_cell(text, stype)
                except (ValueError, TimestampParseError):
                    report.violations.append(
                        Violation(
                            "TypeViolation", name, col, pos,
                            f"value {text!r} is not a valid {stype}",
                        )
                    )
                    value = None
                if value is None and stype in ("index", "time_index"):
                    if text != "":
                        pass  # already reported as a TypeViolation above
                    else:
                        report.violations.append(
                            Violation(
                                "TypeViolation", name, col, pos,
                                f"{stype} value must not be empty",
                            )
                        )
                columns[col].append(value)
        if not batch_ok:
            continue
        parsed[name] = RawBatch(name, columns, len(rows))

    # duplicate indexes: within the batch and against existing rows
    for name, batch in parsed.items():
        spec = metadata.entity(name)
        assert spec is not None
        existing = es.entities[name].index_positions if name in es.entities else {}
        seen: set = set()
        for pos, key in enumerate(batch.columns[spec.index], start=1):
            if key is None:
                continue
            if key in seen or key in existing:
                report.violations.append(
                    Violation(
                        "DuplicateIndex", name, spec.index, pos,
                        f"DuplicateIndex({name}, {spec.index}, row {pos})",
                    )
                )
            seen.add(key)

    # dangling foreign keys against existing + new parent rows
    for rel in es.relationships:
        child_batch = parsed.get(rel.child_entity)
        if child_batch is None:
            continue
        parent_entity = es.entities.get(rel.parent_entity)
        valid: set = set(parent_entity.columns[parent_entity.index]) if parent_entity else set()  # type: ignore[arg-type]
        parent_batch = parsed.get(rel.parent_entity)
        if parent_batch is not None:
            parent_spec = metadata.entity(rel.parent_entity)
            assert parent_spec is not None
            valid |= {v for v in parent_batch.columns[parent_spec.index] if v is not None}
        for pos, value in enumerate(child_batch.columns[rel.child_variable], start=1):
            if value is not None and value not in valid:
                report.violations.append(
                    Violation(
                        "DanglingKey", rel.child_entity, rel.child_variable, pos,
                        f"DanglingKey({rel.child_entity}, {rel.child_variable}, row {pos}): "
                        f"value {value!r} has no matching row in {rel.parent_entity!r}",
                    )
                )
    return report, parsed


def read_new_data(new_data_path, metadata: MetadataDocument) -> dict[str, tuple[list[str], list[list[str]]]]:
    """Read whichever entity CSVs exist under the new-data directory."""
    new_data_path = Path(new_data_path)
    raw: dict[str, tuple[list[str], list[list[str]]]] = {}
    for spec in metadata.entities:
        path = new_data_path / f"{spec.name}.csv"
        if not path.is_file():
            continue
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"entity file {path} is empty (missing header)") from None
            rows = list(reader)
        raw[spec.name] = (header, rows)
    return raw


def add_new_data(es: EntitySet, new_data_path, metadata: MetadataDocument) -> EntitySet:
    """Append conforming new rows, returning the next entityset version."""
    raw = read_new_data(new_data_path, metadata)
    report, parsed = check_consistency(es, metadata, raw)
    if not report.ok:
        raise ConsistencyError(report)

    entities = dict(es.entities)
    for name, batch in parsed.items():
        if batch.n_rows == 0:
            continue
        old = es.entity(name)
        spec = metadata.entity(name)
        assert spec is not None
        new_cols = _columns_from_batch(batch, spec)
        merged: dict[str, list | np.ndarray] = {}
        for var in old.variables:
            old_col = old.columns[var.name]
            new_col = new_cols[var.name]
            if isinstance(old_col, np.ndarray):
                merged[var.name] = np.concatenate([old_col, new_col])
            else:
                merged[var.name] = list(old_col) + list(new_col)
        n = old.n_rows + batch.n_rows
        if old.time_index is not None and n > 0:
            order = np.argsort(merged[old.time_index], kind="stable")
            for cname, col in merged.items():
                if isinstance(col, np.ndarray):
                    merged[cname] = col[order]
                else:
                    merged[cname] = [col[i] for i in order]
        entities[name] = Entity(
            old.name, old.variables, old.index, old.time_index, merged, n
        )
    return EntitySet(es.name, entities, es.relationships, es.version + 1)


def normalize_entity(
    es: EntitySet,
    source: str,
    new_entity: str,
    key_variable: str,
    carried_variables: list[str],
) -> EntitySet:
    """Split repeated key/carried data out of source into a new parent entity."""
    src = es.entity(source)
    if new_entity in es.entities:
        raise ConfigError(f"entity {new_entity!r} already exists")
    key_var = src.variable(key_variable)
    if key_var is None:
        raise ConfigError(f"entity {source!r} has no variable {key_variable!r}")
    carried: list[Variable] = []
    for name in carried_variables:
        var = src.variable(name)
        if var is None:
            raise ConfigError(f"entity {source!r} has no variable {name!r}")
        if name in (src.index, key_variable):
            raise ConfigError(f"cannot carry {name!r} (index or key variable)")
        if var.semantic_type == "time_index":
            raise ConfigError("cannot carry the time index out of an entity")
        carried.append(var)

    key_col = src.columns[key_variable]
    if isinstance(key_col, np.ndarray):
        raise ConfigError(f"key variable {key_variable!r} must be string-backed to normalize")
    carried_map: dict[str, tuple] = {}
    key_order: list[str] = []
    for row in range(src.n_rows):
        key = key_col[row]
        if key is None:
            continue
        values = tuple(src.python_value(v.name, row) for v in carried)
        if key in carried_map:
            if carried_map[key] != values:
                raise FunctionalDependencyError(source, key_variable, str(key))
        else:
            carried_map[key] = values
            key_order.append(key)

    # new parent entity: one row per distinct key, timeless
    new_columns: dict[str, list | np.ndarray] = {key_variable: list(key_order)}
    for pos, var in enumerate(carried):
        values = [carried_map[k][pos] for k in key_order]
        if var.semantic_type in FLOAT_BACKED:
            new_columns[var.name] = np.array(
                [v if v is not None else np.nan for v in values], dtype=np.float64
            )
        else:
            new_columns[var.name] = values
    new_vars = (Variable(key_variable, "index"),) + tuple(carried)
    created = Entity(new_entity, new_vars, key_variable, None, new_columns, len(key_order))

    # source keeps the key as a foreign key and drops the carried columns
    remaining: list[Variable] = []
    src_columns: dict[str, list | np.ndarray] = {}
    carried_names = {v.name for v in carried}
    for var in src.variables:
        if var.name in carried_names:
            continue
        if var.name == key_variable:
            var = Variable(var.name, "id")
        remaining.append(var)
        src_columns[var.name] = src.columns[var.name]
    reduced = Entity(
        src.name, tuple(remaining), src.index, src.time_index, src_columns, src.n_rows
    )

    entities = dict(es.entities)
    entities[source] = reduced
    entities[new_entity] = created
    relationships = es.relationships + (
        Relationship(new_entity, key_variable, source, key_variable),
    )
    result = EntitySet(es.name, entities, relationships, es.version + 1)
    _check_referential_integrity(result)
    return result
