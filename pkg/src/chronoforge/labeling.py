"""Prediction engineering: search entity timelines for training examples.

A labeling function sees one instance's events inside one candidate
window [t, t + prediction_window) and answers whether the outcome of
interest occurred (or returns None to skip the candidate). The search
walks a grid of window starts per instance, applies the lead / gap /
min_training_data / budget constraints, and emits (instance, label,
cutoff_time) rows with cutoff_time = t - lead, so a model trained at
the cutoff can never see the window it is predicting.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field
from typing import Callable

from chronoforge.entityset import EntitySet
from chronoforge.errors import ConfigError, DataError, LabelingError, UnknownInstanceError
from chronoforge.timeutil import Duration, ZERO, parse_timestamp, render_timestamp

Label = bool | str


# ---------------------------------------------------------------------------
# Instance windows
# ---------------------------------------------------------------------------


class LabelWindow:
    """One instance's time-bearing rows inside one candidate window."""

    def __init__(
        self, es: EntitySet, target_entity: str, instance_row: int, start: int, end: int
    ) -> None:
        self._es = es
        self.target_entity = target_entity
        self._instance_row = instance_row
        self.start = start
        self.end = end
        target = es.entity(target_entity)
        self.instance_id = target.columns[target.index][instance_row]

    def rows(self, entity_name: str) -> list[dict]:
        """Row dicts of the named entity owned by this instance, within the window."""
        es = self._es
        entity = es.entity(entity_name)
        hits: list[tuple[float, int]] = []
        seen: set[int] = set()
        for path in self._paths_to(entity_name):
            index = es.path_index(self.target_entity, path)
            if not index.has_time:
                continue
            lo, hi = index.window_bounds(
                self._instance_row, float(self.end), float(self.end - self.start)
            )
            for k in range(lo, hi):
                row = int(index.sorted_rows[k])
                if row not in seen:
                    seen.add(row)
                    hits.append((float(index.sorted_times[k]), row))
        hits.sort()
        return [entity.row_dict(row) for _, row in hits]

    def _paths_to(self, entity_name: str):
        if entity_name == self.target_entity:
            yield ()
            return
        found = False
        for path in self._es.downward_paths(self.target_entity):
            if path[-1].child_entity == entity_name:
                found = True
                yield path
        if not found:
            raise ConfigError(
                f"entity {entity_name!r} is not reachable below {self.target_entity!r}"
            )


def first_event_time(es: EntitySet, target_entity: str, instance_row: int) -> float | None:
    """Earliest time-indexed event of an instance (own row or any descendant)."""
    earliest: float | None = None
    for path in [()] + es.downward_paths(target_entity):
        index = es.path_index(target_entity, tuple(path))
        if not index.has_time:
            continue
        t = index.first_event_time(instance_row)
        if t is not None and (earliest is None or t < earliest):
            earliest = t
    return earliest


# ---------------------------------------------------------------------------
# Labeling function registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabelingFunctionDef:
    name: str
    fn: Callable[[LabelWindow, dict], Label | None]
    data_fields: Callable[[EntitySet, dict], list[tuple[str, str]]]


LABELING_FUNCTIONS: dict[str, LabelingFunctionDef] = {}


def register_labeling_function(name: str, *, data_fields=None):
    """Register a labeling plug-in usable by name in run configurations."""

    def decorate(fn):
        LABELING_FUNCTIONS[name] = LabelingFunctionDef(
            name, fn, data_fields or (lambda es, params: [])
        )
        return fn

    return decorate


def get_labeling_function(name: str) -> LabelingFunctionDef:
    try:
        return LABELING_FUNCTIONS[name]
    except KeyError:
        raise ConfigError(f"unknown labeling function {name!r}") from None


def _event_fields(es: EntitySet, params: dict) -> list[tuple[str, str]]:
    entity = es.entity(params["entity"])
    return [(entity.name, entity.time_index)] if entity.time_index else []


@register_labeling_function("exists_event", data_fields=_event_fields)
def exists_event(window: LabelWindow, params: dict) -> Label | None:
    """True iff the instance has at least one event of the given entity."""
    rows = window.rows(params["entity"])
    if not rows and params.get("skip_if_no_rows"):
        return None
    return len(rows) >= 1


@register_labeling_function("count_events_threshold", data_fields=_event_fields)
def count_events_threshold(window: LabelWindow, params: dict) -> Label | None:
    rows = window.rows(params["entity"])
    if not rows and params.get("skip_if_no_rows"):
        return None
    return len(rows) >= int(params["min_count"])


def _sum_fields(es: EntitySet, params: dict) -> list[tuple[str, str]]:
    return _event_fields(es, params) + [(params["entity"], params["column"])]


@register_labeling_function("sum_column_threshold", data_fields=_sum_fields)
def sum_column_threshold(window: LabelWindow, params: dict) -> Label | None:
    rows = window.rows(params["entity"])
    if not rows and params.get("skip_if_no_rows"):
        return None
    column = params["column"]
    total = sum(r[column] for r in rows if r[column] is not None)
    return total >= float(params["threshold"])


# ---------------------------------------------------------------------------
# Search parameters and label-times
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabelSearchParams:
    prediction_window: Duration
    lead: Duration = ZERO
    gap: Duration = ZERO
    examples_per_instance: int | None = None  # None = unlimited
    min_training_data: Duration = ZERO
    strategy: str = "fixed"
    offset: Duration | None = None  # defaults to the prediction window
    seed: int = 0

    def validate(self) -> None:
        if self.prediction_window.seconds <= 0:
            raise ConfigError("prediction_window must be positive")
        if self.lead.seconds < 0 or self.gap.seconds < 0 or self.min_training_data.seconds < 0:
            raise ConfigError("lead, gap, and min_training_data must be non-negative")
        if self.strategy not in ("fixed", "random"):
            raise ConfigError(f"unknown search strategy {self.strategy!r}")
        if self.offset is not None and self.offset.seconds <= 0:
            raise ConfigError("offset must be positive")
        if self.examples_per_instance is not None and self.examples_per_instance < 1:
            raise ConfigError("examples_per_instance must be a positive integer or unlimited")

    @property
    def offset_seconds(self) -> int:
        return (self.offset or self.prediction_window).seconds


@dataclass(frozen=True)
class LabelRow:
    instance_id: str
    label: Label
    cutoff_time: int


@dataclass
class LabelTimes:
    """Sorted (instance, label, cutoff_time) triples plus their provenance."""

    rows: list[LabelRow]
    target_entity: str
    search_params: LabelSearchParams | None = None

    def __len__(self) -> int:
        return len(self.rows)

    def instance_ids(self) -> list[str]:
        return [r.instance_id for r in self.rows]

    def cutoffs(self) -> list[int]:
        return [r.cutoff_time for r in self.rows]

    def labels(self) -> list[Label]:
        return [r.label for r in self.rows]

    def bool_labels(self) -> list[bool]:
        out = []
        for r in self.rows:
            if not isinstance(r.label, bool):
                raise DataError(
                    f"label {r.label!r} is not boolean; modeling supports binary labels only"
                )
            out.append(r.label)
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["instance_id", "label", "cutoff_time"])
            for row in self.rows:
                writer.writerow([row.instance_id, render_label(row.label), render_timestamp(row.cutoff_time)])

    @staticmethod
    def read_csv(path, target_entity: str) -> "LabelTimes":
        rows = []
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["instance_id", "label", "cutoff_time"]:
                raise DataError(f"unexpected label-times header {header!r} in {path}")
            for rec in reader:
                rows.append(LabelRow(rec[0], parse_label(rec[1]), parse_timestamp(rec[2])))
        return LabelTimes(rows, target_entity)


def render_label(label: Label) -> str:
    if isinstance(label, bool):
        return "true" if label else "false"
    return str(label)


def parse_label(text: str) -> Label:
    if text == "true":
        return True
    if text == "false":
        return False
    return text


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


def candidate_grid(start: int, end: int, prediction_window: int, offset: int) -> list[int]:
    """Window starts {start + k*offset} that fit inside [start, end)."""
    upper = end - prediction_window
    out = []
    t = start
    while t <= upper:
        out.append(t)
        t += offset
    return out


def apply_labeling_function(
    es: EntitySet,
    target_entity: str,
    f: LabelingFunctionDef | str,
    instance_id: str,
    timestamp: int,
    params: LabelSearchParams,
    labeling_params: dict | None = None,
) -> tuple[Label | None, int]:
    """Evaluate the labeling function at one window start; cutoff = t - lead."""
    fdef = get_labeling_function(f) if isinstance(f, str) else f
    target = es.entity(target_entity)
    row = target.index_positions.get(instance_id)
    if row is None:
        raise UnknownInstanceError(target_entity, instance_id)
    window = LabelWindow(
        es, target_entity, row, timestamp, timestamp + params.prediction_window.seconds
    )
    label = fdef.fn(window, labeling_params or {})
    return label, timestamp - params.lead.seconds


def search_training_examples(
    es: EntitySet,
    target_entity: str,
    f: LabelingFunctionDef | str,
    params: LabelSearchParams,
    search_range: tuple[int, int],
    labeling_params: dict | None = None,
) -> LabelTimes:
    """Traverse every instance's timeline and emit constrained label-times."""
    params.validate()
    fdef = get_labeling_function(f) if isinstance(f, str) else f
    start, end = search_range
    if start >= end:
        raise ConfigError("search range start must precede end")
    labeling_params = labeling_params or {}

    target = es.entity(target_entity)
    grid = candidate_grid(start, end, params.prediction_window.seconds, params.offset_seconds)
    pw = params.prediction_window.seconds
    lead = params.lead.seconds
    gap = params.gap.seconds
    mtd = params.min_training_data.seconds
    budget = params.examples_per_instance

    rows: list[LabelRow] = []
    for instance_row in range(target.n_rows):
        instance_id = target.columns[target.index][instance_row]
        if params.strategy == "random":
            rng = random.Random(f"{params.seed}|{instance_id}")
            order = rng.sample(range(len(grid)), k=len(grid))
        else:
            order = range(len(grid))
        emitted: list[int] = []
        first_event: float | None = None
        first_event_known = False
        for k in order:
            if budget is not None and len(emitted) >= budget:
                break
            t = grid[k]
            cutoff = t - lead
            if mtd > 0:
                if not first_event_known:
                    first_event = first_event_time(es, target_entity, instance_row)
                    first_event_known = True
                if first_event is None or cutoff - first_event < mtd:
                    continue
            if gap > 0 and any(abs(cutoff - prev) < gap for prev in emitted):
                continue
            window = LabelWindow(es, target_entity, instance_row, t, t + pw)
            try:
                label = fdef.fn(window, labeling_params)
            except Exception as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise LabelingError(str(instance_id), render_timestamp(t), exc) from exc
            if label is None:
                continue
            emitted.append(cutoff)
            rows.append(LabelRow(instance_id, label, cutoff))

    rows.sort(key=lambda r: (r.cutoff_time, r.instance_id))
    return LabelTimes(rows, target_entity, params)
