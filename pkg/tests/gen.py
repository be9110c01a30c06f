"""Randomized entityset fixtures for the property and acceptance suites.

Schemas are trees: a timeless root (the target), time-indexed child
event tables, and optional grandchildren (timeless junction rows that
inherit their parent's availability, or time-indexed detail rows).
Foreign keys are always populated. All sizes stay small (<= 6 entities,
<= 300 rows).
"""

from __future__ import annotations

import random

import numpy as np

from chronoforge.entityset import Entity, EntitySet, Relationship, Variable

BASE_TIME = 1388534400  # 2014-01-01T00:00:00Z
YEAR = 365 * 86400


def _make_entity(name, variables, index, time_index, columns, n_rows) -> Entity:
    typed: dict = {}
    for var in variables:
        values = columns[var.name]
        if var.semantic_type in ("numeric", "boolean", "datetime", "time_index",
                                 "latitude", "longitude"):
            typed[var.name] = np.array(
                [v if v is not None else np.nan for v in values], dtype=np.float64
            )
        else:
            typed[var.name] = list(values)
    if time_index is not None and n_rows:
        order = np.argsort(typed[time_index], kind="stable")
        for cname, col in typed.items():
            if isinstance(col, np.ndarray):
                typed[cname] = col[order]
            else:
                typed[cname] = [col[i] for i in order]
    return Entity(name, tuple(variables), index, time_index, typed, n_rows)


def _value_columns(rng: random.Random, prefix: str, n_rows: int) -> tuple[list[Variable], dict]:
    """1-3 random value columns with occasional nulls."""
    variables = []
    columns = {}
    n_cols = rng.randint(1, 3)
    for c in range(n_cols):
        kind = rng.choice(["numeric", "numeric", "boolean", "categorical"])
        name = f"{prefix}_v{c}"
        variables.append(Variable(name, kind))
        values = []
        for _ in range(n_rows):
            if rng.random() < 0.08:
                values.append(None)
            elif kind == "numeric":
                values.append(round(rng.uniform(-50.0, 350.0), 3))
            elif kind == "boolean":
                values.append(1.0 if rng.random() < 0.5 else 0.0)
            else:
                values.append(rng.choice(["red", "green", "blue", "black"]))
        columns[name] = values
    return variables, columns


def random_entityset(rng: random.Random) -> EntitySet:
    n_root = rng.randint(3, 8)
    root_vars = [Variable("rid", "index")]
    root_cols: dict = {"rid": [f"r{i}" for i in range(n_root)]}
    extra_vars, extra_cols = _value_columns(rng, "root", n_root)
    root_vars.extend(extra_vars)
    root_cols.update(extra_cols)
    entities = {
        "root": _make_entity("root", root_vars, "rid", None, root_cols, n_root)
    }
    relationships: list[Relationship] = []

    rows_left = 280 - n_root
    n_children = rng.randint(1, 3)
    child_names = []
    for c in range(n_children):
        name = f"events{c}"
        child_names.append(name)
        n_rows = rng.randint(2, max(3, min(40, rows_left)))
        rows_left -= n_rows
        variables = [
            Variable(f"{name}_id", "index"),
            Variable("rid", "id"),
            Variable("happened", "time_index"),
        ]
        columns: dict = {
            f"{name}_id": [f"{name}_{i}" for i in range(n_rows)],
            "rid": [rng.choice(root_cols["rid"]) for _ in range(n_rows)],
            "happened": [float(BASE_TIME + rng.randint(0, YEAR)) for _ in range(n_rows)],
        }
        value_vars, value_cols = _value_columns(rng, name, n_rows)
        variables.extend(value_vars)
        columns.update(value_cols)
        entities[name] = _make_entity(name, variables, f"{name}_id", "happened", columns, n_rows)
        relationships.append(Relationship("root", "rid", name, "rid"))

    n_grand = rng.randint(0, min(2, 6 - 1 - n_children))
    for g in range(n_grand):
        parent_name = rng.choice(child_names)
        parent_ids = entities[parent_name].columns[f"{parent_name}_id"]
        name = f"detail{g}"
        n_rows = rng.randint(2, max(3, min(40, rows_left)))
        rows_left -= n_rows
        timeless = rng.random() < 0.5
        variables = [
            Variable(f"{name}_id", "index"),
            Variable(f"{parent_name}_id", "id"),
        ]
        columns = {
            f"{name}_id": [f"{name}_{i}" for i in range(n_rows)],
            f"{parent_name}_id": [rng.choice(list(parent_ids)) for _ in range(n_rows)],
        }
        time_index = None
        if not timeless:
            time_index = "recorded"
            variables.append(Variable("recorded", "time_index"))
            columns["recorded"] = [float(BASE_TIME + rng.randint(0, YEAR)) for _ in range(n_rows)]
        value_vars, value_cols = _value_columns(rng, name, n_rows)
        variables.extend(value_vars)
        columns.update(value_cols)
        entities[name] = _make_entity(
            name, variables, f"{name}_id", time_index, columns, n_rows
        )
        relationships.append(
            Relationship(parent_name, f"{parent_name}_id", name, f"{parent_name}_id")
        )

    return EntitySet(f"random_{rng.randint(0, 10**6)}", entities, tuple(relationships), 1)


def random_cutoffs(rng: random.Random, es: EntitySet, count: int = 4) -> list[int]:
    """Cutoffs spanning the data range, including before-all and after-all."""
    latest = es.latest_time() or BASE_TIME
    cutoffs = {BASE_TIME - 86400, int(latest) + 86400}
    while len(cutoffs) < count + 2:
        cutoffs.add(BASE_TIME + rng.randint(0, YEAR + 86400))
    return sorted(cutoffs)
