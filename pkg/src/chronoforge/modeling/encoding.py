"""Imputation and categorical encoding, fit on the training split only.

Numeric nulls take the training median, boolean and categorical nulls
take the training mode; categorical values are label-encoded against a
training vocabulary with code 0 reserved for categories unseen at
training time. The fitted statistics travel inside the model artifact
so deployment transforms new data identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from chronoforge.errors import ConfigError


@dataclass(frozen=True)
class ColumnStats:
    name: str
    kind: str  # "numeric" | "boolean" | "categorical"
    fill: float | bool | str | None
    vocab: tuple[str, ...] | None = None  # categorical only; code = index + 1, 0 = unknown


def _median(values: list[float]) -> float:
    if not values:
        return 0.0
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2:
        return ordered[mid]
    return (ordered[mid - 1] + ordered[mid]) / 2.0


def _mode(values: list) -> object:
    counts: dict = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    # highest count, ties to the smallest value (False < True for booleans)
    return min(counts, key=lambda v: (-counts[v], v)) if counts else False


class TrainingEncoder:
    """Column-wise imputation + encoding statistics."""

    def __init__(self, stats: list[ColumnStats]) -> None:
        self.stats = stats

    @staticmethod
    def fit(columns: list, kinds: list[str], names: list[str]) -> "TrainingEncoder":
        stats: list[ColumnStats] = []
        for col, kind, name in zip(columns, kinds, names):
            if kind == "categorical":
                present = [v for v in col if v is not None]
                vocab = tuple(sorted(set(present)))
                fill = _mode(present) if present else (vocab[0] if vocab else None)
                stats.append(ColumnStats(name, kind, fill, vocab))
            elif kind == "boolean":
                arr = np.asarray(col, dtype=np.float64)
                present = [bool(v) for v in arr[~np.isnan(arr)].tolist()]
                stats.append(ColumnStats(name, kind, _mode(present)))
            else:
                arr = np.asarray(col, dtype=np.float64)
                stats.append(ColumnStats(name, kind, _median(arr[~np.isnan(arr)].tolist())))
        return TrainingEncoder(stats)

    def transform(self, columns: list, kinds: list[str], names: list[str]) -> np.ndarray:
        if names != [s.name for s in self.stats]:
            raise ConfigError("matrix columns do not match the fitted encoder")
        if not columns:
            return np.empty((0, 0))
        encoded: list[np.ndarray] = []
        for col, kind, stat in zip(columns, kinds, self.stats):
            if stat.kind == "categorical":
                lookup = {v: i + 1 for i, v in enumerate(stat.vocab or ())}
                fill_code = lookup.get(stat.fill, 0)
                values = np.array(
                    [lookup.get(v, 0) if v is not None else fill_code for v in col],
                    dtype=np.float64,
                )
            else:
                arr = np.asarray(col, dtype=np.float64).copy()
                fill = float(stat.fill) if stat.fill is not None else 0.0
                arr[np.isnan(arr)] = fill
                values = arr
            encoded.append(values)
        return np.column_stack(encoded)

    def to_json(self) -> list[dict]:
        out = []
        for s in self.stats:
            entry: dict = {"name": s.name, "kind": s.kind, "fill": s.fill}
            if s.kind == "categorical":
                entry["vocab"] = list(s.vocab or ())
            out.append(entry)
        return out

    @staticmethod
    def from_json(raw: list[dict]) -> "TrainingEncoder":
        stats = []
        for entry in raw:
            vocab = tuple(entry["vocab"]) if entry.get("vocab") is not None else None
            stats.append(ColumnStats(entry["name"], entry["kind"], entry["fill"], vocab))
        return TrainingEncoder(stats)
