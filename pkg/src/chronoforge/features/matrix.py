"""Point-in-time-correct feature matrix computation.

Every cell is the feature evaluated on data visible strictly before
that row's cutoff, optionally further restricted to the training
window. Rows align 1:1 with the label-times; the label column, when
present, comes last.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from chronoforge import _kernels as K
from chronoforge.entityset import STRING_BACKED, Entity, EntitySet
from chronoforge.errors import ConfigError, DataError, SchemaDriftError, UnknownInstanceError
from chronoforge.features.definitions import (
    AggregationFeature,
    DfsParams,
    FeatureDefinition,
    RawVariable,
    TransformFeature,
    feature_name,
    referenced_fields,
)
from chronoforge.labeling import Label, LabelTimes, parse_label, render_label

_AGG_OPS = {
    "COUNT": K.OP_COUNT,
    "SUM": K.OP_SUM,
    "MEAN": K.OP_MEAN,
    "MIN": K.OP_MIN,
    "MAX": K.OP_MAX,
    "STD": K.OP_STD,
}


# ---------------------------------------------------------------------------
# Transform semantics
# ---------------------------------------------------------------------------


def percentile_ranks(values: np.ndarray) -> np.ndarray:
    """Fractional average ranks in (0, 1]; nulls stay null and are excluded."""
    out = np.full(len(values), np.nan)
    valid = ~np.isnan(values)
    vals = values[valid]
    n = len(vals)
    if n == 0:
        return out
    order = np.argsort(vals, kind="stable")
    sorted_vals = vals[order]
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0  # average of 1-based ranks
        i = j + 1
    out[valid] = ranks / n
    return out


def _weekday_numbers(epochs: np.ndarray) -> np.ndarray:
    # epoch day 0 (1970-01-01) was a Thursday, i.e. weekday 3 with Monday=0
    days = np.floor_divide(epochs, 86400.0)
    return np.mod(days + 3.0, 7.0)


def apply_static_transform(primitive: str, values: np.ndarray) -> tuple[np.ndarray, str]:
    """Cutoff-independent element-wise transforms; returns (values, kind)."""
    nan_mask = np.isnan(values)
    if primitive == "WEEKEND":
        wd = _weekday_numbers(values)
        out = np.where(nan_mask, np.nan, (wd >= 5.0).astype(np.float64))
        return out, "boolean"
    if primitive == "WEEKDAY":
        return np.where(nan_mask, np.nan, _weekday_numbers(values)), "numeric"
    if primitive in ("DAY", "MONTH"):
        out = np.full(len(values), np.nan)
        for i, v in enumerate(values):
            if v == v:
                dt = datetime.fromtimestamp(int(v), tz=timezone.utc)
                out[i] = float(dt.day if primitive == "DAY" else dt.month)
        return out, "numeric"
    raise ConfigError(f"{primitive} is not a static transform")


# ---------------------------------------------------------------------------
# Matrix container
# ---------------------------------------------------------------------------


@dataclass
class FeatureMatrix:
    feature_names: list[str]
    columns: list[np.ndarray]  # float64; booleans encoded 1.0/0.0, null = NaN
    kinds: list[str]  # "numeric" | "boolean" per column
    instance_ids: list[str]
    cutoffs: list[int]
    labels: list[Label] | None = None

    @property
    def n_rows(self) -> int:
        return len(self.instance_ids)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def column_by_name(self, name: str) -> np.ndarray:
        try:
            return self.columns[self.feature_names.index(name)]
        except ValueError:
            raise ConfigError(f"matrix has no feature column {name!r}") from None

    def cell(self, row: int, col: int):
        value = float(self.columns[col][row])
        if value != value:
            return None
        if self.kinds[col] == "boolean":
            return bool(value)
        return value

    def select(self, names: list[str]) -> "FeatureMatrix":
        """Column subset in the given order; rows unchanged."""
        idx = [self.feature_names.index(n) for n in names]
        return FeatureMatrix(
            [self.feature_names[i] for i in idx],
            [self.columns[i] for i in idx],
            [self.kinds[i] for i in idx],
            self.instance_ids,
            self.cutoffs,
            self.labels,
        )

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            header = list(self.feature_names)
            if self.labels is not None:
                header.append("label")
            writer.writerow(header)
            for row in range(self.n_rows):
                record = []
                for col in range(self.n_features):
                    value = self.cell(row, col)
                    if value is None:
                        record.append("")
                    elif self.kinds[col] == "boolean":
                        record.append("true" if value else "false")
                    else:
                        record.append(repr(value))
                if self.labels is not None:
                    record.append(render_label(self.labels[row]))
                writer.writerow(record)

    @staticmethod
    def read_csv(path, instance_ids: list[str], cutoffs: list[int]) -> "FeatureMatrix":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            records = list(reader)
        has_label = bool(header) and header[-1] == "label"
        names = header[:-1] if has_label else list(header)
        if len(records) != len(instance_ids):
            raise DataError(
                f"feature matrix {path} has {len(records)} rows, expected {len(instance_ids)}"
            )
        n = len(records)
        columns = [np.full(n, np.nan) for _ in names]
        kinds = ["numeric"] * len(names)
        labels: list[Label] | None = [] if has_label else None
        for r, record in enumerate(records):
            for c in range(len(names)):
                text = record[c]
                if text == "":
                    continue
                if text in ("true", "false"):
                    kinds[c] = "boolean"
                    columns[c][r] = 1.0 if text == "true" else 0.0
                else:
                    columns[c][r] = float(text)
            if labels is not None:
                labels.append(parse_label(record[len(names)]))
        return FeatureMatrix(names, columns, kinds, instance_ids, cutoffs, labels)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _dispatch(agg: str, values: np.ndarray, times: np.ndarray | None,
              starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=np.float64)
    if agg == "TREND":
        t = times if times is not None else np.full(len(values), np.nan)
        return K.agg_trend(values, np.ascontiguousarray(t, dtype=np.float64), starts, ends)
    if agg == "PERCENT":
        return K.agg_basic(K.OP_MEAN, values, starts, ends)
    return K.agg_basic(_AGG_OPS[agg], values, starts, ends)


def _cutoff_groups(cutoffs: np.ndarray):
    for cutoff in sorted(set(cutoffs.tolist())):
        yield cutoff, np.nonzero(cutoffs == cutoff)[0]


def _eval_aggregation(
    es: EntitySet,
    base_entity: str,
    feature: AggregationFeature,
    row_idx: np.ndarray,
    cutoffs: np.ndarray,
    window: int | None,
) -> np.ndarray:
    pidx = es.path_index(base_entity, feature.path)
    terminal = pidx.terminal
    n = len(row_idx)
    starts = np.empty(n, dtype=np.int64)
    ends = np.empty(n, dtype=np.int64)
    for i in range(n):
        starts[i], ends[i] = pidx.window_bounds(int(row_idx[i]), float(cutoffs[i]), window)
    times = pidx.sorted_times
    inner = feature.input
    agg = feature.primitive

    if isinstance(inner, RawVariable):
        stype = terminal.semantic_type(inner.column)
        if agg == "NUM_UNIQUE":
            codes, vocab = terminal.codes(inner.column)
            codes_sorted = np.ascontiguousarray(codes[pidx.sorted_rows])
            return K.agg_num_unique(codes_sorted, len(vocab), starts, ends)
        if stype in STRING_BACKED:  # COUNT over string-backed input counts non-nulls
            codes, _ = terminal.codes(inner.column)
            values = np.where(codes >= 0, 1.0, np.nan)[pidx.sorted_rows]
        else:
            values = terminal.float_column(inner.column)[pidx.sorted_rows]
        return _dispatch(agg, values, times, starts, ends)

    if isinstance(inner, TransformFeature):
        col = terminal.float_column(inner.column)
        if inner.primitive == "PERCENTILE":
            # rank within the entity's rows available at each cutoff
            vals_sorted = col[pidx.sorted_rows]
            out = np.full(n, np.nan)
            for cutoff, sel in _cutoff_groups(cutoffs):
                if times is None:
                    population = vals_sorted
                else:
                    mask = times < cutoff
                    if window is not None:
                        mask &= times >= cutoff - window
                    population = np.where(mask, vals_sorted, np.nan)
                ranks = percentile_ranks(population)
                out[sel] = _dispatch(agg, ranks, times, starts[sel], ends[sel])
            return out
        transformed, _ = apply_static_transform(inner.primitive, col)
        return _dispatch(agg, transformed[pidx.sorted_rows], times, starts, ends)

    # nested aggregation: inner values depend on the cutoff
    out = np.full(n, np.nan)
    all_rows = np.arange(terminal.n_rows, dtype=np.int64)
    for cutoff, sel in _cutoff_groups(cutoffs):
        inner_vals = _eval_aggregation(
            es, terminal.name, inner, all_rows, np.full(terminal.n_rows, cutoff), window
        )
        values = inner_vals[pidx.sorted_rows]
        out[sel] = _dispatch(agg, values, times, starts[sel], ends[sel])
    return out


def _eval_target_transform(
    es: EntitySet,
    target: Entity,
    feature: TransformFeature,
    row_idx: np.ndarray,
    cutoffs: np.ndarray,
    window: int | None,
) -> tuple[np.ndarray, str]:
    col = target.float_column(feature.column)
    times = target.times
    n = len(row_idx)

    def visible_bounds(cutoff: float) -> tuple[int, int]:
        if times is None:
            return 0, target.n_rows
        hi = int(np.searchsorted(times, cutoff, side="left"))
        lo = 0 if window is None else int(np.searchsorted(times, cutoff - window, side="left"))
        return lo, hi

    if feature.primitive == "PERCENTILE":
        out = np.full(n, np.nan)
        for cutoff, sel in _cutoff_groups(cutoffs):
            lo, hi = visible_bounds(float(cutoff))
            ranks = percentile_ranks(col[lo:hi])
            for p in sel:
                row = int(row_idx[p])
                if lo <= row < hi:
                    out[p] = ranks[row - lo]
        return out, "numeric"

    transformed, kind = apply_static_transform(feature.primitive, col)
    out = np.full(n, np.nan)
    for p in range(n):
        row = int(row_idx[p])
        lo, hi = visible_bounds(float(cutoffs[p]))
        if lo <= row < hi:
            out[p] = transformed[row]
    return out, kind


def _check_fields(es: EntitySet, feature: FeatureDefinition) -> None:
    for entity, column in sorted(referenced_fields(feature, es)):
        if not es.has_variable(entity, column):
            raise SchemaDriftError(entity, column)


def calculate_feature_matrix(
    es: EntitySet,
    label_times: LabelTimes | list[tuple[str, int]],
    feature_list: list[FeatureDefinition],
    params: DfsParams,
) -> FeatureMatrix:
    """Evaluate every feature at every (instance, cutoff) row."""
    if not feature_list:
        raise ConfigError("feature_list must not be empty")
    if isinstance(label_times, LabelTimes):
        ids = label_times.instance_ids()
        cutoff_list = label_times.cutoffs()
        labels = label_times.labels()
    else:
        ids = [i for i, _ in label_times]
        cutoff_list = [c for _, c in label_times]
        labels = None

    target = es.entity(params.target_entity)
    row_idx = np.empty(len(ids), dtype=np.int64)
    for i, instance_id in enumerate(ids):
        row = target.index_positions.get(instance_id)
        if row is None:
            raise UnknownInstanceError(params.target_entity, instance_id)
        row_idx[i] = row
    cutoffs = np.array(cutoff_list, dtype=np.float64)
    window = params.window_seconds

    names: list[str] = []
    columns: list[np.ndarray] = []
    kinds: list[str] = []
    for feature in feature_list:
        _check_fields(es, feature)
        if isinstance(feature, TransformFeature):
            values, kind = _eval_target_transform(es, target, feature, row_idx, cutoffs, window)
        else:
            values = _eval_aggregation(es, params.target_entity, feature, row_idx, cutoffs, window)
            kind = "numeric"
        names.append(feature_name(feature))
        columns.append(values)
        kinds.append(kind)
    return FeatureMatrix(names, columns, kinds, list(ids), list(cutoff_list), labels)


# ---------------------------------------------------------------------------
# Feature selection
# ---------------------------------------------------------------------------


def select_features(
    matrix: FeatureMatrix,
    labels: list[Label],
    n_features: int,
    method: str = "random_forest_importance",
) -> list[str]:
    """Keep the n most important features by forest impurity decrease."""
    from chronoforge.modeling.encoding import TrainingEncoder
    from chronoforge.modeling.learners import RandomForest

    if method != "random_forest_importance":
        raise ConfigError(f"unknown feature selection method {method!r}")
    if n_features > matrix.n_features:
        raise ConfigError(
            f"n_features={n_features} exceeds the {matrix.n_features} available features"
        )
    if len(labels) != matrix.n_rows:
        raise ConfigError("labels are not aligned with the matrix rows")
    y = np.array([1.0 if bool(v) else 0.0 for v in labels])
    if len(set(y.tolist())) < 2:
        raise DataError(
            "feature selection needs both classes in the labels; skip selection for this run"
        )

    encoder = TrainingEncoder.fit(matrix.columns, matrix.kinds, matrix.feature_names)
    X = encoder.transform(matrix.columns, matrix.kinds, matrix.feature_names)
    forest = RandomForest(
        n_estimators=20, criterion="gini", max_features=1.0, max_depth=8,
        min_samples_split=2, min_samples_leaf=1,
    )
    forest.fit(X, y, seed=0)
    importances = forest.feature_importances()
    ranked = sorted(
        zip(matrix.feature_names, importances), key=lambda pair: (-pair[1], pair[0])
    )
    selected = {name for name, _ in ranked[:n_features]}
    return [name for name in sorted(selected)]
