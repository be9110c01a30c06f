"""model_provenance.json: assembly, validation, and drift checking.

The document echoes every configured hyperparameter byte-identically
(duration text like "56 days" included), records per-seed test results,
and carries the deployment block whose expected feature value ranges
and data_fields_used drive the production drift checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from chronoforge.entityset import EntitySet
from chronoforge.errors import ConfigError, SchemaError
from chronoforge.features.definitions import FeatureDefinition, referenced_fields
from chronoforge.features.matrix import FeatureMatrix
from chronoforge.jsonutil import canonical_dumps, format_range_bound, format_significant
from chronoforge.timeutil import parse_duration, parse_timestamp, DurationParseError, TimestampParseError

RESULT_FIELDS = ("random_seed", "threshold", "precision", "recall", "fpr", "auc")
_METRIC_FIELDS = ("precision", "recall", "fpr", "auc")


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


def expected_value_ranges(matrix: FeatureMatrix) -> dict[str, tuple[float, float]]:
    """Per-feature [min, max] of the training split; numeric features only."""
    ranges: dict[str, tuple[float, float]] = {}
    for name, column, kind in zip(matrix.feature_names, matrix.columns, matrix.kinds):
        if kind not in ("numeric", "boolean"):
            continue
        values = [float(v) for v in column.tolist() if v == v]
        if not values:
            continue
        ranges[name] = (min(values), max(values))
    return ranges


def data_fields_used(
    es: EntitySet,
    feature_list: list[FeatureDefinition],
    labeling_fields: list[tuple[str, str]],
) -> dict[str, list[str]]:
    """Exactly the entity/variable pairs the final pipeline reads."""
    pairs: set[tuple[str, str]] = set(labeling_fields)
    for feature in feature_list:
        pairs |= referenced_fields(feature, es)
    out: dict[str, list[str]] = {}
    for entity, column in sorted(pairs):
        out.setdefault(entity, []).append(column)
    return out


def assemble_provenance(
    *,
    metadata_path: str,
    prediction_engineering: dict,
    feature_engineering: dict,
    modeling: dict,
    data_splits: list[dict],
    training_setup: dict,
    results_test: list[dict],
    deployment_executable: str,
    feature_list_path: str,
    model_path: str,
    threshold: float,
    es: EntitySet,
    feature_list: list[FeatureDefinition],
    labeling_fields: list[tuple[str, str]],
    train_matrix: FeatureMatrix,
) -> dict:
    """Build the document from run artifacts; missing pieces raise."""
    blocks = {
        "metadata path": metadata_path,
        "prediction_engineering block": prediction_engineering,
        "feature_engineering block": feature_engineering,
        "modeling block": modeling,
        "data_splits block": data_splits,
        "training_setup block": training_setup,
        "test results": results_test,
    }
    for label, value in blocks.items():
        if not value:
            raise ConfigError(f"cannot assemble provenance: missing {label}")
    ranges = {
        name: {"min": lo, "max": hi}
        for name, (lo, hi) in expected_value_ranges(train_matrix).items()
    }
    return {
        "metadata": metadata_path,
        "prediction_engineering": prediction_engineering,
        "feature_engineering": [feature_engineering],
        "modeling": modeling,
        "data_splits": data_splits,
        "training_setup": training_setup,
        "results": {"test": results_test},
        "deployment": {
            "deployment_executable": deployment_executable,
            "deployment_parameters": {
                "feature_list_path": feature_list_path,
                "model_path": model_path,
                "threshold": threshold,
            },
            "integration_and_validation": {
                "data_fields_used": data_fields_used(es, feature_list, labeling_fields),
                "expected_feature_value_ranges": ranges,
            },
        },
    }


def emit_provenance(doc: dict) -> str:
    """Canonical bytes: metrics at 6 significant digits, ranges directed-rounded."""
    shaped = json.loads(json.dumps(doc))  # deep copy, strips wrapper types
    for record in shaped.get("results", {}).get("test", []):
        for key in _METRIC_FIELDS:
            if isinstance(record.get(key), float):
                record[key] = format_significant(record[key])
    iv = shaped.get("deployment", {}).get("integration_and_validation", {})
    for bounds in iv.get("expected_feature_value_ranges", {}).values():
        if isinstance(bounds.get("min"), float):
            bounds["min"] = format_range_bound(bounds["min"], kind="min")
        if isinstance(bounds.get("max"), float):
            bounds["max"] = format_range_bound(bounds["max"], kind="max")
    return canonical_dumps(shaped)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _need(obj: dict, key: str, pointer: str):
    if key not in obj:
        raise SchemaError(f"{pointer}/{key}", "missing required key")
    return obj[key]


def _need_str(obj: dict, key: str, pointer: str) -> str:
    value = _need(obj, key, pointer)
    if not isinstance(value, str):
        raise SchemaError(f"{pointer}/{key}", "expected string")
    return value


def _need_obj(obj: dict, key: str, pointer: str) -> dict:
    value = _need(obj, key, pointer)
    if not isinstance(value, dict):
        raise SchemaError(f"{pointer}/{key}", "expected object")
    return value


def _need_list(obj: dict, key: str, pointer: str) -> list:
    value = _need(obj, key, pointer)
    if not isinstance(value, list):
        raise SchemaError(f"{pointer}/{key}", "expected array")
    return value


def _check_duration(text: str, pointer: str) -> None:
    try:
        parse_duration(text)
    except DurationParseError:
        raise SchemaError(pointer, f"not a valid duration: {text!r}") from None


def _check_timestamp(text: str, pointer: str) -> None:
    try:
        parse_timestamp(text)
    except TimestampParseError:
        raise SchemaError(pointer, f"not a valid timestamp: {text!r}") from None


def _check_unit(value, pointer: str, allow_null: bool = False) -> None:
    if value is None and allow_null:
        return
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(pointer, "expected number")
    if not 0.0 <= float(value) <= 1.0:
        raise SchemaError(pointer, f"value {value!r} outside [0, 1]")


def validate_provenance(text: str) -> dict:
    """Parse and validate; returns the document dict."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("", "document root must be an object")

    _need_str(doc, "metadata", "")

    pe = _need_obj(doc, "prediction_engineering", "")
    _need_str(pe, "labeling_function", "/prediction_engineering")
    for key in ("prediction_window", "min_training_data", "lead"):
        _check_duration(_need_str(pe, key, "/prediction_engineering"), f"/prediction_engineering/{key}")

    fe = _need_list(doc, "feature_engineering", "")
    if not fe:
        raise SchemaError("/feature_engineering", "expected at least one block")
    for i, block in enumerate(fe):
        pointer = f"/feature_engineering/{i}"
        if not isinstance(block, dict):
            raise SchemaError(pointer, "expected object")
        _need_str(block, "method", pointer)
        window = _need(block, "training_window", pointer)
        if window is not None:
            if not isinstance(window, str):
                raise SchemaError(f"{pointer}/training_window", "expected duration string or null")
            _check_duration(window, f"{pointer}/training_window")
        for key in ("aggregate_primitives", "transform_primitives"):
            prims = _need_list(block, key, pointer)
            for j, prim in enumerate(prims):
                if not isinstance(prim, str):
                    raise SchemaError(f"{pointer}/{key}/{j}", "expected string")
        ignore = _need(block, "ignore_variables", pointer)
        if not isinstance(ignore, dict):
            raise SchemaError(f"{pointer}/ignore_variables", "expected object")
        for entity, names in ignore.items():
            if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
                raise SchemaError(f"{pointer}/ignore_variables/{entity}", "expected array of strings")
        selection = block.get("feature_selection")
        if selection is not None:
            if not isinstance(selection, dict):
                raise SchemaError(f"{pointer}/feature_selection", "expected object")
            _need_str(selection, "method", f"{pointer}/feature_selection")
            n = _need(selection, "n_features", f"{pointer}/feature_selection")
            if isinstance(n, bool) or not isinstance(n, int) or n < 1:
                raise SchemaError(f"{pointer}/feature_selection/n_features", "expected positive integer")

    modeling = _need_obj(doc, "modeling", "")
    methods = _need_list(modeling, "methods", "/modeling")
    if not methods:
        raise SchemaError("/modeling/methods", "expected at least one method")
    for i, method in enumerate(methods):
        pointer = f"/modeling/methods/{i}"
        if not isinstance(method, dict):
            raise SchemaError(pointer, "expected object")
        _need_str(method, "method", pointer)
        _need_str(method, "hyperparameter_options", pointer)
    budget = _need(modeling, "budget", "/modeling")
    if isinstance(budget, bool) or not isinstance(budget, (int, str)):
        raise SchemaError("/modeling/budget", "expected count or duration string")
    if isinstance(budget, int) and budget <= 0:
        raise SchemaError("/modeling/budget", "expected positive count")
    if isinstance(budget, str):
        _check_duration(budget, "/modeling/budget")
    _need_str(modeling, "automl_method", "/modeling")
    _need_str(modeling, "cost_function", "/modeling")
    elapsed = modeling.get("elapsed")
    if elapsed is not None and (isinstance(elapsed, bool) or not isinstance(elapsed, (int, float)) or elapsed < 0):
        raise SchemaError("/modeling/elapsed", "expected non-negative number")

    splits = _need_list(doc, "data_splits", "")
    if not splits:
        raise SchemaError("/data_splits", "expected at least one split")
    by_id: dict[str, dict] = {}
    for i, split in enumerate(splits):
        pointer = f"/data_splits/{i}"
        if not isinstance(split, dict):
            raise SchemaError(pointer, "expected object")
        split_id = _need_str(split, "id", pointer)
        if split_id in by_id:
            raise SchemaError(f"{pointer}/id", f"duplicate split id {split_id!r}")
        by_id[split_id] = split
        _check_timestamp(_need_str(split, "start_time", pointer), f"{pointer}/start_time")
        _check_timestamp(_need_str(split, "end_time", pointer), f"{pointer}/end_time")
        lsp = split.get("label_search_parameters")
        if lsp is not None and not isinstance(lsp, dict):
            raise SchemaError(f"{pointer}/label_search_parameters", "expected object")
    if {"train", "threshold-tuning", "test"} <= set(by_id):
        order = [parse_timestamp(by_id[i]["start_time"]) for i in ("train", "threshold-tuning", "test")]
        ends = [parse_timestamp(by_id[i]["end_time"]) for i in ("train", "threshold-tuning", "test")]
        if not (order[0] < order[1] < order[2]) or ends[0] > order[1] or ends[1] > order[2]:
            raise SchemaError("/data_splits", "splits must be chronological and non-overlapping")

    setup = _need_obj(doc, "training_setup", "")
    for key in ("training", "tuning", "testing"):
        block = _need_obj(setup, key, "/training_setup")
        _need_str(block, "data_split_id", f"/training_setup/{key}")
        _need_str(block, "validation_method", f"/training_setup/{key}")

    results = _need_obj(doc, "results", "")
    test = _need_list(results, "test", "/results")
    if not test:
        raise SchemaError("/results/test", "expected at least one record")
    for i, record in enumerate(test):
        pointer = f"/results/test/{i}"
        if not isinstance(record, dict):
            raise SchemaError(pointer, "expected object")
        for key in RESULT_FIELDS:
            if key not in record:
                raise SchemaError(f"{pointer}/{key}", "missing required key")
        extra = set(record) - set(RESULT_FIELDS)
        if extra:
            raise SchemaError(pointer, f"unexpected keys {sorted(extra)}")
        seed = record["random_seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise SchemaError(f"{pointer}/random_seed", "expected non-negative integer")
        _check_unit(record["threshold"], f"{pointer}/threshold")
        for key in _METRIC_FIELDS:
            _check_unit(record[key], f"{pointer}/{key}", allow_null=True)

    deployment = _need_obj(doc, "deployment", "")
    _need_str(deployment, "deployment_executable", "/deployment")
    params = _need_obj(deployment, "deployment_parameters", "/deployment")
    _need_str(params, "feature_list_path", "/deployment/deployment_parameters")
    _need_str(params, "model_path", "/deployment/deployment_parameters")
    _check_unit(
        _need(params, "threshold", "/deployment/deployment_parameters"),
        "/deployment/deployment_parameters/threshold",
    )
    iv = _need_obj(deployment, "integration_and_validation", "/deployment")
    fields = _need_obj(iv, "data_fields_used", "/deployment/integration_and_validation")
    for entity, names in fields.items():
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise SchemaError(
                f"/deployment/integration_and_validation/data_fields_used/{entity}",
                "expected array of strings",
            )
    ranges = _need_obj(iv, "expected_feature_value_ranges", "/deployment/integration_and_validation")
    for name, bounds in ranges.items():
        pointer = f"/deployment/integration_and_validation/expected_feature_value_ranges/{name}"
        if not isinstance(bounds, dict):
            raise SchemaError(pointer, "expected object")
        lo = _need(bounds, "min", pointer)
        hi = _need(bounds, "max", pointer)
        for key, value in (("min", lo), ("max", hi)):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise SchemaError(f"{pointer}/{key}", "expected number")
        if float(lo) > float(hi):
            raise SchemaError(pointer, "min exceeds max")
    return doc


# ---------------------------------------------------------------------------
# Drift checks
# ---------------------------------------------------------------------------


@dataclass
class DriftReport:
    entries: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.entries

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.entries)


def check_drift(doc: dict, matrix: FeatureMatrix, es: EntitySet | None = None) -> DriftReport:
    """Advisory report: out-of-range feature values and missing data fields."""
    report = DriftReport()
    iv = doc.get("deployment", {}).get("integration_and_validation", {})
    ranges = iv.get("expected_feature_value_ranges", {})
    for col, name in enumerate(matrix.feature_names):
        bounds = ranges.get(name)
        if bounds is None:
            continue  # feature without a declared range is unchecked
        lo, hi = float(bounds["min"]), float(bounds["max"])
        for row in range(matrix.n_rows):
            value = matrix.cell(row, col)
            if value is None:
                continue
            value = float(value)
            if value < lo or value > hi:
                report.entries.append(
                    {
                        "kind": "OutOfRange",
                        "feature": name,
                        "row": row,
                        "value": value,
                        "min": lo,
                        "max": hi,
                    }
                )
    if es is not None:
        for entity, names in sorted(iv.get("data_fields_used", {}).items()):
            for column in names:
                if not es.has_variable(entity, column):
                    report.entries.append(
                        {"kind": "MissingField", "entity": entity, "column": column}
                    )
    return report
