"""Deployment runtime: the training operations, replayed in production.

A bundle is the serialized model, the feature list, the metadata, and
the provenance document. Integration testing appends new data and
scores every instance at one explicit current_time; production
validation recomputes features and labels at arbitrary timestamps and
compares the resulting metrics against the recorded test results.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from chronoforge.entityset import EntitySet, add_new_data
from chronoforge.errors import ChronoforgeError, ConfigError
from chronoforge.features.definitions import DfsParams, FeatureDefinition, parse_feature_list
from chronoforge.features.matrix import FeatureMatrix, calculate_feature_matrix
from chronoforge.jsonutil import canonical_dumps
from chronoforge.labeling import LabelSearchParams, LabelingFunctionDef, apply_labeling_function
from chronoforge.metadata import MetadataDocument, load_metadata
from chronoforge.modeling.costs import CostFunction, Predictions
from chronoforge.modeling.metrics import compute_metrics
from chronoforge.modeling.search import ModelArtifact
from chronoforge.provenance import validate_provenance
from chronoforge.timeutil import render_timestamp


@dataclass(frozen=True)
class PredictionRow:
    instance_id: str
    cutoff_time: int
    score: float
    decision: bool


def write_predictions_csv(rows: list[PredictionRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_id", "cutoff_time", "score", "decision"])
        for row in rows:
            writer.writerow(
                [
                    row.instance_id,
                    render_timestamp(row.cutoff_time),
                    repr(row.score),
                    "true" if row.decision else "false",
                ]
            )


@dataclass
class DeploymentBundle:
    model: ModelArtifact
    feature_list: list[FeatureDefinition]
    dfs_params: DfsParams
    metadata: MetadataDocument
    provenance: dict
    threshold: float

    @staticmethod
    def load(model_path, feature_list_path, metadata_path, provenance_path, es: EntitySet) -> "DeploymentBundle":
        """Load and cross-check the deployment artifacts."""
        with open(model_path, encoding="utf-8") as fh:
            model = ModelArtifact.from_json_text(fh.read())
        feature_list_bytes = Path(feature_list_path).read_bytes()
        feature_list, dfs_params = parse_feature_list(
            feature_list_bytes.decode("utf-8"), es
        )
        metadata = load_metadata(metadata_path)
        with open(provenance_path, encoding="utf-8") as fh:
            provenance = validate_provenance(fh.read())

        deployed = provenance["deployment"]["deployment_parameters"]["threshold"]
        if float(deployed) != model.threshold:
            raise ConfigError(
                f"provenance deployment threshold {deployed!r} does not equal "
                f"the model threshold {model.threshold!r}"
            )
        digest = hashlib.sha256(feature_list_bytes).hexdigest()
        if model.feature_list_hash is not None and digest != model.feature_list_hash:
            raise ConfigError(
                "feature list hash mismatch: the deployed feature_list.json is not "
                "the one recorded at training"
            )
        return DeploymentBundle(model, feature_list, dfs_params, metadata, provenance, model.threshold)


def generate_predictions(bundle: DeploymentBundle, matrix: FeatureMatrix) -> list[PredictionRow]:
    """Score a feature matrix with the bundle; decision = score >= threshold."""
    scores = bundle.model.score_matrix(matrix)
    return [
        PredictionRow(
            matrix.instance_ids[i],
            int(matrix.cutoffs[i]),
            float(scores[i]),
            bool(scores[i] >= bundle.threshold),
        )
        for i in range(matrix.n_rows)
    ]


# ---------------------------------------------------------------------------
# Integration testing
# ---------------------------------------------------------------------------


@dataclass
class IntegrationReport:
    steps: list[dict] = field(default_factory=list)
    passed: bool = False
    predictions: list[PredictionRow] | None = None
    entityset: EntitySet | None = None

    def to_json_text(self) -> str:
        return canonical_dumps({"passed": self.passed, "steps": self.steps})


def integration_test(
    bundle: DeploymentBundle,
    es_t: EntitySet,
    new_data_path,
    current_time: int,
    instance_ids: list[str] | None = None,
) -> IntegrationReport:
    """Run add_new_data -> calculate_feature_matrix -> generate_predictions."""
    report = IntegrationReport()

    def run_step(name: str, fn):
        try:
            value = fn()
        except ChronoforgeError as exc:
            report.steps.append({"name": name, "status": "failed", "error": str(exc)})
            return None, True
        report.steps.append({"name": name, "status": "passed"})
        return value, False

    es_plus, failed = run_step(
        "add_new_data", lambda: add_new_data(es_t, new_data_path, bundle.metadata)
    )
    if failed:
        return report
    report.entityset = es_plus

    target = es_plus.entity(bundle.dfs_params.target_entity)
    if instance_ids is None:
        instance_ids = list(target.columns[target.index])
    pairs = [(instance_id, current_time) for instance_id in instance_ids]
    matrix, failed = run_step(
        "calculate_feature_matrix",
        lambda: calculate_feature_matrix(es_plus, pairs, bundle.feature_list, bundle.dfs_params),
    )
    if failed:
        return report

    predictions, failed = run_step(
        "generate_predictions", lambda: generate_predictions(bundle, matrix)
    )
    if failed:
        return report
    report.passed = True
    report.predictions = predictions
    return report


# ---------------------------------------------------------------------------
# Production validation
# ---------------------------------------------------------------------------


@dataclass
class ValidationReport:
    pairs: int
    unlabelable: int
    skipped_null_labels: int
    evaluated: int
    cost: float | None
    metrics: dict
    training_reference: dict | None
    matches_training: bool
    predictions: list[PredictionRow] = field(default_factory=list)

    def to_json_text(self) -> str:
        payload = {
            "pairs": self.pairs,
            "unlabelable": self.unlabelable,
            "skipped_null_labels": self.skipped_null_labels,
            "evaluated": self.evaluated,
            "cost": self.cost,
            "metrics": self.metrics,
            "training_reference": self.training_reference,
            "matches_training": self.matches_training,
        }
        return canonical_dumps(payload)


def _metrics_equal(a: dict, b: dict) -> bool:
    keys = ("precision", "recall", "fpr", "auc")
    return all(a.get(k) == b.get(k) for k in keys)


def validate_in_production(
    bundle: DeploymentBundle,
    es_tplus: EntitySet,
    f: LabelingFunctionDef | str,
    pairs: list[tuple[str, int]],
    g: CostFunction,
    search_params: LabelSearchParams,
    labeling_params: dict | None = None,
    data_horizon: int | None = None,
) -> ValidationReport:
    """Compute features, true labels, and predictions at arbitrary timestamps.

    Each pair (instance, timestamp) is scored at the timestamp and
    labeled over [timestamp + lead, timestamp + lead + window); rows
    whose label window extends past the data horizon (latest event time
    by default) are flagged unlabelable and excluded from metrics.
    """
    horizon = data_horizon if data_horizon is not None else es_tplus.latest_time()
    pw = search_params.prediction_window.seconds
    lead = search_params.lead.seconds

    matrix = calculate_feature_matrix(es_tplus, pairs, bundle.feature_list, bundle.dfs_params)
    predictions = generate_predictions(bundle, matrix)

    labels: list[float] = []
    kept: list[int] = []
    unlabelable = 0
    skipped = 0
    for i, (instance_id, timestamp) in enumerate(pairs):
        window_end = timestamp + lead + pw
        if horizon is None or window_end > horizon:
            unlabelable += 1
            continue
        label, _cutoff = apply_labeling_function(
            es_tplus, bundle.dfs_params.target_entity, f, instance_id,
            timestamp + lead, search_params, labeling_params,
        )
        if label is None:
            skipped += 1
            continue
        labels.append(1.0 if bool(label) else 0.0)
        kept.append(i)

    if kept:
        scores = np.array([predictions[i].score for i in kept])
        decisions = np.array([predictions[i].decision for i in kept])
        y = np.array(labels)
        cost = g(
            es_tplus,
            Predictions(scores, decisions, [pairs[i][0] for i in kept], [pairs[i][1] for i in kept]),
            y,
        )
        metrics = compute_metrics(scores, y, bundle.threshold)
    else:
        cost = None
        metrics = {"precision": None, "recall": None, "fpr": None, "auc": None}

    reference = bundle.model.results_test[0] if bundle.model.results_test else None
    matches = reference is not None and kept and _metrics_equal(metrics, reference)
    return ValidationReport(
        pairs=len(pairs),
        unlabelable=unlabelable,
        skipped_null_labels=skipped,
        evaluated=len(kept),
        cost=cost,
        metrics=metrics,
        training_reference=reference,
        matches_training=bool(matches),
        predictions=predictions,
    )
