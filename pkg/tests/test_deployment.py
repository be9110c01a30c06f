from __future__ import annotations

import json

import numpy as np
import pytest

from chronoforge.deployment import (
    DeploymentBundle,
    generate_predictions,
    integration_test,
    validate_in_production,
)
from chronoforge.entityset import add_new_data, load_entityset
from chronoforge.errors import ColumnMismatchError, ConfigError
from chronoforge.features.matrix import FeatureMatrix, calculate_feature_matrix
from chronoforge.modeling.costs import resolve_cost_function
from chronoforge.pipeline import (
    cmd_features,
    cmd_labels,
    cmd_train,
    load_bundle,
    load_config_entityset,
    parse_run_config,
)
from chronoforge.timeutil import parse_timestamp

from tests.conftest import CONFIGS_DIR, RETAIL_NEW_DIR


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    config = parse_run_config(CONFIGS_DIR / "retail_tiny.json", output_override=out)
    cmd_labels(config)
    cmd_features(config)
    outcome = cmd_train(config)
    return config, outcome


@pytest.fixture()
def bundle_and_es(trained_run):
    config, _ = trained_run
    es, _md = load_config_entityset(config)
    return load_bundle(config, es), es


def test_bundle_checks_threshold_against_provenance(trained_run, bundle_and_es):
    config, outcome = trained_run
    bundle, _es = bundle_and_es
    assert bundle.threshold == outcome.artifact.threshold
    doc = json.loads((config.output_dir / "model_provenance.json").read_text())
    assert doc["deployment"]["deployment_parameters"]["threshold"] == bundle.threshold


def test_bundle_rejects_tampered_feature_list(trained_run, tmp_path):
    config, _ = trained_run
    es, _md = load_config_entityset(config)
    tampered = tmp_path / "feature_list.json"
    text = (config.output_dir / "feature_list.json").read_text()
    tampered.write_text(text + "\n")
    with pytest.raises(ConfigError) as err:
        DeploymentBundle.load(
            config.output_dir / "model.json",
            tampered,
            config.metadata_path,
            config.output_dir / "model_provenance.json",
            es,
        )
    assert "hash" in str(err.value)


def test_replay_scores_bitwise_equal(trained_run, bundle_and_es):
    """Deployment rescoring of the test split equals the recorded search scores."""
    config, _ = trained_run
    bundle, es = bundle_and_es
    from chronoforge.labeling import LabelTimes

    label_times = LabelTimes.read_csv(config.output_dir / "label_times_test.csv", "customers")
    matrix = calculate_feature_matrix(es, label_times, bundle.feature_list, bundle.dfs_params)
    predictions = generate_predictions(bundle, matrix)
    recorded = [
        float(line.split(",")[2])
        for line in (config.output_dir / "test_scores.csv").read_text().splitlines()[1:]
    ]
    assert [p.score for p in predictions] == recorded  # bitwise: exact float repr round trip


def test_generate_predictions_empty_matrix(bundle_and_es):
    bundle, _es = bundle_and_es
    empty = FeatureMatrix(
        list(bundle.model.columns),
        [np.empty(0) for _ in bundle.model.columns],
        list(bundle.model.column_kinds),
        [],
        [],
    )
    assert generate_predictions(bundle, empty) == []


def test_generate_predictions_column_mismatch(bundle_and_es):
    bundle, _es = bundle_and_es
    wrong = FeatureMatrix(
        ["bogus"] + list(bundle.model.columns[1:]),
        [np.zeros(1) for _ in bundle.model.columns],
        list(bundle.model.column_kinds),
        ["c1"],
        [0],
    )
    with pytest.raises(ColumnMismatchError) as err:
        generate_predictions(bundle, wrong)
    assert err.value.position == 0


def test_threshold_rule_is_inclusive(bundle_and_es):
    bundle, es = bundle_and_es
    matrix = calculate_feature_matrix(
        es, [("c1", parse_timestamp("2014-02-20"))], bundle.feature_list, bundle.dfs_params
    )
    predictions = generate_predictions(bundle, matrix)
    for p in predictions:
        assert p.decision == (p.score >= bundle.threshold)


def test_integration_test_happy_path(trained_run, bundle_and_es):
    config, _ = trained_run
    bundle, es = bundle_and_es
    report = integration_test(bundle, es, RETAIL_NEW_DIR, parse_timestamp("2014-04-01"))
    assert report.passed
    assert [s["status"] for s in report.steps] == ["passed", "passed", "passed"]
    assert len(report.predictions) == 3  # one per customer
    assert report.entityset.version == es.version + 1


def test_integration_test_consistency_failure(trained_run, bundle_and_es, tmp_path):
    config, _ = trained_run
    bundle, es = bundle_and_es
    (tmp_path / "orders.csv").write_text(
        "order_id,customer_id,Timestamp\no1,c1,2014-05-01T00:00:00Z\n"
    )
    report = integration_test(bundle, es, tmp_path, parse_timestamp("2014-06-01"))
    assert not report.passed
    assert report.steps[0]["name"] == "add_new_data"
    assert report.steps[0]["status"] == "failed"
    assert report.predictions is None


def test_integration_before_all_data_gives_constant_baseline(trained_run, bundle_and_es, tmp_path):
    config, _ = trained_run
    bundle, es = bundle_and_es
    (tmp_path / "customers.csv").write_text("customer_id,name\n")  # empty batch
    report = integration_test(bundle, es, tmp_path, parse_timestamp("2000-01-01"))
    assert report.passed
    scores = {p.score for p in report.predictions}
    assert len(scores) == 1  # all features imputed identically -> one score


def test_validate_replay_matches_training(trained_run):
    config, outcome = trained_run
    es, metadata = load_config_entityset(config)
    es_plus = add_new_data(es, RETAIL_NEW_DIR, metadata)  # windows now close within data
    bundle = load_bundle(config, es_plus)
    from chronoforge.labeling import LabelTimes

    label_times = LabelTimes.read_csv(config.output_dir / "label_times_test.csv", "customers")
    pairs = [(r.instance_id, r.cutoff_time) for r in label_times.rows]
    report = validate_in_production(
        bundle, es_plus, "exists_event", pairs,
        resolve_cost_function("f1_cost"),
        config.base_label_params(), {"entity": "orders"},
    )
    assert report.unlabelable == 0
    assert report.evaluated == len(pairs)
    assert report.matches_training
    reference = outcome.artifact.results_test[0]
    for key in ("precision", "recall", "fpr", "auc"):
        assert report.metrics[key] == reference[key]


def test_validate_windows_beyond_data_unlabelable(trained_run, bundle_and_es):
    config, _ = trained_run
    bundle, es = bundle_and_es
    late = parse_timestamp("2015-01-01")
    report = validate_in_production(
        bundle, es, "exists_event", [("c1", late), ("c2", late)],
        resolve_cost_function("f1_cost"),
        config.base_label_params(), {"entity": "orders"},
    )
    assert report.unlabelable == 2
    assert report.evaluated == 0
    assert report.cost is None
    assert all(v is None for v in report.metrics.values())


def test_validate_perfect_predictions_zero_cost(trained_run):
    config, _ = trained_run
    es, metadata = load_config_entityset(config)
    es_plus = add_new_data(es, RETAIL_NEW_DIR, metadata)
    bundle = load_bundle(config, es_plus)
    report = validate_in_production(
        bundle, es_plus, "exists_event",
        [("c1", parse_timestamp("2014-01-03"))],  # c1 orders within [01-03, 01-10)
        resolve_cost_function("f1_cost"),
        config.base_label_params(), {"entity": "orders"},
    )
    if report.metrics["recall"] == 1.0 and report.metrics["precision"] == 1.0:
        assert report.cost == 0.0
