from __future__ import annotations

import json

import numpy as np
import pytest

from chronoforge.errors import ConfigError, SchemaError
from chronoforge.features.definitions import parse_feature_name
from chronoforge.features.matrix import FeatureMatrix
from chronoforge.jsonutil import format_range_bound, format_significant
from chronoforge.provenance import (
    assemble_provenance,
    check_drift,
    data_fields_used,
    emit_provenance,
    expected_value_ranges,
    validate_provenance,
)

from tests.conftest import FIXTURES_DIR

APPENDIX = (FIXTURES_DIR / "appendix_provenance.json").read_text(encoding="utf-8")


def test_appendix_document_validates():
    doc = validate_provenance(APPENDIX)
    assert doc["prediction_engineering"]["prediction_window"] == "56 days"
    assert doc["deployment"]["deployment_parameters"]["threshold"] == 0.212
    assert len(doc["results"]["test"]) == 2


def test_missing_auc_pointer():
    doc = json.loads(APPENDIX)
    del doc["results"]["test"][0]["auc"]
    with pytest.raises(SchemaError) as err:
        validate_provenance(json.dumps(doc))
    assert err.value.pointer == "/results/test/0/auc"


def test_extra_result_field_rejected():
    doc = json.loads(APPENDIX)
    doc["results"]["test"][0]["accuracy"] = 0.9
    with pytest.raises(SchemaError) as err:
        validate_provenance(json.dumps(doc))
    assert "accuracy" in str(err.value)


def test_threshold_out_of_unit_interval():
    doc = json.loads(APPENDIX)
    doc["results"]["test"][0]["threshold"] = 1.5
    with pytest.raises(SchemaError):
        validate_provenance(json.dumps(doc))


def test_bad_duration_rejected():
    doc = json.loads(APPENDIX)
    doc["prediction_engineering"]["lead"] = "four weeks"
    with pytest.raises(SchemaError) as err:
        validate_provenance(json.dumps(doc))
    assert err.value.pointer == "/prediction_engineering/lead"


def test_splits_must_be_chronological():
    doc = json.loads(APPENDIX)
    doc["data_splits"][0]["start_time"] = "2015/05/01"
    with pytest.raises(SchemaError):
        validate_provenance(json.dumps(doc))


def test_range_min_above_max_rejected():
    doc = json.loads(APPENDIX)
    ranges = doc["deployment"]["integration_and_validation"]["expected_feature_value_ranges"]
    ranges["MEAN(orders_products.Price)"] = {"min": 10.0, "max": 1.0}
    with pytest.raises(SchemaError):
        validate_provenance(json.dumps(doc))


def test_emit_parse_round_trip():
    doc = validate_provenance(APPENDIX)
    text = emit_provenance(doc)
    again = validate_provenance(text)
    assert again == json.loads(json.dumps(doc))  # field-level identity
    assert emit_provenance(again) == text  # emission is idempotent


def test_number_formatting():
    assert format_significant(0.6714285714).text == "0.671429"
    assert format_significant(1.0).text == "1.0"
    assert format_range_bound(9.5, kind="min").text == "9.50"
    assert format_range_bound(332.3, kind="max").text == "332.30"
    # directed rounding never narrows the range
    assert float(format_range_bound(0.123456789, kind="min")) <= 0.123456789
    assert float(format_range_bound(0.123456789, kind="max")) >= 0.123456789


def test_emitted_ranges_render_with_two_decimals():
    doc = validate_provenance(APPENDIX)
    text = emit_provenance(doc)
    assert '"min": 9.50' in text
    assert '"max": 332.30' in text


# ---------------------------------------------------------------------------
# Assembly helpers
# ---------------------------------------------------------------------------


def _matrix(names, columns, kinds=None):
    n = len(columns[0]) if columns else 0
    return FeatureMatrix(
        names,
        [np.asarray(c, dtype=np.float64) for c in columns],
        kinds or ["numeric"] * len(names),
        [f"i{k}" for k in range(n)],
        [0] * n,
    )


def test_expected_ranges_training_minmax():
    matrix = _matrix(["a", "b"], [[9.5, 100.0, 332.3], [np.nan, np.nan, np.nan]])
    ranges = expected_value_ranges(matrix)
    assert ranges == {"a": (9.5, 332.3)}  # the all-null column is unchecked


def test_range_soundness_after_formatting():
    values = [9.512345678, 332.29999999, 17.1]
    matrix = _matrix(["a"], [values])
    (lo, hi) = expected_value_ranges(matrix)["a"]
    emitted_lo = float(format_range_bound(lo, kind="min"))
    emitted_hi = float(format_range_bound(hi, kind="max"))
    assert all(emitted_lo <= v <= emitted_hi for v in values)


def test_data_fields_used_covers_join_keys(retail_es):
    feature = parse_feature_name("MEAN(orders_products.Price)", retail_es, "customers")
    fields = data_fields_used(retail_es, [feature], [("orders", "Timestamp")])
    assert fields == {
        "customers": ["customer_id"],
        "orders": ["Timestamp", "customer_id", "order_id"],
        "orders_products": ["Price", "order_id"],
    }


def test_assemble_missing_block_named():
    with pytest.raises(ConfigError) as err:
        assemble_provenance(
            metadata_path="m.json",
            prediction_engineering={},
            feature_engineering={"method": "Deep Feature Synthesis"},
            modeling={"x": 1},
            data_splits=[{}],
            training_setup={"training": {}},
            results_test=[{}],
            deployment_executable="x",
            feature_list_path="f",
            model_path="m",
            threshold=0.5,
            es=None,
            feature_list=[],
            labeling_fields=[],
            train_matrix=_matrix([], []),
        )
    assert "prediction_engineering" in str(err.value)


# ---------------------------------------------------------------------------
# Drift
# ---------------------------------------------------------------------------


def _doc_with_ranges():
    doc = json.loads(APPENDIX)
    return doc


def test_drift_out_of_range_single_entry():
    doc = _doc_with_ranges()
    matrix = _matrix(["MEAN(orders_products.Price)"], [[100.0, 400.0, 50.0]])
    report = check_drift(doc, matrix)
    assert len(report.entries) == 1
    entry = report.entries[0]
    assert entry["kind"] == "OutOfRange"
    assert entry["row"] == 1
    assert entry["value"] == 400.0


def test_drift_clean_matrix_empty_report():
    doc = _doc_with_ranges()
    matrix = _matrix(["MEAN(orders_products.Price)"], [[100.0, 9.5, 332.3]])
    assert check_drift(doc, matrix).ok


def test_drift_unchecked_feature_ignored():
    doc = _doc_with_ranges()
    matrix = _matrix(["SOMETHING_NEW(x.y)"], [[1e9]])
    assert check_drift(doc, matrix).ok


def test_drift_missing_field_entry(retail_es):
    doc = _doc_with_ranges()
    # the appendix lists orders_products.Discount, which retail_tiny lacks
    matrix = _matrix(["MEAN(orders_products.Price)"], [[100.0]])
    report = check_drift(doc, matrix, retail_es)
    missing = [e for e in report.entries if e["kind"] == "MissingField"]
    assert {(e["entity"], e["column"]) for e in missing} >= {("orders_products", "Discount")}


def test_drift_report_jsonl():
    doc = _doc_with_ranges()
    matrix = _matrix(["MEAN(orders_products.Price)"], [[400.0]])
    lines = check_drift(doc, matrix).to_jsonl().strip().splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0])["kind"] == "OutOfRange"
