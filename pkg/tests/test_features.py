from __future__ import annotations

import math
import random

import numpy as np
import pytest

from chronoforge.errors import (
    ConfigError,
    DataError,
    FeatureNameError,
    SchemaDriftError,
    UnknownInstanceError,
    UnknownPrimitiveError,
)
from chronoforge.features import (
    DfsParams,
    FeatureMatrix,
    calculate_feature_matrix,
    create_features,
    feature_depth,
    feature_name,
    parse_feature_list,
    parse_feature_name,
    select_features,
    serialize_feature_list,
)
from chronoforge.features.matrix import percentile_ranks
from chronoforge.timeutil import parse_duration, parse_timestamp

from tests.gen import random_entityset, random_cutoffs
from tests.oracles import oracle_cell, plainify

ALL_AGGS = ("COUNT", "SUM", "MEAN", "MIN", "MAX", "STD", "NUM_UNIQUE", "PERCENT", "TREND")
ALL_TRANSFORMS = ("WEEKEND", "DAY", "MONTH", "WEEKDAY", "PERCENTILE")


def _params(**kw) -> DfsParams:
    base = dict(
        target_entity="customers",
        training_window=None,
        aggregation_primitives=("MEAN",),
        transform_primitives=(),
        ignore_variables={},
        max_depth=2,
    )
    base.update(kw)
    return DfsParams(**base)


# ---------------------------------------------------------------------------
# create_features
# ---------------------------------------------------------------------------


def test_multi_hop_mean_generated(retail_es):
    names = [feature_name(f) for f in create_features(retail_es, _params())]
    assert "MEAN(orders_products.Price)" in names
    assert "MEAN(orders.MEAN(orders_products.Price))" in names  # nested form too


def test_percent_weekend_generated(retail_es):
    names = [
        feature_name(f)
        for f in create_features(
            retail_es, _params(aggregation_primitives=("PERCENT",), transform_primitives=("WEEKEND",))
        )
    ]
    assert "PERCENT(WEEKEND(orders.Timestamp))" in names


def test_empty_primitive_lists(retail_es):
    assert create_features(retail_es, _params(aggregation_primitives=(), transform_primitives=())) == []


def test_deterministic_lexicographic_order(retail_es):
    params = _params(aggregation_primitives=ALL_AGGS, transform_primitives=ALL_TRANSFORMS)
    first = [feature_name(f) for f in create_features(retail_es, params)]
    second = [feature_name(f) for f in create_features(retail_es, params)]
    assert first == second == sorted(first)


def test_index_id_time_never_raw_inputs(retail_es):
    params = _params(aggregation_primitives=ALL_AGGS, transform_primitives=())
    for feature in create_features(retail_es, params):
        name = feature_name(feature)
        assert ".order_id" not in name and ".customer_id" not in name
        assert ".line_id" not in name and ".product_id" not in name
        assert ".Timestamp" not in name  # only time transforms may touch it


def test_time_index_feeds_time_transforms(retail_es):
    params = _params(aggregation_primitives=("COUNT",), transform_primitives=("WEEKEND",))
    names = [feature_name(f) for f in create_features(retail_es, params)]
    assert "COUNT(WEEKEND(orders.Timestamp))" in names


def test_max_depth_limits(retail_es):
    # retail_tiny's direct child carries only ids and the time index, so
    # depth 1 yields nothing there; a generated fixture has depth-1 inputs
    params = _params(aggregation_primitives=ALL_AGGS, transform_primitives=ALL_TRANSFORMS, max_depth=1)
    assert create_features(retail_es, params) == []
    es = random_entityset(random.Random(3))
    shallow = DfsParams("root", None, ALL_AGGS, ALL_TRANSFORMS, {}, 1)
    feats = create_features(es, shallow)
    assert feats
    assert all(feature_depth(f) <= 1 for f in feats)
    deep = DfsParams("root", None, ALL_AGGS, ALL_TRANSFORMS, {}, 2)
    deeper = create_features(es, deep)
    assert set(feature_name(f) for f in feats) <= set(feature_name(f) for f in deeper)
    assert all(feature_depth(f) <= 2 for f in deeper)


def test_ignore_variables(retail_es):
    params = _params(ignore_variables={"orders_products": ["Price"]})
    names = [feature_name(f) for f in create_features(retail_es, params)]
    assert all("Price" not in n for n in names)


def test_unknown_primitive_and_bad_ignores(retail_es):
    with pytest.raises(UnknownPrimitiveError):
        create_features(retail_es, _params(aggregation_primitives=("MEDIAN",)))
    with pytest.raises(ConfigError):
        create_features(retail_es, _params(ignore_variables={"orders": ["nope"]}))


# ---------------------------------------------------------------------------
# Naming grammar
# ---------------------------------------------------------------------------


def test_naming_bijection_all_generated(retail_es):
    params = _params(aggregation_primitives=ALL_AGGS, transform_primitives=ALL_TRANSFORMS)
    for feature in create_features(retail_es, params):
        assert parse_feature_name(feature_name(feature), retail_es, "customers") == feature


def test_parse_error_carries_position(retail_es):
    with pytest.raises(FeatureNameError) as err:
        parse_feature_name("MEAN(orders_products.", retail_es, "customers")
    assert err.value.position > 0
    with pytest.raises(FeatureNameError):
        parse_feature_name("NOTAPRIM(orders.Timestamp)", retail_es, "customers")


def test_serialize_round_trip(retail_es):
    params = _params(aggregation_primitives=("MEAN", "COUNT"), transform_primitives=("WEEKEND",))
    features = create_features(retail_es, params)
    text = serialize_feature_list(features, params)
    again, params_again = parse_feature_list(text, retail_es)
    assert again == features
    assert params_again == params
    assert serialize_feature_list(again, params_again) == text


def test_serialize_empty_list(retail_es):
    text = serialize_feature_list([], _params())
    again, _ = parse_feature_list(text, retail_es)
    assert again == []


# ---------------------------------------------------------------------------
# calculate_feature_matrix
# ---------------------------------------------------------------------------


def test_mean_price_point_in_time(retail_es):
    f = parse_feature_name("MEAN(orders_products.Price)", retail_es, "customers")
    m = calculate_feature_matrix(
        retail_es,
        [
            ("c1", parse_timestamp("2014-03-01")),
            ("c1", parse_timestamp("2014-02-01")),
            ("c3", parse_timestamp("2014-03-01")),
        ],
        [f],
        _params(),
    )
    assert m.cell(0, 0) == 20.0
    assert m.cell(1, 0) == 15.0
    assert m.cell(2, 0) is None


def test_weekend_on_sunday_order(retail_es):
    f = parse_feature_name("WEEKEND(orders.Timestamp)", retail_es, "orders")
    m = calculate_feature_matrix(
        retail_es, [("o1", parse_timestamp("2014-03-01"))], [f], _params(target_entity="orders")
    )
    assert m.cell(0, 0) is True  # 2014-01-05 is a Sunday


def test_training_window_restricts_history(retail_es):
    f = parse_feature_name("COUNT(orders_products.Price)", retail_es, "customers")
    narrow = _params(
        aggregation_primitives=("COUNT",), training_window=parse_duration("25 days")
    )
    m = calculate_feature_matrix(retail_es, [("c1", parse_timestamp("2014-03-01"))], [f], narrow)
    # only o2's line (2014-02-10) is inside [2014-02-04, 2014-03-01)
    assert m.cell(0, 0) == 1.0
    wide = _params(aggregation_primitives=("COUNT",), training_window=parse_duration("90 days"))
    m = calculate_feature_matrix(retail_es, [("c1", parse_timestamp("2014-03-01"))], [f], wide)
    assert m.cell(0, 0) == 3.0


def test_count_monotone_in_training_window(retail_es):
    f = parse_feature_name("COUNT(orders_products.Price)", retail_es, "customers")
    cutoff = parse_timestamp("2014-03-01")
    last = -1.0
    for days in (1, 10, 25, 40, 90, 400):
        params = _params(
            aggregation_primitives=("COUNT",), training_window=parse_duration(f"{days} days")
        )
        m = calculate_feature_matrix(retail_es, [("c1", cutoff)], [f], params)
        value = m.cell(0, 0) or 0.0
        assert value >= last
        last = value


def test_unknown_instance_and_empty_feature_list(retail_es):
    f = parse_feature_name("MEAN(orders_products.Price)", retail_es, "customers")
    with pytest.raises(UnknownInstanceError):
        calculate_feature_matrix(retail_es, [("c9", 0)], [f], _params())
    with pytest.raises(ConfigError):
        calculate_feature_matrix(retail_es, [("c1", 0)], [], _params())


def test_schema_drift_detected(retail_es, retail_metadata, tmp_path):
    # drop the Price column from the data and keep the old feature list
    import shutil

    for name in ("customers", "orders", "products"):
        shutil.copy(f"data/retail_tiny/{name}.csv", tmp_path / f"{name}.csv")
    (tmp_path / "orders_products.csv").write_text(
        "line_id,order_id,product_id\nop1,o1,p1\n"
    )
    import json

    doc = json.loads((tmp_path / "metadata.json").read_text()) if (tmp_path / "metadata.json").exists() else None
    from chronoforge.metadata import parse_metadata

    raw = json.loads(open("data/retail_tiny/metadata.json").read())
    raw["entities"][3]["variables"] = [v for v in raw["entities"][3]["variables"] if v["name"] != "Price"]
    drifted_md = parse_metadata(json.dumps(raw))
    from chronoforge.entityset import load_entityset

    drifted = load_entityset(tmp_path, drifted_md)
    f = parse_feature_name("MEAN(orders_products.Price)", retail_es, "customers")
    with pytest.raises(SchemaDriftError):
        calculate_feature_matrix(drifted, [("c1", parse_timestamp("2014-03-01"))], [f], _params())


def test_labels_appended_from_label_times(retail_es):
    from chronoforge.labeling import LabelRow, LabelTimes

    lt = LabelTimes(
        [LabelRow("c1", True, parse_timestamp("2014-03-01")),
         LabelRow("c2", False, parse_timestamp("2014-03-01"))],
        "customers",
    )
    f = parse_feature_name("MEAN(orders_products.Price)", retail_es, "customers")
    m = calculate_feature_matrix(retail_es, lt, [f], _params())
    assert m.labels == [True, False]


def test_matrix_csv_round_trip(retail_es, tmp_path):
    from chronoforge.labeling import LabelRow, LabelTimes

    params = _params(aggregation_primitives=("MEAN", "COUNT", "TREND"), transform_primitives=("WEEKEND",))
    features = create_features(retail_es, params)
    lt = LabelTimes(
        [LabelRow("c1", True, parse_timestamp("2014-03-01")),
         LabelRow("c3", False, parse_timestamp("2014-03-01"))],
        "customers",
    )
    m = calculate_feature_matrix(retail_es, lt, features, params)
    path = tmp_path / "m.csv"
    m.write_csv(path)
    again = FeatureMatrix.read_csv(path, m.instance_ids, m.cutoffs)
    assert again.feature_names == m.feature_names
    assert again.labels == m.labels
    for a, b in zip(again.columns, m.columns):
        assert np.array_equal(a, b, equal_nan=True)
    header = path.read_text().splitlines()[0]
    assert header.split(",")[-1] == "label"  # label column is last


def test_percentile_ranks_average_ties():
    values = np.array([1.0, 2.0, 2.0, 5.0, np.nan])
    ranks = percentile_ranks(values)
    assert ranks[0] == 0.25
    assert ranks[1] == ranks[2] == pytest.approx(2.5 / 4.0)
    assert ranks[3] == 1.0
    assert math.isnan(ranks[4])


def test_percentile_in_unit_interval(retail_es):
    f = parse_feature_name("MEAN(PERCENTILE(orders_products.Price))", retail_es, "customers")
    m = calculate_feature_matrix(
        retail_es,
        [("c1", parse_timestamp("2014-03-01")), ("c2", parse_timestamp("2014-03-01"))],
        [f],
        _params(transform_primitives=("PERCENTILE",)),
    )
    for row in range(2):
        value = m.cell(row, 0)
        assert value is not None and 0.0 < value <= 1.0


# ---------------------------------------------------------------------------
# Oracle equivalence on retail_tiny and random fixtures
# ---------------------------------------------------------------------------


def _assert_matches_oracle(es, target, features, pairs, window_seconds=None, params=None):
    plain = plainify(es)
    m = calculate_feature_matrix(es, pairs, features, params)
    mismatches = []
    for col, feature in enumerate(features):
        for row in range(m.n_rows):
            got = m.cell(row, col)
            if isinstance(got, bool):
                got = float(got)
            want = oracle_cell(plain, target, feature, m.instance_ids[row], m.cutoffs[row], window_seconds)
            if isinstance(want, bool):
                want = float(want)
            if got is None and want is None:
                continue
            ok = (
                got is not None
                and want is not None
                and math.isclose(got, want, rel_tol=1e-9, abs_tol=1e-12)
            )
            if not ok:
                mismatches.append((feature_name(feature), m.instance_ids[row], got, want))
    assert not mismatches, mismatches[:5]


def test_oracle_equivalence_retail_tiny(retail_es):
    params = _params(aggregation_primitives=ALL_AGGS, transform_primitives=ALL_TRANSFORMS)
    features = create_features(retail_es, params)
    cutoffs = [parse_timestamp(t) for t in ("2013-12-01", "2014-01-10", "2014-02-01", "2014-05-01")]
    pairs = [(i, c) for i in ("c1", "c2", "c3") for c in cutoffs]
    _assert_matches_oracle(retail_es, "customers", features, pairs, None, params)


@pytest.mark.parametrize("seed", range(6))
def test_oracle_equivalence_random(seed):
    rng = random.Random(1000 + seed)
    es = random_entityset(rng)
    window = rng.choice([None, parse_duration("60 days"), parse_duration("200 days")])
    params = DfsParams("root", window, ALL_AGGS, ALL_TRANSFORMS, {}, 2)
    features = create_features(es, params)
    root = es.entity("root")
    ids = list(root.columns["rid"])
    pairs = [(i, c) for i in ids for c in random_cutoffs(rng, es, 3)]
    _assert_matches_oracle(es, "root", features, pairs, params.window_seconds, params)


# ---------------------------------------------------------------------------
# select_features
# ---------------------------------------------------------------------------


def _toy_matrix(rng: random.Random, n=60):
    informative = [float(rng.random()) for _ in range(n)]
    labels = [v > 0.5 for v in informative]
    columns = [
        np.array(informative),
        np.array([v * 2.0 + 0.1 for v in informative]),
        np.array([float(rng.random()) for _ in range(n)]),
        np.full(n, 3.14),
        np.full(n, 0.0),
        np.full(n, -1.0),
    ]
    names = ["a_info", "b_info", "c_noise", "d_const", "e_const", "f_const"]
    kinds = ["numeric"] * 6
    return FeatureMatrix(names, columns, kinds, [str(i) for i in range(n)], [0] * n), labels


def test_select_features_drops_constants():
    matrix, labels = _toy_matrix(random.Random(5))
    selected = select_features(matrix, labels, 3)
    assert set(selected) == {"a_info", "b_info", "c_noise"}


def test_select_features_identity_when_all_kept():
    matrix, labels = _toy_matrix(random.Random(6))
    assert select_features(matrix, labels, 6) == sorted(matrix.feature_names)


def test_select_features_perfect_predictor_dominates():
    rng = random.Random(7)
    n = 50
    labels = [rng.random() > 0.5 for _ in range(n)]
    columns = [
        np.array([1.0 if y else 0.0 for y in labels]),
        np.array([float(rng.random()) for _ in range(n)]),
        np.array([float(rng.random()) for _ in range(n)]),
    ]
    matrix = FeatureMatrix(
        ["perfect", "noise1", "noise2"], columns, ["numeric"] * 3,
        [str(i) for i in range(n)], [0] * n,
    )
    assert select_features(matrix, labels, 1) == ["perfect"]


def test_select_features_degenerate_labels():
    matrix, _ = _toy_matrix(random.Random(8))
    with pytest.raises(DataError) as err:
        select_features(matrix, [True] * matrix.n_rows, 2)
    assert "skip" in str(err.value)


def test_select_features_too_many_requested():
    matrix, labels = _toy_matrix(random.Random(9))
    with pytest.raises(ConfigError):
        select_features(matrix, labels, 7)
