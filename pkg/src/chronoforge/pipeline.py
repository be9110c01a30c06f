"""End-to-end pipeline runs driven by one declarative configuration file.

Each command consumes the previous command's artifacts from the output
directory, so a run is resumable step by step:

    labels -> features -> train -> test / validate / predict

Relative paths in a configuration resolve against the configuration
file's directory, which keeps runs reproducible from any working
directory.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from chronoforge.deployment import (
    DeploymentBundle,
    IntegrationReport,
    ValidationReport,
    generate_predictions,
    integration_test,
    validate_in_production,
    write_predictions_csv,
)
from chronoforge.entityset import EntitySet, load_entityset
from chronoforge.errors import ConfigError, MissingArtifactError
from chronoforge.features.definitions import (
    DfsParams,
    feature_kind,
    feature_name,
    parse_feature_list,
    serialize_feature_list,
)
from chronoforge.features.matrix import FeatureMatrix, calculate_feature_matrix, select_features
from chronoforge.features.synthesis import create_features
from chronoforge.labeling import (
    LabelSearchParams,
    LabelTimes,
    get_labeling_function,
    search_training_examples,
)
from chronoforge.metadata import MetadataDocument, load_metadata
from chronoforge.modeling.methodspec import load_method_spec
from chronoforge.modeling.search import (
    MethodEntry,
    SearchOutcome,
    SearchParams,
    search_model,
)
from chronoforge.provenance import assemble_provenance, emit_provenance, validate_provenance
from chronoforge.timeutil import Duration, parse_duration, parse_timestamp, render_timestamp

SPLIT_IDS = ("train", "threshold-tuning", "test")


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path
    seed: int
    data_dir: Path
    metadata_path: Path
    metadata_text: str  # as configured, echoed into provenance
    output_dir: Path
    target_entity: str
    pe: dict
    fe: dict
    modeling: dict
    data_splits: list[dict]
    deployment: dict = field(default_factory=dict)
    integration: dict = field(default_factory=dict)
    validation: dict = field(default_factory=dict)

    def resolve(self, path_text: str) -> Path:
        path = Path(path_text)
        return path if path.is_absolute() else self.base_dir / path

    # -- parsed parameter objects ------------------------------------------

    def base_label_params(self) -> LabelSearchParams:
        pe = self.pe
        epi = pe.get("examples_per_instance")
        return LabelSearchParams(
            prediction_window=parse_duration(pe["prediction_window"]),
            lead=parse_duration(pe.get("lead", "0 seconds")),
            gap=parse_duration(pe.get("gap", "0 seconds")),
            examples_per_instance=int(epi) if epi is not None else None,
            min_training_data=parse_duration(pe.get("min_training_data", "0 seconds")),
            strategy=pe.get("strategy", "fixed"),
            offset=parse_duration(pe["offset"]) if pe.get("offset") else None,
            seed=self.seed,
        )

    def split_label_params(self, split: dict) -> LabelSearchParams:
        base = self.base_label_params()
        overrides = split.get("label_search_parameters") or {}
        merged = {
            "prediction_window": base.prediction_window,
            "lead": base.lead,
            "gap": base.gap,
            "examples_per_instance": base.examples_per_instance,
            "min_training_data": base.min_training_data,
            "strategy": base.strategy,
            "offset": base.offset,
            "seed": base.seed,
        }
        for key, value in overrides.items():
            if key in ("prediction_window", "lead", "gap", "min_training_data", "offset"):
                merged[key] = parse_duration(value)
            elif key == "examples_per_instance":
                merged[key] = int(value) if value is not None else None
            elif key == "strategy":
                merged[key] = value
            elif key == "seed":
                merged[key] = int(value)
            else:
                raise ConfigError(f"unknown label_search_parameters key {key!r}")
        return LabelSearchParams(**merged)

    def dfs_params(self) -> DfsParams:
        fe = self.fe
        window = fe.get("training_window")
        return DfsParams(
            target_entity=self.target_entity,
            training_window=parse_duration(window) if window is not None else None,
            aggregation_primitives=tuple(fe.get("aggregation_primitives", ())),
            transform_primitives=tuple(fe.get("transform_primitives", ())),
            ignore_variables={k: list(v) for k, v in fe.get("ignore_variables", {}).items()},
            max_depth=int(fe.get("max_depth", 2)),
        )

    def search_params(self) -> SearchParams:
        m = self.modeling
        methods = []
        for entry in m["methods"]:
            spec_path = self.resolve(entry["hyperparameter_options"])
            spec = load_method_spec(spec_path)
            method_key = entry.get("method_key") or entry.get("method") or spec.method_key
            methods.append(MethodEntry(method_key, spec, entry["hyperparameter_options"]))
        budget = m["budget"]
        if isinstance(budget, str):
            budget = parse_duration(budget)
        elif isinstance(budget, bool) or not isinstance(budget, int):
            raise ConfigError("modeling.budget must be a count or a duration string")
        return SearchParams(
            methods=methods,
            budget=budget,
            automl_method=m.get("automl_method", "random"),
            seed=self.seed,
            k_repeats=int(m.get("k_repeats", 3)),
            threshold_grid_step=float(m.get("threshold_grid_step", 0.001)),
            cost_function=m.get("cost_function", "f1_cost"),
            cost_function_params=m.get("cost_function_params", {}),
        )

    def splits_by_id(self) -> dict[str, dict]:
        return {split["id"]: split for split in self.data_splits}


def parse_run_config(
    path, *, output_override=None, data_dir_override=None, seed_override=None,
    default_output=None,
) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"run config not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"run config {path} is not valid JSON: {exc}") from None
    base_dir = path.parent.resolve()

    def require(key: str):
        if key not in raw:
            raise ConfigError(f"run config missing required key {key!r}")
        return raw[key]

    entityset = require("entityset")
    data_dir = Path(data_dir_override) if data_dir_override else Path(entityset["data_dir"])
    if not data_dir.is_absolute():
        data_dir = base_dir / data_dir
    metadata_text = entityset["metadata"]
    metadata_path = Path(metadata_text)
    if not metadata_path.is_absolute():
        metadata_path = base_dir / metadata_path

    if output_override:
        output_dir = Path(output_override)
    elif raw.get("output_dir"):
        out = Path(raw["output_dir"])
        output_dir = out if out.is_absolute() else base_dir / out
    elif default_output:
        output_dir = Path(default_output)
    else:
        raise ConfigError(
            "no output directory: set output_dir in the config, pass --output, "
            "or export CHRONOFORGE_OUTPUT"
        )

    splits = require("data_splits")
    ids = [s.get("id") for s in splits]
    if sorted(ids) != sorted(SPLIT_IDS):
        raise ConfigError(f"data_splits must define exactly {list(SPLIT_IDS)}, got {ids}")
    bounds = {}
    for split in splits:
        start = parse_timestamp(split["start_time"])
        end = parse_timestamp(split["end_time"])
        if start >= end:
            raise ConfigError(f"split {split['id']!r} start_time must precede end_time")
        bounds[split["id"]] = (start, end)
    chron = [bounds[i] for i in SPLIT_IDS]
    if not (chron[0][0] < chron[1][0] < chron[2][0]):
        raise ConfigError("data_splits must be in chronological order train < threshold-tuning < test")
    if chron[0][1] > chron[1][0] or chron[1][1] > chron[2][0]:
        raise ConfigError("data_splits must not overlap")

    config = RunConfig(
        raw=raw,
        base_dir=base_dir,
        seed=int(seed_override if seed_override is not None else raw.get("seed", 0)),
        data_dir=data_dir,
        metadata_path=metadata_path,
        metadata_text=metadata_text,
        output_dir=output_dir,
        target_entity=require("target_entity"),
        pe=require("prediction_engineering"),
        fe=require("feature_engineering"),
        modeling=require("modeling"),
        data_splits=splits,
        deployment=raw.get("deployment", {}),
        integration=raw.get("integration_test", {}),
        validation=raw.get("validation", {}),
    )
    config.base_label_params().validate()
    return config


# ---------------------------------------------------------------------------
# Artifact paths
# ---------------------------------------------------------------------------


def _label_times_path(out: Path, split_id: str) -> Path:
    return out / f"label_times_{split_id}.csv"


def _matrix_path(out: Path, split_id: str) -> Path:
    return out / f"feature_matrix_{split_id}.csv"


def _require_artifact(path: Path, artifact: str, producer: str) -> Path:
    if not path.is_file():
        raise MissingArtifactError(artifact, str(path), producer)
    return path


def load_config_entityset(config: RunConfig) -> tuple[EntitySet, MetadataDocument]:
    metadata = load_metadata(config.metadata_path)
    return load_entityset(config.data_dir, metadata), metadata


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_labels(config: RunConfig) -> dict[str, LabelTimes]:
    es, _metadata = load_config_entityset(config)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    fdef = get_labeling_function(config.pe["labeling_function"])
    labeling_params = config.pe.get("labeling_params", {})
    out: dict[str, LabelTimes] = {}
    for split in config.data_splits:
        params = config.split_label_params(split)
        search_range = (parse_timestamp(split["start_time"]), parse_timestamp(split["end_time"]))
        label_times = search_training_examples(
            es, config.target_entity, fdef, params, search_range, labeling_params
        )
        label_times.write_csv(_label_times_path(config.output_dir, split["id"]))
        out[split["id"]] = label_times
    return out


def _read_label_times(config: RunConfig, split_id: str, producer: str) -> LabelTimes:
    path = _require_artifact(
        _label_times_path(config.output_dir, split_id), f"label_times_{split_id}.csv", producer
    )
    return LabelTimes.read_csv(path, config.target_entity)


def cmd_features(config: RunConfig) -> dict:
    es, _metadata = load_config_entityset(config)
    label_times = {sid: _read_label_times(config, sid, "labels") for sid in SPLIT_IDS}
    params = config.dfs_params()
    features = create_features(es, params)
    if not features:
        raise ConfigError("feature synthesis produced no features; check the primitive lists")

    selection = config.fe.get("feature_selection")
    if selection:
        train_full = calculate_feature_matrix(es, label_times["train"], features, params)
        selected = select_features(
            train_full,
            label_times["train"].labels(),
            int(selection["n_features"]),
            selection.get("method", "random_forest_importance"),
        )
        by_name = {feature_name(f): f for f in features}
        features = [by_name[name] for name in selected]

    config.output_dir.mkdir(parents=True, exist_ok=True)
    text = serialize_feature_list(features, params)
    (config.output_dir / "feature_list.json").write_text(text, encoding="utf-8")
    matrices = {}
    for split_id in SPLIT_IDS:
        matrix = calculate_feature_matrix(es, label_times[split_id], features, params)
        matrix.write_csv(_matrix_path(config.output_dir, split_id))
        matrices[split_id] = matrix
    return {"features": features, "matrices": matrices}


def _read_matrices(config: RunConfig, es: EntitySet):
    feature_list_path = _require_artifact(
        config.output_dir / "feature_list.json", "feature_list.json", "features"
    )
    feature_list_bytes = feature_list_path.read_bytes()
    features, params = parse_feature_list(feature_list_bytes.decode("utf-8"), es)
    kinds = [feature_kind(f) for f in features]
    matrices: dict[str, FeatureMatrix] = {}
    for split_id in SPLIT_IDS:
        label_times = _read_label_times(config, split_id, "labels")
        path = _require_artifact(
            _matrix_path(config.output_dir, split_id), f"feature_matrix_{split_id}.csv", "features"
        )
        matrix = FeatureMatrix.read_csv(path, label_times.instance_ids(), label_times.cutoffs())
        if matrix.feature_names != [feature_name(f) for f in features]:
            raise ConfigError(f"feature matrix {path} does not match feature_list.json")
        matrix.kinds = list(kinds)  # kinds come from the definitions, not CSV inference
        matrices[split_id] = matrix
    return features, params, matrices, feature_list_bytes


def cmd_train(config: RunConfig, jobs: int = 1) -> SearchOutcome:
    es, _metadata = load_config_entityset(config)
    features, dfs_params, matrices, feature_list_bytes = _read_matrices(config, es)
    search_params = config.search_params()
    outcome = search_model(
        {sid: matrices[sid] for sid in SPLIT_IDS},
        search_params,
        es=es,
        jobs=jobs,
    )
    artifact = outcome.artifact
    artifact.feature_list_hash = hashlib.sha256(feature_list_bytes).hexdigest()

    out = config.output_dir
    (out / "model.json").write_text(artifact.to_json_text(), encoding="utf-8")
    outcome.leaderboard.write_csv(out / "leaderboard.csv")

    winner = outcome.leaderboard.entries[0]
    test = matrices["test"]
    with open(out / "test_scores.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("instance_id,cutoff_time,score\n")
        for i in range(test.n_rows):
            fh.write(
                f"{test.instance_ids[i]},{render_timestamp(test.cutoffs[i])},"
                f"{repr(float(winner.seed0_test_scores[i]))}\n"
            )

    provenance = _assemble_run_provenance(
        config, es, features, dfs_params, matrices["train"], artifact, outcome
    )
    text = emit_provenance(provenance)
    validate_provenance(text)  # our own emission must validate
    (out / "model_provenance.json").write_text(text, encoding="utf-8")
    return outcome


def _assemble_run_provenance(config, es, features, dfs_params, train_matrix, artifact, outcome):
    pe = config.pe
    pe_block = {
        "labeling_function": pe["labeling_function"],
        "prediction_window": pe["prediction_window"],
        "min_training_data": pe.get("min_training_data", "0 seconds"),
        "lead": pe.get("lead", "0 seconds"),
        "target_entity": config.target_entity,
    }
    if pe.get("labeling_params"):
        pe_block["labeling_params"] = pe["labeling_params"]

    fe = config.fe
    fe_block = {
        "method": "Deep Feature Synthesis",
        "training_window": fe.get("training_window"),
        "aggregate_primitives": list(fe.get("aggregation_primitives", ())),
        "transform_primitives": list(fe.get("transform_primitives", ())),
        "ignore_variables": fe.get("ignore_variables", {}),
        "max_depth": int(fe.get("max_depth", 2)),
    }
    if fe.get("feature_selection"):
        fe_block["feature_selection"] = fe["feature_selection"]

    m = config.modeling
    modeling_block = {
        "methods": [
            {
                "method": entry.get("method_key") or entry.get("method"),
                "hyperparameter_options": entry["hyperparameter_options"],
            }
            for entry in m["methods"]
        ],
        "budget": m["budget"],
        "automl_method": m.get("automl_method", "random"),
        "cost_function": m.get("cost_function", "f1_cost"),
        "k_repeats": int(m.get("k_repeats", 3)),
        "seed": config.seed,
        "elapsed": outcome.elapsed_seconds,
    }

    validation_methods = config.raw.get("validation_methods", {})
    training_setup = {
        "training": {
            "data_split_id": "train",
            "validation_method": validation_methods.get("train", "unspecified"),
        },
        "tuning": {
            "data_split_id": "threshold-tuning",
            "validation_method": validation_methods.get("tuning", "unspecified"),
        },
        "testing": {
            "data_split_id": "test",
            "validation_method": validation_methods.get("test", "unspecified"),
        },
    }

    fdef = get_labeling_function(pe["labeling_function"])
    labeling_fields = fdef.data_fields(es, pe.get("labeling_params", {}))
    return assemble_provenance(
        metadata_path=config.metadata_text,
        prediction_engineering=pe_block,
        feature_engineering=fe_block,
        modeling=modeling_block,
        data_splits=config.data_splits,
        training_setup=training_setup,
        results_test=artifact.results_test,
        deployment_executable=config.deployment.get("executable", "chronoforge"),
        feature_list_path="feature_list.json",
        model_path="model.json",
        threshold=artifact.threshold,
        es=es,
        feature_list=features,
        labeling_fields=labeling_fields,
        train_matrix=train_matrix,
    )


def load_bundle(config: RunConfig, es: EntitySet) -> DeploymentBundle:
    out = config.output_dir
    model_path = _require_artifact(out / "model.json", "model.json", "train")
    feature_list_path = _require_artifact(out / "feature_list.json", "feature_list.json", "features")
    provenance_path = _require_artifact(
        out / "model_provenance.json", "model_provenance.json", "train"
    )
    return DeploymentBundle.load(
        model_path, feature_list_path, config.metadata_path, provenance_path, es
    )


def cmd_test(config: RunConfig, new_data=None, current_time=None) -> IntegrationReport:
    es, _metadata = load_config_entityset(config)
    bundle = load_bundle(config, es)
    new_data = new_data or config.integration.get("new_data_dir")
    if new_data is None:
        raise ConfigError("integration test needs --new-data or integration_test.new_data_dir")
    current = current_time or config.integration.get("current_time")
    if current is None:
        raise ConfigError("integration test needs --current-time or integration_test.current_time")
    report = integration_test(
        bundle, es, config.resolve(str(new_data)), parse_timestamp(str(current))
    )
    (config.output_dir / "integration_report.json").write_text(
        report.to_json_text(), encoding="utf-8"
    )
    if report.predictions is not None:
        write_predictions_csv(report.predictions, config.output_dir / "integration_predictions.csv")
    return report


def cmd_validate(config: RunConfig, new_data=None) -> ValidationReport:
    from chronoforge.modeling.costs import resolve_cost_function

    es, metadata = load_config_entityset(config)
    new_data = new_data or config.validation.get("new_data_dir")
    if new_data is not None:
        from chronoforge.entityset import add_new_data

        es = add_new_data(es, config.resolve(str(new_data)), metadata)
    bundle = load_bundle(config, es)

    pairs_file = config.validation.get("timestamps_file")
    if pairs_file:
        pairs = []
        path = config.resolve(pairs_file)
        for line in Path(path).read_text(encoding="utf-8").splitlines()[1:]:
            instance_id, when = line.split(",")[:2]
            pairs.append((instance_id, parse_timestamp(when)))
    else:
        test_times = _read_label_times(config, "test", "labels")
        pairs = [(r.instance_id, r.cutoff_time) for r in test_times.rows]

    horizon = config.validation.get("data_horizon")
    report = validate_in_production(
        bundle,
        es,
        config.pe["labeling_function"],
        pairs,
        resolve_cost_function(
            config.modeling.get("cost_function", "f1_cost"),
            config.modeling.get("cost_function_params", {}),
        ),
        config.base_label_params(),
        config.pe.get("labeling_params", {}),
        data_horizon=parse_timestamp(horizon) if horizon else None,
    )
    (config.output_dir / "validation_report.json").write_text(
        report.to_json_text(), encoding="utf-8"
    )
    return report


def cmd_predict(config: RunConfig, at=None, instances=None, new_data=None):
    es, metadata = load_config_entityset(config)
    if new_data is not None:
        from chronoforge.entityset import add_new_data

        es = add_new_data(es, config.resolve(str(new_data)), metadata)
    bundle = load_bundle(config, es)
    if at is None:
        raise ConfigError("predict needs --at TIMESTAMP")
    when = parse_timestamp(str(at))
    target = es.entity(config.target_entity)
    ids = instances if instances else list(target.columns[target.index])
    matrix = calculate_feature_matrix(
        es, [(i, when) for i in ids], bundle.feature_list, bundle.dfs_params
    )
    predictions = generate_predictions(bundle, matrix)
    write_predictions_csv(predictions, config.output_dir / "predictions.csv")
    return predictions
