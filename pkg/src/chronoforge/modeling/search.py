"""Budgeted model search over JSON-specified method spaces.

For every sampled configuration and every seed 0..k-1: fit on the
train split, pick the threshold minimizing the cost function on the
threshold-tuning split (grid argmin, ties to the lowest threshold),
evaluate on the test split at that threshold. The winner has the
lowest mean test cost (ties: lower cost stddev, earlier method,
lexicographic hyperparameters) and is refit on train with seed 0.
"""

from __future__ import annotations

import csv
import json
import math
import multiprocessing
import time
from dataclasses import dataclass, field

import numpy as np

from chronoforge.entityset import EntitySet
from chronoforge.errors import ConfigError, DegenerateLabelsError, SearchBudgetError
from chronoforge.features.matrix import FeatureMatrix
from chronoforge.jsonutil import canonical_dumps
from chronoforge.modeling.costs import CostFunction, Predictions, resolve_cost_function
from chronoforge.modeling.encoding import TrainingEncoder
from chronoforge.modeling.learners import fit_learner, learner_from_json, predict_scores
from chronoforge.modeling.methodspec import MethodSpec
from chronoforge.modeling.metrics import compute_metrics, tune_threshold
from chronoforge.timeutil import Duration

SPLIT_TRAIN = "train"
SPLIT_TUNING = "threshold-tuning"
SPLIT_TEST = "test"
REQUIRED_SPLITS = (SPLIT_TRAIN, SPLIT_TUNING, SPLIT_TEST)


@dataclass(frozen=True)
class MethodEntry:
    method_key: str
    spec: MethodSpec
    spec_path: str = ""


@dataclass
class SearchParams:
    methods: list[MethodEntry]
    budget: int | Duration
    automl_method: str = "random"
    seed: int = 0
    k_repeats: int = 3
    threshold_grid_step: float = 0.001
    cost_function: str = "f1_cost"
    cost_function_params: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not self.methods:
            raise ConfigError("model search needs at least one method")
        if isinstance(self.budget, int):
            if self.budget <= 0:
                raise ConfigError("budget must be positive")
        elif isinstance(self.budget, Duration):
            if self.budget.seconds <= 0:
                raise ConfigError("budget duration must be positive")
        else:
            raise ConfigError("budget must be a configuration count or a duration")
        if self.automl_method not in ("random", "grid"):
            raise ConfigError(f"unknown automl method {self.automl_method!r}")
        if self.k_repeats < 1:
            raise ConfigError("k_repeats must be at least 1")


@dataclass
class ConfigResult:
    index: int
    method_index: int
    method_key: str
    hyperparameters: dict
    status: str = "ok"
    error: str | None = None
    seed_records: list[dict] = field(default_factory=list)
    seed_costs: list[float] = field(default_factory=list)
    mean_cost: float = math.inf
    std_cost: float = math.inf
    seed0_threshold: float = 0.0
    seed0_test_scores: np.ndarray | None = None

    @property
    def hyperparameters_key(self) -> str:
        return json.dumps(self.hyperparameters, sort_keys=True)


@dataclass
class Leaderboard:
    entries: list[ConfigResult]

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["rank", "method_key", "hyperparameters", "status",
                 "mean_test_cost", "std_test_cost", "mean_auc", "error"]
            )
            for rank, entry in enumerate(self.entries, start=1):
                if entry.status == "ok":
                    aucs = [r["auc"] for r in entry.seed_records if r["auc"] is not None]
                    mean_auc = repr(sum(aucs) / len(aucs)) if aucs else ""
                    writer.writerow(
                        [rank, entry.method_key, entry.hyperparameters_key, entry.status,
                         repr(entry.mean_cost), repr(entry.std_cost), mean_auc, ""]
                    )
                else:
                    writer.writerow(
                        [rank, entry.method_key, entry.hyperparameters_key, entry.status,
                         "", "", "", entry.error or ""]
                    )


@dataclass
class ModelArtifact:
    """A fitted, thresholded, fully serializable model."""

    method_key: str
    hyperparameters: dict
    learner: object
    threshold: float
    encoder: TrainingEncoder
    columns: list[str]
    column_kinds: list[str]
    results_test: list[dict]
    feature_list_hash: str | None = None
    search_info: dict = field(default_factory=dict)

    def score_matrix(self, matrix: FeatureMatrix) -> np.ndarray:
        """Scores for a matrix whose columns match the training columns exactly."""
        from chronoforge.errors import ColumnMismatchError

        for position, expected in enumerate(self.columns):
            got = matrix.feature_names[position] if position < matrix.n_features else "<missing>"
            if got != expected:
                raise ColumnMismatchError(expected, got, position)
        if matrix.n_features != len(self.columns):
            raise ColumnMismatchError("<end of columns>", matrix.feature_names[len(self.columns)], len(self.columns))
        if matrix.n_rows == 0:
            return np.empty(0)
        X = self.encoder.transform(matrix.columns, matrix.kinds, matrix.feature_names)
        return predict_scores(self.learner, X)

    def to_json_text(self) -> str:
        payload = {
            "method_key": self.method_key,
            "hyperparameters": self.hyperparameters,
            "threshold": self.threshold,
            "learner": self.learner.to_json(),
            "imputation": self.encoder.to_json(),
            "columns": list(self.columns),
            "column_kinds": list(self.column_kinds),
            "results": {"test": self.results_test},
            "feature_list_hash": self.feature_list_hash,
            "search": self.search_info,
        }
        return canonical_dumps(payload)

    @staticmethod
    def from_json_text(text: str) -> "ModelArtifact":
        raw = json.loads(text)
        return ModelArtifact(
            method_key=raw["method_key"],
            hyperparameters=raw["hyperparameters"],
            learner=learner_from_json(raw["learner"]),
            threshold=float(raw["threshold"]),
            encoder=TrainingEncoder.from_json(raw["imputation"]),
            columns=list(raw["columns"]),
            column_kinds=list(raw["column_kinds"]),
            results_test=list(raw["results"]["test"]),
            feature_list_hash=raw.get("feature_list_hash"),
            search_info=raw.get("search", {}),
        )


@dataclass
class SearchOutcome:
    artifact: ModelArtifact
    leaderboard: Leaderboard
    elapsed_seconds: float


# ---------------------------------------------------------------------------
# Configuration generation
# ---------------------------------------------------------------------------


def _generate_configs(params: SearchParams, count_cap: int | None):
    """Yield (index, method_index, hyperparameters) deterministically.

    Configurations interleave methods round-robin; random draws come
    from a per-configuration seed so parallel evaluation reproduces
    the sequential sequence.
    """
    import random as _random

    methods = params.methods
    if params.automl_method == "grid":
        grids = [entry.spec.grid_params() for entry in methods]
        positions = [0] * len(methods)
        index = 0
        exhausted = 0
        m = 0
        while exhausted < len(methods):
            if count_cap is not None and index >= count_cap:
                return
            if positions[m] < len(grids[m]):
                yield index, m, grids[m][positions[m]]
                positions[m] += 1
                index += 1
                exhausted = 0
            else:
                exhausted += 1
            m = (m + 1) % len(methods)
        return
    index = 0
    while count_cap is None or index < count_cap:
        m = index % len(methods)
        rng = _random.Random(f"{params.seed}|config|{index}")
        yield index, m, methods[m].spec.sample_params(rng)
        index += 1


# ---------------------------------------------------------------------------
# Configuration evaluation
# ---------------------------------------------------------------------------

_WORKER_CTX: dict | None = None


def _evaluate_config(ctx: dict, index: int, method_index: int, hyperparameters: dict) -> ConfigResult:
    params: SearchParams = ctx["params"]
    cost_fn: CostFunction = ctx["cost_fn"]
    es = ctx["es"]
    result = ConfigResult(index, method_index, params.methods[method_index].method_key, hyperparameters)
    spec = params.methods[method_index].spec
    try:
        spec.check_params(hyperparameters)
        costs: list[float] = []
        for seed in range(params.k_repeats):
            learner = fit_learner(
                result.method_key, hyperparameters, ctx["X_train"], ctx["y_train"], seed
            )
            tune_scores = predict_scores(learner, ctx["X_tuning"])

            def tuning_cost(theta: float) -> float:
                predictions = Predictions(
                    tune_scores, tune_scores >= theta,
                    ctx["ids_tuning"], ctx["cutoffs_tuning"],
                )
                return cost_fn(es, predictions, ctx["y_tuning"])

            threshold, _ = tune_threshold(tuning_cost, params.threshold_grid_step)
            test_scores = predict_scores(learner, ctx["X_test"])
            predictions = Predictions(
                test_scores, test_scores >= threshold, ctx["ids_test"], ctx["cutoffs_test"]
            )
            test_cost = cost_fn(es, predictions, ctx["y_test"])
            metrics = compute_metrics(test_scores, ctx["y_test"], threshold)
            record = {"random_seed": seed, "threshold": threshold}
            record.update(metrics)
            result.seed_records.append(record)
            costs.append(test_cost)
            if seed == 0:
                result.seed0_threshold = threshold
                result.seed0_test_scores = test_scores
        result.seed_costs = costs
        mean = sum(costs) / len(costs)
        result.mean_cost = mean
        result.std_cost = math.sqrt(sum((c - mean) ** 2 for c in costs) / len(costs))
    except Exception as exc:  # a failing configuration never kills the search
        result.status = "failed"
        result.error = f"{type(exc).__name__}: {exc}"
        result.seed_records = []
        result.seed_costs = []
    return result


def _worker_evaluate(task: tuple[int, int, dict]) -> ConfigResult:
    assert _WORKER_CTX is not None
    index, method_index, hyperparameters = task
    return _evaluate_config(_WORKER_CTX, index, method_index, hyperparameters)


def _split_arrays(matrix: FeatureMatrix, encoder: TrainingEncoder) -> tuple[np.ndarray, np.ndarray]:
    from chronoforge.errors import DataError

    if matrix.labels is None:
        raise ConfigError("model search splits need label columns")
    values = []
    for label in matrix.labels:
        if not isinstance(label, bool):
            raise DataError(
                f"label {label!r} is not boolean; modeling supports binary labels only"
            )
        values.append(1.0 if label else 0.0)
    y = np.array(values, dtype=np.float64)
    X = encoder.transform(matrix.columns, matrix.kinds, matrix.feature_names)
    return X, y


# ---------------------------------------------------------------------------
# Search driver
# ---------------------------------------------------------------------------


def search_model(
    splits: dict[str, FeatureMatrix],
    params: SearchParams,
    es: EntitySet | None = None,
    jobs: int = 1,
) -> SearchOutcome:
    """Run the budgeted search and return the winning model artifact."""
    params.validate()
    for split_id in REQUIRED_SPLITS:
        if split_id not in splits:
            raise ConfigError(f"missing split {split_id!r}")
    cost_fn = resolve_cost_function(params.cost_function, params.cost_function_params)

    train = splits[SPLIT_TRAIN]
    encoder = TrainingEncoder.fit(train.columns, train.kinds, train.feature_names)
    ctx: dict = {"params": params, "cost_fn": cost_fn, "es": es}
    for split_id, short in ((SPLIT_TRAIN, "train"), (SPLIT_TUNING, "tuning"), (SPLIT_TEST, "test")):
        matrix = splits[split_id]
        X, y = _split_arrays(matrix, encoder)
        ctx[f"X_{short}"] = X
        ctx[f"y_{short}"] = y
        ctx[f"ids_{short}"] = matrix.instance_ids
        ctx[f"cutoffs_{short}"] = matrix.cutoffs
    for split_id, short in ((SPLIT_TRAIN, "train"), (SPLIT_TEST, "test")):
        if len(set(ctx[f"y_{short}"].tolist())) < 2:
            raise DegenerateLabelsError(f"{split_id} split needs both classes")

    start = time.monotonic()
    results: list[ConfigResult]
    if isinstance(params.budget, Duration):
        # duration budgets are soft caps checked between configurations
        results = []
        deadline = start + params.budget.seconds
        for index, m, hp in _generate_configs(params, None):
            if results and time.monotonic() >= deadline:
                break
            results.append(_evaluate_config(ctx, index, m, hp))
    else:
        tasks = list(_generate_configs(params, params.budget))
        if jobs > 1 and len(tasks) > 1:
            global _WORKER_CTX
            _WORKER_CTX = ctx
            try:
                with multiprocessing.get_context("fork").Pool(min(jobs, len(tasks))) as pool:
                    results = pool.map(_worker_evaluate, tasks)
            finally:
                _WORKER_CTX = None
            results.sort(key=lambda r: r.index)
        else:
            results = [_evaluate_config(ctx, index, m, hp) for index, m, hp in tasks]
    elapsed = time.monotonic() - start

    ok = [r for r in results if r.status == "ok"]
    failed = [r for r in results if r.status != "ok"]
    ok.sort(key=lambda r: (r.mean_cost, r.std_cost, r.method_index, r.hyperparameters_key))
    leaderboard = Leaderboard(ok + failed)
    if not ok:
        raise SearchBudgetError(
            "budget exhausted before any configuration completed", leaderboard
        )
    winner = ok[0]

    learner = fit_learner(
        winner.method_key, winner.hyperparameters, ctx["X_train"], ctx["y_train"], seed=0
    )
    budget_echo = params.budget.render() if isinstance(params.budget, Duration) else params.budget
    artifact = ModelArtifact(
        method_key=winner.method_key,
        hyperparameters=winner.hyperparameters,
        learner=learner,
        threshold=winner.seed0_threshold,
        encoder=encoder,
        columns=list(train.feature_names),
        column_kinds=list(train.kinds),
        results_test=winner.seed_records,
        search_info={
            "automl_method": params.automl_method,
            "seed": params.seed,
            "k_repeats": params.k_repeats,
            "budget": budget_echo,
            "cost_function": params.cost_function,
        },
    )
    return SearchOutcome(artifact, leaderboard, elapsed)
