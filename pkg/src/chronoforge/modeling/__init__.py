"""Budgeted model search with cost-driven threshold tuning."""

from chronoforge.modeling.costs import COST_FUNCTIONS, Predictions, register_cost_function, resolve_cost_function
from chronoforge.modeling.encoding import TrainingEncoder
from chronoforge.modeling.learners import fit_learner, learner_from_json, predict_scores
from chronoforge.modeling.methodspec import MethodSpec, load_method_spec, parse_method_spec
from chronoforge.modeling.metrics import compute_metrics, threshold_grid, tune_threshold
from chronoforge.modeling.search import (
    Leaderboard,
    MethodEntry,
    ModelArtifact,
    SearchParams,
    search_model,
)

__all__ = [
    "COST_FUNCTIONS",
    "Leaderboard",
    "MethodEntry",
    "MethodSpec",
    "ModelArtifact",
    "Predictions",
    "SearchParams",
    "TrainingEncoder",
    "compute_metrics",
    "fit_learner",
    "learner_from_json",
    "load_method_spec",
    "parse_method_spec",
    "predict_scores",
    "register_cost_function",
    "resolve_cost_function",
    "search_model",
    "threshold_grid",
    "tune_threshold",
]
