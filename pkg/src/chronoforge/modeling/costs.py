"""Cost functions: domain-specific scalars over thresholded predictions.

A cost function sees the entityset (for domain lookups such as joining
transaction amounts), the per-row predictions after the decision rule,
and the true labels; lower is better. Registered by name so run
configurations and parallel workers can resolve them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from chronoforge.entityset import EntitySet
from chronoforge.errors import ConfigError, DataError
from chronoforge.modeling.metrics import confusion


@dataclass
class Predictions:
    """Per-row scores and thresholded decisions, with row provenance."""

    scores: np.ndarray
    decisions: np.ndarray  # bool; score >= threshold
    instance_ids: list[str] | None = None
    cutoffs: list[int] | None = None


CostFunction = Callable[[EntitySet | None, Predictions, np.ndarray], float]

COST_FUNCTIONS: dict[str, Callable[..., CostFunction]] = {}


def register_cost_function(name: str):
    def decorate(factory):
        COST_FUNCTIONS[name] = factory
        return factory

    return decorate


def resolve_cost_function(name: str, params: dict | None = None) -> CostFunction:
    factory = COST_FUNCTIONS.get(name)
    if factory is None:
        raise ConfigError(f"unknown cost function {name!r}")
    return factory(**(params or {}))


def _counts(predictions: Predictions, labels: np.ndarray) -> tuple[int, int, int, int]:
    scores = np.where(predictions.decisions, 1.0, 0.0)
    return confusion(scores, labels, 0.5)


@register_cost_function("f1_cost")
def f1_cost() -> CostFunction:
    """1 - F1; zero errors cost 0 even when no positives exist."""

    def cost(es, predictions, labels) -> float:
        tp, fp, _tn, fn = _counts(predictions, labels)
        if fp + fn == 0:
            return 0.0
        return 1.0 - (2.0 * tp) / (2.0 * tp + fp + fn)

    return cost


@register_cost_function("weighted_cost")
def weighted_cost(fp_weight: float = 1.0, fn_weight: float = 1.0) -> CostFunction:
    """(fp_weight*FP + fn_weight*FN) / n."""

    def cost(es, predictions, labels) -> float:
        tp, fp, tn, fn = _counts(predictions, labels)
        n = tp + fp + tn + fn
        return (fp_weight * fp + fn_weight * fn) / n if n else 0.0

    return cost


@register_cost_function("value_weighted_cost")
def value_weighted_cost(entity: str, column: str) -> CostFunction:
    """Sum of the amounts of missed positives, joined by instance id."""

    def cost(es, predictions, labels) -> float:
        if es is None:
            raise ConfigError("value_weighted_cost needs the entityset to join amounts")
        if predictions.instance_ids is None:
            raise ConfigError("value_weighted_cost needs per-row instance ids")
        table = es.entity(entity)
        if table.variable(column) is None:
            raise DataError(f"amount column {entity}.{column} is missing")
        total = 0.0
        positive = np.asarray(labels, dtype=np.float64) >= 0.5
        for i, instance_id in enumerate(predictions.instance_ids):
            if positive[i] and not predictions.decisions[i]:
                row = table.index_positions.get(instance_id)
                if row is None:
                    raise DataError(f"instance {instance_id!r} not found in {entity!r}")
                value = table.python_value(column, row)
                if value is not None:
                    total += float(value)
        return total

    return cost
