"""Classification metrics and grid threshold tuning.

The decision rule everywhere is: predict positive iff score >= threshold.
AUC uses the rank formulation with average ranks on tied scores, which
equals the trapezoid over the tie-grouped ROC sweep.
"""

from __future__ import annotations

import numpy as np

from chronoforge.errors import ConfigError


def confusion(scores: np.ndarray, labels: np.ndarray, threshold: float) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) under the inclusive decision rule."""
    decisions = scores >= threshold
    positive = labels >= 0.5
    tp = int(np.count_nonzero(decisions & positive))
    fp = int(np.count_nonzero(decisions & ~positive))
    tn = int(np.count_nonzero(~decisions & ~positive))
    fn = int(np.count_nonzero(~decisions & positive))
    return tp, fp, tn, fn


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks


def auc_score(scores: np.ndarray, labels: np.ndarray) -> float | None:
    """Rank-based ROC AUC; None when labels hold a single class."""
    positive = labels >= 0.5
    n_pos = int(np.count_nonzero(positive))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _average_ranks(np.asarray(scores, dtype=np.float64))
    pos_rank_sum = float(np.add.reduce(ranks[positive]))
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def compute_metrics(scores, labels, threshold: float) -> dict:
    """precision/recall/fpr at the threshold plus threshold-free AUC.

    Ratios with a zero denominator are None, as is AUC on single-class
    labels.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    tp, fp, tn, fn = confusion(scores, labels, threshold)
    return {
        "precision": tp / (tp + fp) if tp + fp else None,
        "recall": tp / (tp + fn) if tp + fn else None,
        "fpr": fp / (fp + tn) if fp + tn else None,
        "auc": auc_score(scores, labels),
    }


def threshold_grid(step: float) -> list[float]:
    """The grid {0, step, 2*step, ..., 1}."""
    if not 0.0 < step <= 1.0:
        raise ConfigError("threshold_grid_step must be in (0, 1]")
    n = int(round(1.0 / step))
    grid = [k * step for k in range(n + 1)]
    if grid[-1] != 1.0:
        grid.append(1.0)
    return grid


def tune_threshold(evaluate_cost, step: float) -> tuple[float, float]:
    """Grid-argmin of the cost; ties resolve to the lowest threshold."""
    best_threshold = None
    best_cost = None
    for theta in threshold_grid(step):
        cost = evaluate_cost(theta)
        if best_cost is None or cost < best_cost:
            best_cost = cost
            best_threshold = theta
    assert best_threshold is not None and best_cost is not None
    return best_threshold, best_cost
