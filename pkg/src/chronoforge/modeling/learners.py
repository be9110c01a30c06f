"""The registered learners: CART decision tree, bagged forest, logistic GD.

All learners consume an imputed/encoded float matrix and binary labels
and emit per-row scores in [0, 1]. Trees use midpoint thresholds and
leaf scores equal to the positive-class fraction; the forest averages
tree scores; logistic regression runs batch gradient descent from a
zero initialization on internally standardized features.
"""

from __future__ import annotations

import math
import random

import numpy as np

from chronoforge import _kernels as K
from chronoforge.errors import ConfigError, DegenerateLabelsError, UnknownMethodError

_CRITERIA = {"gini": K.CRITERION_GINI, "entropy": K.CRITERION_ENTROPY}


# ---------------------------------------------------------------------------
# Decision tree
# ---------------------------------------------------------------------------


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "score")

    def __init__(self, feature=None, threshold=0.0, left=None, right=None, score=0.0):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.score = score

    def to_json(self) -> dict:
        if self.feature is None:
            return {"score": self.score}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_json(),
            "right": self.right.to_json(),
        }

    @staticmethod
    def from_json(raw: dict) -> "_Node":
        if "feature" not in raw:
            return _Node(score=raw["score"])
        return _Node(
            feature=raw["feature"],
            threshold=raw["threshold"],
            left=_Node.from_json(raw["left"]),
            right=_Node.from_json(raw["right"]),
        )


class DecisionTree:
    """CART binary classifier; rows with feature value <= threshold go left."""

    def __init__(
        self,
        criterion: str = "gini",
        max_features: float = 1.0,
        max_depth: int = 10,
        min_samples_split: int = 2,
        min_samples_leaf: int = 1,
    ) -> None:
        if criterion not in _CRITERIA:
            raise ConfigError(f"unknown criterion {criterion!r}")
        self.criterion = criterion
        self.max_features = float(max_features)
        self.max_depth = int(max_depth)
        self.min_samples_split = int(min_samples_split)
        self.min_samples_leaf = int(min_samples_leaf)
        self.root: _Node | None = None
        self._importance: np.ndarray | None = None

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0, rng: random.Random | None = None) -> "DecisionTree":
        n, d = X.shape
        crit = _CRITERIA[self.criterion]
        n_candidates = max(1, int(self.max_features * d))
        # with all features in play the tree is deterministic: no draws at all
        if n_candidates < d and rng is None:
            rng = random.Random(f"dt|{seed}")
        self._importance = np.zeros(d)

        def build(idx: np.ndarray, depth: int) -> _Node:
            y_node = y[idx]
            n_node = len(idx)
            pos = float(np.add.reduce(y_node)) if n_node else 0.0
            node = _Node(score=pos / n_node if n_node else 0.0)
            if (
                depth >= self.max_depth
                or n_node < self.min_samples_split
                or pos == 0.0
                or pos == n_node
            ):
                return node
            if n_candidates < d:
                candidates = sorted(rng.sample(range(d), n_candidates))
            else:
                candidates = range(d)
            best_gain = -math.inf
            best_feature = -1
            best_threshold = 0.0
            for f in candidates:
                col = X[idx, f]
                order = np.argsort(col, kind="stable")
                vals = np.ascontiguousarray(col[order])
                labs = np.ascontiguousarray(y_node[order])
                found, gain, threshold = K.scan_splits(vals, labs, crit, self.min_samples_leaf)
                if found and gain > best_gain:
                    best_gain = gain
                    best_feature = f
                    best_threshold = threshold
            if best_feature < 0:
                return node
            mask = X[idx, best_feature] <= best_threshold
            left_idx = idx[mask]
            right_idx = idx[~mask]
            if len(left_idx) == 0 or len(right_idx) == 0:
                return node
            self._importance[best_feature] += (n_node / n) * best_gain
            node.feature = best_feature
            node.threshold = best_threshold
            node.left = build(left_idx, depth + 1)
            node.right = build(right_idx, depth + 1)
            return node

        self.root = build(np.arange(n, dtype=np.int64), 0)
        return self

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        if self.root is None:
            raise ConfigError("tree is not fitted")
        out = np.empty(len(X))
        for i in range(len(X)):
            node = self.root
            while node.feature is not None:
                node = node.left if X[i, node.feature] <= node.threshold else node.right
            out[i] = node.score
        return out

    def feature_importances(self) -> np.ndarray:
        assert self._importance is not None
        total = float(np.add.reduce(self._importance))
        return self._importance / total if total > 0 else self._importance.copy()

    def to_json(self) -> dict:
        assert self.root is not None
        return {
            "type": "decision_tree",
            "criterion": self.criterion,
            "max_features": self.max_features,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "tree": self.root.to_json(),
        }

    @staticmethod
    def from_json(raw: dict) -> "DecisionTree":
        tree = DecisionTree(
            criterion=raw["criterion"],
            max_features=raw["max_features"],
            max_depth=raw["max_depth"],
            min_samples_split=raw["min_samples_split"],
            min_samples_leaf=raw["min_samples_leaf"],
        )
        tree.root = _Node.from_json(raw["tree"])
        return tree


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------


class RandomForest:
    """Bagged CART trees; score is the mean of tree scores."""

    def __init__(
        self,
        n_estimators: int = 10,
        criterion: str = "gini",
        max_features: float = 1.0,
        max_depth: int = 10,
        min_samples_split: int = 2,
        min_samples_leaf: int = 1,
    ) -> None:
        if n_estimators < 1:
            raise ConfigError("n_estimators must be positive")
        self.n_estimators = int(n_estimators)
        self.criterion = criterion
        self.max_features = float(max_features)
        self.max_depth = int(max_depth)
        self.min_samples_split = int(min_samples_split)
        self.min_samples_leaf = int(min_samples_leaf)
        self.trees: list[DecisionTree] = []

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0) -> "RandomForest":
        n = len(X)
        self.trees = []
        for t in range(self.n_estimators):
            rng = random.Random(f"rf|{seed}|{t}")
            idx = np.array([rng.randrange(n) for _ in range(n)], dtype=np.int64)
            tree = DecisionTree(
                criterion=self.criterion,
                max_features=self.max_features,
                max_depth=self.max_depth,
                min_samples_split=self.min_samples_split,
                min_samples_leaf=self.min_samples_leaf,
            )
            tree.fit(X[idx], y[idx], rng=rng)
            self.trees.append(tree)
        return self

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        acc = np.zeros(len(X))
        for tree in self.trees:
            acc += tree.predict_scores(X)
        return acc / self.n_estimators

    def feature_importances(self) -> np.ndarray:
        acc = None
        for tree in self.trees:
            imp = tree.feature_importances()
            acc = imp if acc is None else acc + imp
        assert acc is not None
        return acc / self.n_estimators

    def to_json(self) -> dict:
        return {
            "type": "random_forest",
            "n_estimators": self.n_estimators,
            "criterion": self.criterion,
            "max_features": self.max_features,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "trees": [t.to_json() for t in self.trees],
        }

    @staticmethod
    def from_json(raw: dict) -> "RandomForest":
        forest = RandomForest(
            n_estimators=raw["n_estimators"],
            criterion=raw["criterion"],
            max_features=raw["max_features"],
            max_depth=raw["max_depth"],
            min_samples_split=raw["min_samples_split"],
            min_samples_leaf=raw["min_samples_leaf"],
        )
        forest.trees = [DecisionTree.from_json(t) for t in raw["trees"]]
        return forest


# ---------------------------------------------------------------------------
# Logistic regression (batch gradient descent)
# ---------------------------------------------------------------------------


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


class LogisticRegressionGD:
    """L2-penalized logistic regression, deterministic zero initialization."""

    def __init__(
        self, l2_penalty: float = 0.0, learning_rate: float = 0.1, n_iterations: int = 200
    ) -> None:
        self.l2_penalty = float(l2_penalty)
        self.learning_rate = float(learning_rate)
        self.n_iterations = int(n_iterations)
        self.weights: np.ndarray | None = None
        self.bias = 0.0
        self.means: np.ndarray | None = None
        self.stds: np.ndarray | None = None

    def _standardize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.means) / self.stds

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0) -> "LogisticRegressionGD":
        n, d = X.shape
        self.means = np.add.reduce(X, axis=0) / n
        centered = X - self.means
        var = np.add.reduce(centered * centered, axis=0) / n
        stds = np.sqrt(var)
        stds[stds == 0.0] = 1.0
        self.stds = stds
        Xs = self._standardize(X)
        w = np.zeros(d)
        b = 0.0
        lr = self.learning_rate
        lam = self.l2_penalty
        for _ in range(self.n_iterations):
            z = np.add.reduce(Xs * w, axis=1) + b
            residual = _sigmoid(z) - y
            grad_w = np.add.reduce(Xs * residual[:, None], axis=0) / n + lam * w
            grad_b = float(np.add.reduce(residual)) / n
            w = w - lr * grad_w
            b = b - lr * grad_b
        self.weights = w
        self.bias = b
        return self

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        if self.weights is None:
            raise ConfigError("model is not fitted")
        Xs = self._standardize(X)
        return _sigmoid(np.add.reduce(Xs * self.weights, axis=1) + self.bias)

    def to_json(self) -> dict:
        assert self.weights is not None
        return {
            "type": "logistic_regression",
            "l2_penalty": self.l2_penalty,
            "learning_rate": self.learning_rate,
            "n_iterations": self.n_iterations,
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
        }

    @staticmethod
    def from_json(raw: dict) -> "LogisticRegressionGD":
        model = LogisticRegressionGD(
            l2_penalty=raw["l2_penalty"],
            learning_rate=raw["learning_rate"],
            n_iterations=raw["n_iterations"],
        )
        model.weights = np.array(raw["weights"], dtype=np.float64)
        model.bias = float(raw["bias"])
        model.means = np.array(raw["means"], dtype=np.float64)
        model.stds = np.array(raw["stds"], dtype=np.float64)
        return model


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

LEARNERS = {
    "decision_tree": DecisionTree,
    "random_forest": RandomForest,
    "logistic_regression": LogisticRegressionGD,
}

_LOADERS = {
    "decision_tree": DecisionTree.from_json,
    "random_forest": RandomForest.from_json,
    "logistic_regression": LogisticRegressionGD.from_json,
}


def fit_learner(method_key: str, hyperparameters: dict, X: np.ndarray, y: np.ndarray, seed: int):
    """Construct and fit a registered learner."""
    cls = LEARNERS.get(method_key)
    if cls is None:
        raise UnknownMethodError(method_key)
    classes = set(np.asarray(y, dtype=np.float64).tolist())
    if len(classes) < 2:
        raise DegenerateLabelsError(f"cannot fit {method_key} on single-class labels")
    learner = cls(**hyperparameters)
    return learner.fit(np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.float64), seed=seed)


def predict_scores(learner, X: np.ndarray) -> np.ndarray:
    """Per-row positive-class score in [0, 1]."""
    return learner.predict_scores(np.asarray(X, dtype=np.float64))


def learner_from_json(raw: dict):
    loader = _LOADERS.get(raw.get("type", ""))
    if loader is None:
        raise UnknownMethodError(str(raw.get("type")))
    return loader(raw)
