"""Bagged regression trees with axis-aligned variance-minimizing splits.

Trees are grown on bootstrap resamples until min_samples_leaf, with every
feature considered at each split; leaves predict the mean target. Training
is deterministic given the seed, and the forest serializes to a
self-describing JSON file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ValidationError


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    min_samples_leaf: int = 1
    min_samples_split: int = 2
    max_depth: int | None = None


@dataclass
class _Tree:
    # parallel node arrays; leaf nodes have feature == -1
    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    value: list[float]

    def predict_one(self, x: np.ndarray) -> float:
        node = 0
        while self.feature[node] >= 0:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return self.value[node]


def _best_split(X: np.ndarray, y: np.ndarray) -> tuple[int, float] | None:
    """Feature and threshold minimizing weighted child variance, or None."""
    n = len(y)
    y_sum = y.sum()
    y_sq = (y * y).sum()
    best_score = y_sq - y_sum * y_sum / n  # total SSE; any split must improve it
    best: tuple[int, float] | None = None
    for f in range(X.shape[1]):
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        cs = col[order]
        ys = y[order]
        cum_sum = np.cumsum(ys)
        cum_sq = np.cumsum(ys * ys)
        # split between distinct consecutive values
        distinct = cs[:-1] < cs[1:]
        if not np.any(distinct):
            continue
        idx = np.nonzero(distinct)[0]
        nl = idx + 1
        nr = n - nl
        sse_left = cum_sq[idx] - cum_sum[idx] ** 2 / nl
        sse_right = (y_sq - cum_sq[idx]) - (y_sum - cum_sum[idx]) ** 2 / nr
        scores = sse_left + sse_right
        k = int(np.argmin(scores))
        if scores[k] < best_score - 1e-12:
            best_score = float(scores[k])
            best = (f, float((cs[idx[k]] + cs[idx[k] + 1]) / 2.0))
    return best


def _grow_tree(X: np.ndarray, y: np.ndarray, params: ForestParams) -> _Tree:
    tree = _Tree(feature=[], threshold=[], left=[], right=[], value=[])

    def new_node() -> int:
        tree.feature.append(-1)
        tree.threshold.append(0.0)
        tree.left.append(-1)
        tree.right.append(-1)
        tree.value.append(0.0)
        return len(tree.feature) - 1

    def build(indices: np.ndarray, depth: int) -> int:
        node = new_node()
        ys = y[indices]
        tree.value[node] = float(ys.mean())
        if (
            len(indices) < params.min_samples_split
            or len(indices) < 2 * params.min_samples_leaf
            or (params.max_depth is not None and depth >= params.max_depth)
            or np.all(ys == ys[0])
        ):
            return node
        split = _best_split(X[indices], ys)
        if split is None:
            return node
        f, thr = split
        go_left = X[indices, f] <= thr
        left_idx = indices[go_left]
        right_idx = indices[~go_left]
        if len(left_idx) < params.min_samples_leaf or len(right_idx) < params.min_samples_leaf:
            return node
        tree.feature[node] = f
        tree.threshold[node] = thr
        tree.left[node] = build(left_idx, depth + 1)
        tree.right[node] = build(right_idx, depth + 1)
        return node

    build(np.arange(len(y)), 0)
    return tree


@dataclass
class RegressionForest:
    trees: list[_Tree]
    n_features: int
    target_min: float
    target_max: float
    params: ForestParams
    seed: int

    def predict(self, x: np.ndarray) -> float:
        """Mean of tree predictions, clamped to [0, 1]."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_features,):
            raise ValidationError(
                f"feature vector length {x.shape} does not match training "
                f"dimension {self.n_features}"
            )
        raw = float(np.mean([t.predict_one(x) for t in self.trees]))
        return min(max(raw, 0.0), 1.0)

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.predict(row) for row in np.asarray(X, dtype=np.float64)])


def train_forest(
    X: np.ndarray,
    y: np.ndarray,
    params: ForestParams | None = None,
    seed: int = 0,
) -> RegressionForest:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValidationError("X must be 2-D with one target per row")
    if len(y) == 0:
        raise ValidationError("empty training set")
    if np.any(y < 0) or np.any(y > 1):
        raise ValidationError("targets must lie in [0, 1]")
    params = params or ForestParams()
    if params.n_trees < 1:
        raise ConfigError("need at least one tree")
    rng = np.random.default_rng(seed)
    n = len(y)
    trees = []
    for _ in range(params.n_trees):
        sample = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X[sample], y[sample], params))
    return RegressionForest(
        trees=trees,
        n_features=X.shape[1],
        target_min=float(y.min()),
        target_max=float(y.max()),
        params=params,
        seed=seed,
    )


def save_forest(forest: RegressionForest, path: str | Path) -> None:
    doc = {
        "format": "docdeteval-rfr",
        "version": 1,
        "n_features": forest.n_features,
        "target_min": forest.target_min,
        "target_max": forest.target_max,
        "seed": forest.seed,
        "params": {
            "n_trees": forest.params.n_trees,
            "min_samples_leaf": forest.params.min_samples_leaf,
            "min_samples_split": forest.params.min_samples_split,
            "max_depth": forest.params.max_depth,
        },
        "trees": [
            {
                "feature": t.feature,
                "threshold": t.threshold,
                "left": t.left,
                "right": t.right,
                "leaf_value": t.value,
            }
            for t in forest.trees
        ],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_forest(path: str | Path) -> RegressionForest:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "docdeteval-rfr":
        raise ValidationError(f"{path}: not a forest model file")
    params = ForestParams(**doc["params"])
    trees = [
        _Tree(
            feature=t["feature"],
            threshold=t["threshold"],
            left=t["left"],
            right=t["right"],
            value=t["leaf_value"],
        )
        for t in doc["trees"]
    ]
    return RegressionForest(
        trees=trees,
        n_features=doc["n_features"],
        target_min=doc["target_min"],
        target_max=doc["target_max"],
        params=params,
        seed=doc["seed"],
    )
