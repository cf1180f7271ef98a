"""Regression trees and the two ensembles built on them.

Trees are plain CART: axis-aligned splits chosen to minimize the summed
squared error of the two children, stored as flat arrays for fast
vectorized prediction.  Determinism is part of the contract: every
random choice flows from a per-tree generator derived from
(seed, tree index), and split ties break toward the lowest feature
index, then the smallest threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset


@dataclass
class TreeNodes:
    """Flat node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]


def predict_tree(tree: TreeNodes, x: np.ndarray) -> np.ndarray:
    idx = np.zeros(x.shape[0], dtype=np.int64)
    while True:
        feat = tree.feature[idx]
        active = np.nonzero(feat >= 0)[0]
        if active.size == 0:
            return tree.value[idx]
        rows = idx[active]
        go_left = x[active, feat[active]] <= tree.threshold[rows]
        idx[active] = np.where(go_left, tree.left[rows], tree.right[rows])


def _best_split(
    x: np.ndarray,
    y: np.ndarray,
    rows: np.ndarray,
    candidates: np.ndarray,
    min_samples_leaf: int,
) -> tuple[int, float, float] | None:
    """(feature, threshold, split_sse) minimizing child SSE, or None.

    Candidate features are visited in ascending index order and only a
    strictly smaller SSE displaces the incumbent, so ties resolve to the
    lowest feature index; within a feature, the first (smallest)
    threshold among equals wins.
    """
    m = rows.size
    best: tuple[int, float, float] | None = None
    for f in candidates:
        values = x[rows, f]
        order = np.argsort(values, kind="stable")
        xs = values[order]
        ys = y[rows][order]
        csum = np.cumsum(ys)
        csum_sq = np.cumsum(ys**2)
        total, total_sq = csum[-1], csum_sq[-1]
        sizes = np.arange(1, m)
        valid = xs[:-1] < xs[1:]
        if min_samples_leaf > 1:
            valid &= (sizes >= min_samples_leaf) & (m - sizes >= min_samples_leaf)
        if not valid.any():
            continue
        left_sse = csum_sq[:-1] - csum[:-1] ** 2 / sizes
        right_sse = (total_sq - csum_sq[:-1]) - (total - csum[:-1]) ** 2 / (m - sizes)
        sse = np.where(valid, left_sse + right_sse, np.inf)
        pos = int(np.argmin(sse))
        if best is None or sse[pos] < best[2]:
            best = (int(f), float((xs[pos] + xs[pos + 1]) / 2.0), float(sse[pos]))
    return best


def build_tree(
    x: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    max_depth: int,
    min_samples_leaf: int,
    max_features: int | None,
) -> TreeNodes:
    """Grow one CART regression tree on (x, y).

    ``max_features``, when smaller than the feature count, draws a fresh
    candidate subset at every node from ``rng``.  Leaf values are means
    of their training targets.
    """
    p = x.shape[1]
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def new_node(rows: np.ndarray) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[rows].mean()))
        return node

    root_rows = np.arange(x.shape[0])
    stack: list[tuple[int, np.ndarray, int]] = [(new_node(root_rows), root_rows, 0)]
    while stack:
        node, rows, depth = stack.pop()
        if depth >= max_depth or rows.size < 2 * min_samples_leaf or rows.size < 2:
            continue
        ys = y[rows]
        if ys.max() == ys.min():
            continue
        if max_features is not None and max_features < p:
            candidates = np.sort(rng.choice(p, size=max_features, replace=False))
        else:
            candidates = np.arange(p)
        split = _best_split(x, y, rows, candidates, min_samples_leaf)
        if split is None:
            continue
        f, thr, _sse = split
        mask = x[rows, f] <= thr
        left_rows, right_rows = rows[mask], rows[~mask]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(left_rows)
        right[node] = new_node(right_rows)
        stack.append((left[node], left_rows, depth + 1))
        stack.append((right[node], right_rows, depth + 1))

    return TreeNodes(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=float),
    )


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 200
    max_depth: int = 30
    min_samples_leaf: int = 5

    def max_features(self, p: int) -> int:
        return max(1, math.ceil(p / 3))


@dataclass(frozen=True)
class GbmParams:
    n_estimators: int = 300
    max_depth: int = 10
    learning_rate: float = 0.1
    min_samples_leaf: int = 1
    subsample: float = 1.0


@dataclass
class TreeEnsemble:
    kind: str  # random_forest | gradient_boosting
    trees: list[TreeNodes]
    feature_names: list[str]
    seed: int
    params: dict = field(default_factory=dict)
    learning_rate: float = 1.0
    init_prediction: float = 0.0

    def predict(self, x: np.ndarray) -> np.ndarray:
        data = np.asarray(x, dtype=float)
        if self.kind == "random_forest":
            total = np.zeros(data.shape[0])
            for tree in self.trees:
                total += predict_tree(tree, data)
            return total / len(self.trees)
        out = np.full(data.shape[0], self.init_prediction)
        for tree in self.trees:
            out += self.learning_rate * predict_tree(tree, data)
        return out


def _tree_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def fit_forest(train: Dataset, params: ForestParams | None = None, seed: int = 0) -> TreeEnsemble:
    """Bagged trees: per-tree bootstrap plus per-node feature subsets.

    Each tree draws n rows with replacement and considers ceil(p/3)
    candidate features per split.  The prediction is the plain mean over
    trees, so it always stays inside the training target range.
    """
    hp = params or ForestParams()
    n, p = train.x.shape
    mtry = hp.max_features(p)
    trees = []
    for t in range(hp.n_estimators):
        rng = _tree_rng(seed, t)
        boot = rng.integers(0, n, size=n)
        trees.append(
            build_tree(
                train.x[boot],
                train.y[boot],
                rng,
                max_depth=hp.max_depth,
                min_samples_leaf=hp.min_samples_leaf,
                max_features=mtry,
            )
        )
    return TreeEnsemble(
        kind="random_forest",
        trees=trees,
        feature_names=list(train.feature_names),
        seed=seed,
        params={
            "n_estimators": hp.n_estimators,
            "max_depth": hp.max_depth,
            "min_samples_leaf": hp.min_samples_leaf,
        },
    )


def fit_gbm(train: Dataset, params: GbmParams | None = None, seed: int = 0) -> TreeEnsemble:
    """Gradient boosting with squared-error loss.

    Starts from the target mean; each tree fits the current residuals
    (on an optional per-iteration row subsample) and joins the ensemble
    scaled by the learning rate.
    """
    hp = params or GbmParams()
    if not 0.0 < hp.learning_rate <= 1.0:
        raise ValueError("learning_rate must be in (0, 1]")
    if not 0.0 < hp.subsample <= 1.0:
        raise ValueError("subsample must be in (0, 1]")
    n = train.n
    current = np.full(n, float(train.y.mean()))
    init = float(train.y.mean())
    trees = []
    for t in range(hp.n_estimators):
        rng = _tree_rng(seed, t)
        residual = train.y - current
        if hp.subsample < 1.0:
            take = max(2, int(round(hp.subsample * n)))
            rows = rng.choice(n, size=take, replace=False)
        else:
            rows = np.arange(n)
        tree = build_tree(
            train.x[rows],
            residual[rows],
            rng,
            max_depth=hp.max_depth,
            min_samples_leaf=hp.min_samples_leaf,
            max_features=None,
        )
        trees.append(tree)
        current += hp.learning_rate * predict_tree(tree, train.x)
    return TreeEnsemble(
        kind="gradient_boosting",
        trees=trees,
        feature_names=list(train.feature_names),
        seed=seed,
        params={
            "n_estimators": hp.n_estimators,
            "max_depth": hp.max_depth,
            "learning_rate": hp.learning_rate,
            "min_samples_leaf": hp.min_samples_leaf,
            "subsample": hp.subsample,
        },
        learning_rate=hp.learning_rate,
        init_prediction=init,
    )
