"""Random forest of CART trees with Gini splits and impurity-based importances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._parallel import pmap
from . import TrainConfig, check_columns


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray  # split feature per node, -1 at leaves
    threshold: np.ndarray  # x <= threshold goes left
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # fraction of class 1 among the node's samples
    n_samples: np.ndarray
    gain: np.ndarray  # n*gini(node) - n_l*gini(left) - n_r*gini(right); 0 at leaves

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self.feature), dtype=int)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            go_left = X[rows, np.maximum(f, 0)] <= self.threshold[node]
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        ints = {"feature", "left", "right", "n_samples"}
        return cls(**{k: np.asarray(d[k], dtype=np.int64 if k in ints else np.float64) for k in cls.__dataclass_fields__})


@dataclass(frozen=True, eq=False)
class ForestModel:
    columns: tuple[str, ...]
    trees: tuple[Tree, ...]
    n_estimators: int
    min_samples_leaf: int
    max_depth: int
    features_per_split: int
    rng_seed: int

    def to_dict(self) -> dict:
        return {
            "kind": "forest",
            "columns": list(self.columns),
            "n_estimators": self.n_estimators,
            "min_samples_leaf": self.min_samples_leaf,
            "max_depth": self.max_depth,
            "features_per_split": self.features_per_split,
            "rng_seed": self.rng_seed,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        return cls(
            tuple(d["columns"]),
            tuple(Tree.from_dict(t) for t in d["trees"]),
            int(d["n_estimators"]),
            int(d["min_samples_leaf"]),
            int(d["max_depth"]),
            int(d["features_per_split"]),
            int(d["rng_seed"]),
        )


def _best_split(X: np.ndarray, y: np.ndarray, idx: np.ndarray, features: np.ndarray, min_leaf: int):
    """Best (gain, feature, threshold, left mask) over midpoints of sorted unique values."""
    m = len(idx)
    yn = y[idx]
    pos = float(yn.sum())
    parent = 2.0 * pos * (m - pos) / m
    k = np.arange(1, m, dtype=np.float64)
    size_ok = (k >= min_leaf) & (m - k >= min_leaf)
    best = None
    for f in features:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        valid = size_ok & (vs[:-1] < vs[1:])
        if not valid.any():
            continue
        l1 = np.cumsum(yn[order], dtype=np.float64)[:-1]
        r1 = pos - l1
        child = 2.0 * l1 * (k - l1) / k + 2.0 * r1 * ((m - k) - r1) / (m - k)
        gain = np.where(valid, parent - child, -np.inf)
        j = int(np.argmax(gain))
        if best is None or gain[j] > best[0]:
            thr = 0.5 * (vs[j] + vs[j + 1])
            if not vs[j] <= thr < vs[j + 1]:
                thr = vs[j]  # adjacent floats: the midpoint rounded up
            best = (float(gain[j]), int(f), float(thr))
    if best is None:
        return None
    gain, f, thr = best
    return max(gain, 0.0), f, thr, X[idx, f] <= thr


def build_tree(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    rng: np.random.Generator,
    max_depth: int,
    min_leaf: int,
    n_candidates: int,
) -> Tree:
    nodes: list[list] = []  # feature, threshold, left, right, value, n, gain
    stack = [(idx, 0, -1, False)]
    n_features = X.shape[1]
    while stack:
        node_idx, depth, parent, is_left = stack.pop()
        me = len(nodes)
        m = len(node_idx)
        pos = float(y[node_idx].sum())
        nodes.append([-1, 0.0, -1, -1, pos / m, m, 0.0])
        if parent >= 0:
            nodes[parent][2 if is_left else 3] = me
        if depth >= max_depth or m < 2 * min_leaf or pos == 0 or pos == m:
            continue
        features = rng.choice(n_features, size=n_candidates, replace=False)
        split = _best_split(X, y, node_idx, features, min_leaf)
        if split is None:
            continue
        gain, f, thr, go_left = split
        nodes[me][0], nodes[me][1], nodes[me][6] = f, thr, gain
        # push right first so the left subtree is numbered first
        stack.append((node_idx[~go_left], depth + 1, me, False))
        stack.append((node_idx[go_left], depth + 1, me, True))
    cols = list(zip(*nodes))
    return Tree(
        np.asarray(cols[0], dtype=np.int64),
        np.asarray(cols[1], dtype=np.float64),
        np.asarray(cols[2], dtype=np.int64),
        np.asarray(cols[3], dtype=np.int64),
        np.asarray(cols[4], dtype=np.float64),
        np.asarray(cols[5], dtype=np.int64),
        np.asarray(cols[6], dtype=np.float64),
    )


def train_forest(X: np.ndarray, y: np.ndarray, columns, cfg: TrainConfig = TrainConfig(), threads: int = 1) -> ForestModel:
    """Bootstrap-bagged CART trees; tree t draws from its own stream seeded by (rng_seed, t)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("cannot train a forest on an empty feature matrix")
    if X.shape[0] != len(y):
        raise ValueError(f"X has {X.shape[0]} rows but y has {len(y)} labels")
    n, n_features = X.shape
    k = cfg.features_per_split or max(1, int(np.floor(np.sqrt(n_features))))
    k = min(k, n_features)

    def grow(t: int) -> Tree:
        rng = np.random.default_rng([cfg.rng_seed, t])
        boot = rng.integers(0, n, size=n)
        return build_tree(X, y, boot, rng, cfg.max_depth, cfg.min_samples_leaf, k)

    trees = pmap(grow, range(cfg.n_estimators), threads)
    return ForestModel(
        tuple(columns), tuple(trees), cfg.n_estimators, cfg.min_samples_leaf, cfg.max_depth, k, cfg.rng_seed
    )


def predict_proba_forest(model: ForestModel, X: np.ndarray, columns) -> np.ndarray:
    idx = check_columns(model.columns, list(columns))
    X = np.asarray(X, dtype=np.float64)[:, idx]
    total = np.zeros(len(X))
    for tree in model.trees:
        total += tree.predict(X)
    return total / len(model.trees)


def feature_importance(model: ForestModel) -> dict[str, float]:
    """Sample-weighted Gini decrease per feature, summed over trees, normalised to 1."""
    totals = np.zeros(len(model.columns))
    for tree in model.trees:
        inner = tree.feature >= 0
        np.add.at(totals, tree.feature[inner], tree.gain[inner])
    s = totals.sum()
    if s > 0:
        totals = totals / s
    return dict(zip(model.columns, totals.tolist()))
