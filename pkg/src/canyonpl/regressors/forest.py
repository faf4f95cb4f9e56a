"""Random-forest regression: bootstrap-aggregated variance-reduction trees."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_TREES = 20
MAX_DEPTH = 25


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat array form; ``feature == -1`` marks a leaf. Go left when x[feature] <= threshold."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self.feature), dtype=int)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                break
            r, nd, f = rows[internal], node[internal], feat[internal]
            go_left = X[r, f] <= self.threshold[nd]
            node[internal] = np.where(go_left, self.left[nd], self.right[nd])
        return self.value[node]


def _best_split(Xn: np.ndarray, yn: np.ndarray):
    """Lowest total SSE split over all features and midpoints; None if no valid split."""
    m, p = Xn.shape
    yn = yn - yn.mean()  # centering keeps the cumulative-sum SSE well conditioned
    best = None
    for f in range(p):
        order = np.argsort(Xn[:, f], kind="stable")
        xs = Xn[order, f]
        ys = yn[order]
        valid = xs[1:] != xs[:-1]
        if not valid.any():
            continue
        cs = np.cumsum(ys)[:-1]
        cs2 = np.cumsum(ys * ys)[:-1]
        nl = np.arange(1, m, dtype=np.float64)
        nr = m - nl
        tot, tot2 = cs[-1] + ys[-1], cs2[-1] + ys[-1] ** 2
        sse = (cs2 - cs * cs / nl) + ((tot2 - cs2) - (tot - cs) ** 2 / nr)
        sse = np.where(valid, sse, np.inf)
        i = int(np.argmin(sse))
        if best is None or sse[i] < best[0]:
            thr = 0.5 * (xs[i] + xs[i + 1])
            if not thr < xs[i + 1]:
                thr = xs[i]
            best = (float(sse[i]), f, float(thr))
    return best


def fit_tree(X, y, max_depth: int = MAX_DEPTH) -> Tree:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        count.append(len(idx))
        return len(feature) - 1

    root = new_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= max_depth or len(idx) < 2:
            continue
        yn = y[idx]
        if np.all(yn == yn[0]):
            continue
        split = _best_split(X[idx], yn)
        if split is None:
            continue
        _, f, thr = split
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        ln, rn = new_node(li), new_node(ri)
        feature[node], threshold[node], left[node], right[node] = f, thr, ln, rn
        stack.append((rn, ri, depth + 1))
        stack.append((ln, li, depth + 1))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64), np.array(value), np.array(count, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple
    tree_seeds: np.ndarray
    n_features: int

    family = "rf"

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        return np.mean([t.predict(X) for t in self.trees], axis=0)


def fit_random_forest(X, y, seed: int = 0, n_trees: int = N_TREES, max_depth: int = MAX_DEPTH,
                      bootstrap: bool = True) -> ForestModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if len(y) < 2 or len(X) != len(y):
        raise ValueError("need >= 2 rows matching y")
    n = len(y)
    seeds = np.random.default_rng(seed).integers(0, 2**32, size=n_trees, dtype=np.uint64)
    trees = []
    for s in seeds:
        idx = np.random.default_rng(int(s)).integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(fit_tree(X[idx], y[idx], max_depth))
    return ForestModel(tuple(trees), seeds, X.shape[1])
