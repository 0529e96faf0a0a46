"""Random forest of CART trees grown on Gini impurity.

Trees are stored as flat node arrays so they serialise to plain lists and
predict with a vectorised descent. Split ties go to the lowest feature index,
then the lowest threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray  # LEAF for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # fraction of abnormal training samples in the node

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row of ``X``."""
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while len(active):
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def vote(self, X: np.ndarray) -> np.ndarray:
        """Hard vote per row: 1 when the leaf holds a strict abnormal majority."""
        return (self.predict_value(X) > 0.5).astype(np.int8)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(v) for v in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": [float(v) for v in self.value],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=float),
        )


# Costs within TIE_TOL * node size count as equal, so exact ties that differ
# only by rounding go to the lowest feature index, then the lowest threshold.
TIE_TOL = 1e-10


def _split_cost(n_left, pos_left, n_right, pos_right):
    """Sample-weighted Gini impurity of a split, times the node size."""
    return 2.0 * (pos_left * (n_left - pos_left) / n_left + pos_right * (n_right - pos_right) / n_right)


def best_split_on_feature(x: np.ndarray, y: np.ndarray):
    """Lowest-cost threshold for one feature, or None if ``x`` is constant.

    Returns ``(cost, threshold)``; samples with ``x <= threshold`` go left.
    """
    order = np.argsort(x, kind="stable")
    xs = x[order]
    distinct = xs[1:] > xs[:-1]
    if not distinct.any():
        return None
    ys = y[order].astype(float)
    n = len(xs)
    pos_left = np.cumsum(ys)[:-1]
    n_left = np.arange(1, n, dtype=float)
    cost = _split_cost(n_left, pos_left, n - n_left, pos_left[-1] + ys[-1] - pos_left)
    cost = np.where(distinct, cost, np.inf)
    i = int(np.argmax(cost <= cost.min() + TIE_TOL * n))
    lo, hi = xs[i], xs[i + 1]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(cost[i]), float(thr)


def _n_features_per_split(max_features, d: int) -> int:
    if max_features is None or max_features == "all":
        return d
    if max_features == "sqrt":
        return max(1, math.ceil(math.sqrt(d)))
    if max_features == "log2":
        return max(1, math.ceil(math.log2(d)))
    if isinstance(max_features, float):
        return max(1, min(d, math.ceil(max_features * d)))
    return max(1, min(d, int(max_features)))


def _grow_numpy(X, y, keys, max_depth, min_samples_split, mtry):
    n, d = X.shape
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(y[idx].mean()))
        return len(feature) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        pos = y[idx].sum()
        if len(idx) < min_samples_split or pos == 0 or pos == len(idx) or (0 <= max_depth <= depth):
            continue
        perm = np.argsort(keys[node], kind="stable")
        best = None
        start = 0
        while start < d:
            for f in np.sort(perm[start:start + mtry]):
                res = best_split_on_feature(X[idx, f], y[idx])
                if res is not None and (best is None or res[0] < best[0] - TIE_TOL * len(idx)):
                    best = (res[0], int(f), res[1])
            start += mtry
            if best is not None:
                break
        if best is None:
            continue
        _, f, thr = best
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        lnode = new_node(li)
        rnode = new_node(ri)
        feature[node], threshold[node] = f, thr
        left[node], right[node] = lnode, rnode
        stack.append((rnode, ri, depth + 1))
        stack.append((lnode, li, depth + 1))
    return (
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=float),
    )


@numba.njit(cache=True)
def _grow_numba(X, y, presorted, keys, max_depth, min_samples_split, mtry):  # pragma: no cover - compiled
    # Every feature keeps its own sample order sorted by value; a node owns the
    # same [lo, hi) segment in all of them, and splits partition stably.
    n, d = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    sorted_idx = presorted.copy()
    sorted_x = np.empty((d, n))
    sorted_y = np.empty((d, n))
    for f in range(d):
        for i in range(n):
            sorted_x[f, i] = X[sorted_idx[f, i], f]
            sorted_y[f, i] = y[sorted_idx[f, i]]
    fbuf = np.empty(n)
    ybuf = np.empty(n)
    goes_left = np.zeros(n, dtype=np.bool_)
    buf = np.empty(n, dtype=np.int64)
    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)

    value[0] = y.sum() / n
    n_nodes = 1
    st_node[0], st_start[0], st_end[0], st_depth[0] = 0, 0, n, 0
    sp = 1
    while sp > 0:
        sp -= 1
        node, lo, hi, depth = st_node[sp], st_start[sp], st_end[sp], st_depth[sp]
        m = hi - lo
        pos = 0.0
        for i in range(lo, hi):
            pos += y[sorted_idx[0, i]]
        if m < min_samples_split or pos == 0 or pos == m or (0 <= max_depth <= depth):
            continue
        perm = np.argsort(keys[node], kind="mergesort")
        best_cost = np.inf
        best_f = -1
        best_thr = 0.0
        start = 0
        while start < d:
            chosen = np.sort(perm[start:min(d, start + mtry)])
            start += mtry
            for f in chosen:
                xs = sorted_x[f]
                ys = sorted_y[f]
                tol = TIE_TOL * m
                # pass 1: lowest cost; pass 2: first threshold within tolerance of it
                f_cost = np.inf
                pl = 0.0
                for i in range(lo, hi - 1):
                    pl += ys[i]
                    if xs[i + 1] > xs[i]:
                        nl = i - lo + 1.0
                        nr = m - nl
                        pr = pos - pl
                        cost = 2.0 * (pl * (nl - pl) / nl + pr * (nr - pr) / nr)
                        if cost < f_cost:
                            f_cost = cost
                if f_cost == np.inf:
                    continue
                f_thr = 0.0
                pl = 0.0
                for i in range(lo, hi - 1):
                    pl += ys[i]
                    a = xs[i]
                    b = xs[i + 1]
                    if b > a:
                        nl = i - lo + 1.0
                        nr = m - nl
                        pr = pos - pl
                        cost = 2.0 * (pl * (nl - pl) / nl + pr * (nr - pr) / nr)
                        if cost <= f_cost + tol:
                            f_cost = cost
                            thr = a + (b - a) / 2.0
                            if not (a <= thr and thr < b):
                                thr = a
                            f_thr = thr
                            break
                if best_f < 0 or f_cost < best_cost - tol:
                    best_cost = f_cost
                    best_f = f
                    best_thr = f_thr
            if best_f >= 0:
                break
        if best_f < 0:
            continue
        nl_count = 0
        s = 0.0
        for i in range(lo, hi):
            j = sorted_idx[0, i]
            goes_left[j] = X[j, best_f] <= best_thr
            if goes_left[j]:
                nl_count += 1
                s += y[j]
        for f in range(d):
            row = sorted_idx[f]
            xs = sorted_x[f]
            ys = sorted_y[f]
            k = 0
            for i in range(lo, hi):
                if goes_left[row[i]]:
                    buf[k], fbuf[k], ybuf[k] = row[i], xs[i], ys[i]
                    k += 1
            for i in range(lo, hi):
                if not goes_left[row[i]]:
                    buf[k], fbuf[k], ybuf[k] = row[i], xs[i], ys[i]
                    k += 1
            for i in range(m):
                row[lo + i] = buf[i]
                xs[lo + i] = fbuf[i]
                ys[lo + i] = ybuf[i]
        ln = n_nodes
        rn = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = ln
        right[node] = rn
        value[ln] = s / nl_count
        value[rn] = (pos - s) / (m - nl_count)
        st_node[sp], st_start[sp], st_end[sp], st_depth[sp] = rn, lo + nl_count, hi, depth + 1
        sp += 1
        st_node[sp], st_start[sp], st_end[sp], st_depth[sp] = ln, lo, lo + nl_count, depth + 1
        sp += 1
    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    max_depth: Optional[int] = None,
    min_samples_split: int = 2,
    max_features=None,
    engine: str = "numba",
) -> Tree:
    """Grow one CART tree.

    Each node draws its candidate features from a random ranking of all
    features: the first ``mtry`` are tried, and if none can split the node
    the next ``mtry`` are, and so on. Both engines consume ``rng``
    identically and grow the same tree up to floating-point cost ties.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int8)
    n, d = X.shape
    mtry = _n_features_per_split(max_features, d)
    keys = rng.random((2 * n + 1, d))
    depth_cap = -1 if max_depth is None else int(max_depth)
    if engine == "numba":
        presorted = np.argsort(np.ascontiguousarray(X.T), axis=1, kind="stable")
        arrays = _grow_numba(X, y.astype(float), presorted, keys, depth_cap, int(min_samples_split), mtry)
    elif engine == "numpy":
        arrays = _grow_numpy(X, y, keys, depth_cap, int(min_samples_split), mtry)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return Tree(*(np.array(a) for a in arrays))


class RandomForest:
    kind = "rf"
    defaults = {
        "n_trees": 100,
        "max_depth": None,
        "min_samples_split": 2,
        "max_features": "sqrt",
        "bootstrap": True,
    }

    def __init__(self, n_trees=100, max_depth=None, min_samples_split=2, max_features="sqrt", bootstrap=True):
        if n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if max_depth is not None and max_depth < 1:
            raise ValueError("max_depth must be positive or None")
        if min_samples_split < 2:
            raise ValueError("min_samples_split must be at least 2")
        self.n_trees = int(n_trees)
        self.max_depth = max_depth
        self.min_samples_split = int(min_samples_split)
        self.max_features = max_features
        self.bootstrap = bool(bootstrap)
        self.trees: list[Tree] = []

    def fit(self, X, y, seed: int = 0) -> "RandomForest":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int8)
        n = len(X)
        # one independent stream per tree: results do not depend on build order
        streams = np.random.SeedSequence(seed).spawn(self.n_trees)
        self.trees = []
        for ss in streams:
            rng = np.random.default_rng(ss)
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            self.trees.append(
                grow_tree(X[idx], y[idx], rng, self.max_depth, self.min_samples_split, self.max_features)
            )
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        votes = np.zeros(len(X))
        for tree in self.trees:
            votes += tree.vote(X)
        return votes / len(self.trees)

    def get_state(self) -> dict:
        return {"trees": [t.to_dict() for t in self.trees]}

    def set_state(self, state: dict) -> None:
        self.trees = [Tree.from_dict(t) for t in state["trees"]]
