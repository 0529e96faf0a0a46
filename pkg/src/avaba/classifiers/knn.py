"""k-nearest neighbours with Euclidean distance."""
from __future__ import annotations

import numpy as np

_CHUNK = 512


class KNearestNeighbors:
    """Score is the fraction of the ``k`` nearest training samples labeled abnormal.

    Distance ties are broken by training-set order. Inputs are expected to be
    standardized already (the model wrapper does this).
    """

    kind = "knn"
    defaults = {"k": 5}

    def __init__(self, k=5):
        if k < 1:
            raise ValueError("k must be at least 1")
        self.k = int(k)
        self.X = np.zeros((0, 0))
        self.y = np.zeros(0, dtype=np.int8)

    def fit(self, X, y, seed: int = 0) -> "KNearestNeighbors":
        self.X = np.asarray(X, dtype=float).copy()
        self.y = np.asarray(y, dtype=np.int8).copy()
        if self.k > len(self.X):
            raise ValueError(f"k={self.k} exceeds the training-set size {len(self.X)}")
        return self

    def neighbors(self, X) -> np.ndarray:
        """Indices of the k nearest training rows for each query row, nearest first."""
        X = np.asarray(X, dtype=float)
        k = self.k
        out = np.empty((len(X), k), dtype=np.int64)
        train_sq = np.einsum("ij,ij->i", self.X, self.X)
        for start in range(0, len(X), _CHUNK):
            Q = X[start:start + _CHUNK]
            q_sq = np.einsum("ij,ij->i", Q, Q)
            d2 = q_sq[:, None] - 2.0 * Q @ self.X.T + train_sq[None, :]
            np.maximum(d2, 0.0, out=d2)
            kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
            # the expanded form is inexact; shortlist generously, then rank on exact distances
            slack = 1e-9 * (q_sq + train_sq.max() + 1.0)
            for row in range(len(Q)):
                cand = np.flatnonzero(d2[row] <= kth[row] + slack[row])
                exact = np.sum((self.X[cand] - Q[row]) ** 2, axis=1)
                order = np.lexsort((cand, exact))
                out[start + row] = cand[order[:k]]
        return out

    def predict_proba(self, X) -> np.ndarray:
        return self.y[self.neighbors(X)].mean(axis=1)

    def get_state(self) -> dict:
        return {"X": self.X.tolist(), "y": self.y.tolist()}

    def set_state(self, state: dict) -> None:
        self.X = np.asarray(state["X"], dtype=float).reshape(len(state["X"]), -1)
        self.y = np.asarray(state["y"], dtype=np.int8)
