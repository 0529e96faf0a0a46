"""Logistic regression and Gaussian naive Bayes."""
from __future__ import annotations

import numpy as np
from scipy.special import expit, logsumexp


class LogisticRegression:
    """Batch gradient descent on mean log-loss with an L2 penalty on the weights."""

    kind = "lr"
    defaults = {"learning_rate": 0.1, "epochs": 500, "l2": 1e-4}

    def __init__(self, learning_rate=0.1, epochs=500, l2=1e-4):
        if learning_rate <= 0 or epochs < 0 or l2 < 0:
            raise ValueError("invalid logistic regression hyperparameters")
        self.learning_rate = float(learning_rate)
        self.epochs = int(epochs)
        self.l2 = float(l2)
        self.weights = np.zeros(0)
        self.bias = 0.0

    def fit(self, X, y, seed: int = 0) -> "LogisticRegression":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n, d = X.shape
        w = np.zeros(d)
        b = 0.0
        for _ in range(self.epochs):
            err = expit(X @ w + b) - y
            w -= self.learning_rate * (X.T @ err / n + self.l2 * w)
            b -= self.learning_rate * err.mean()
        self.weights, self.bias = w, float(b)
        return self

    def predict_proba(self, X) -> np.ndarray:
        return expit(np.asarray(X, dtype=float) @ self.weights + self.bias)

    def get_state(self) -> dict:
        return {"weights": [float(v) for v in self.weights], "bias": self.bias}

    def set_state(self, state: dict) -> None:
        self.weights = np.asarray(state["weights"], dtype=float)
        self.bias = float(state["bias"])


class GaussianNB:
    """Per-class independent Gaussians; variances are floored at
    ``var_smoothing * max feature variance``."""

    kind = "gnb"
    defaults = {"var_smoothing": 1e-9}

    def __init__(self, var_smoothing=1e-9):
        if var_smoothing < 0:
            raise ValueError("var_smoothing must be non-negative")
        self.var_smoothing = float(var_smoothing)
        self.means = np.zeros((2, 0))
        self.variances = np.zeros((2, 0))
        self.log_priors = np.zeros(2)

    def fit(self, X, y, seed: int = 0) -> "GaussianNB":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        floor = self.var_smoothing * float(np.max(X.var(axis=0))) if X.size else 0.0
        if floor == 0.0:
            floor = self.var_smoothing or np.finfo(float).tiny
        means, variances, priors = [], [], []
        for cls in (0, 1):
            Xc = X[y == cls]
            means.append(Xc.mean(axis=0))
            variances.append(Xc.var(axis=0) + floor)
            priors.append(len(Xc) / len(X))
        self.means = np.array(means)
        self.variances = np.array(variances)
        self.log_priors = np.log(np.array(priors))
        return self

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.empty((len(X), 2))
        for cls in (0, 1):
            var = self.variances[cls]
            ll = -0.5 * np.sum(np.log(2 * np.pi * var)) - 0.5 * np.sum((X - self.means[cls]) ** 2 / var, axis=1)
            out[:, cls] = ll + self.log_priors[cls]
        return out

    def predict_proba(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        return np.exp(jll[:, 1] - logsumexp(jll, axis=1))

    def get_state(self) -> dict:
        return {
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "log_priors": self.log_priors.tolist(),
        }

    def set_state(self, state: dict) -> None:
        self.means = np.asarray(state["means"], dtype=float)
        self.variances = np.asarray(state["variances"], dtype=float)
        self.log_priors = np.asarray(state["log_priors"], dtype=float)
