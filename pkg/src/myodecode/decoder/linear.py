"""Ridge-regression baseline for the proportional (regression) decoder slot."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyTrain


@dataclass(eq=False)
class LinearRegressor:
    """Linear map from 32 features to the 9D hand state, clamped to [0, 1]."""

    weights: np.ndarray  # [F + 1, 9], last row is the intercept

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        xb = np.hstack([x, np.ones((x.shape[0], 1))])
        out = np.clip(xb @ self.weights, 0.0, 1.0)
        return out[0] if out.shape[0] == 1 else out


def train_linear_regressor(X: np.ndarray, targets: np.ndarray,
                           ridge: float = 1.0) -> LinearRegressor:
    """Closed-form ridge fit of normalized features against guide states."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if X.shape[0] == 0:
        raise EmptyTrain("no training samples")
    xb = np.hstack([X, np.ones((X.shape[0], 1))])
    A = xb.T @ xb + ridge * np.eye(xb.shape[1])
    A[-1, -1] -= ridge  # leave the intercept unpenalized
    W = np.linalg.solve(A, xb.T @ targets)
    return LinearRegressor(weights=W)
