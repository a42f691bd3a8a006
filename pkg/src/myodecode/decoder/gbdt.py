"""Gradient-boosted decision trees with histogram split search.

Multiclass log-loss boosting: per round, one depth-limited regression
tree per class is fitted to the softmax residuals (gradient p - y,
hessian p(1-p)) with Newton leaf values.  Features are quantile-binned
once up front; split search runs over the bin histograms on the selected
kernel backend.  Training is fully deterministic for fixed data and
parameters.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..errors import DegenerateClass, ShapeMismatch

DEFAULT_ROUNDS = 1000


@dataclass(frozen=True)
class GbdtParams:
    n_rounds: int = DEFAULT_ROUNDS
    learning_rate: float = 0.1
    max_depth: int = 6
    n_bins: int = 64
    reg_lambda: float = 1.0
    min_child_hessian: float = 1e-3
    min_gain: float = 0.0

    def to_dict(self) -> dict:
        return {
            "n_rounds": self.n_rounds, "learning_rate": self.learning_rate,
            "max_depth": self.max_depth, "n_bins": self.n_bins,
            "reg_lambda": self.reg_lambda, "min_child_hessian": self.min_child_hessian,
            "min_gain": self.min_gain,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtParams":
        return cls(**d)


@dataclass(frozen=True, eq=False)
class SoftmaxOutput:
    probs: np.ndarray
    argmax: int


@dataclass(eq=False)
class GbdtModel:
    """Flat-array tree ensemble; tree t scores class t % n_classes."""

    n_classes: int
    n_features: int
    params: GbdtParams
    base_score: np.ndarray   # [K] log prior margins
    feature: np.ndarray      # [nodes] int32, -1 at leaves
    threshold: np.ndarray    # [nodes] float64, raw feature units (normalized space)
    left: np.ndarray         # [nodes] int32
    right: np.ndarray        # [nodes] int32
    value: np.ndarray        # [nodes] float64, leaf contribution (learning rate applied)
    roots: np.ndarray        # [n_rounds * K] int32
    loss_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    train_seconds: float = 0.0

    @property
    def n_trees(self) -> int:
        return int(self.roots.shape[0])

    def margins(self, X: np.ndarray, backend=None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ShapeMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        impl = backend or _kernels
        out = impl.predict_margins(self.feature, self.threshold, self.left, self.right,
                                   self.value, self.roots, X, self.n_classes)
        return out + self.base_score

    def predict_proba(self, X: np.ndarray, backend=None) -> np.ndarray:
        return _softmax(self.margins(X, backend=backend))


def _softmax(m: np.ndarray) -> np.ndarray:
    z = np.exp(m - m.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def quantile_bin_edges(X: np.ndarray, n_bins: int) -> np.ndarray:
    """Per-feature cut points at n_bins-1 training quantiles."""
    qs = np.arange(1, n_bins) / n_bins
    return np.quantile(X, qs, axis=0).T.copy()  # [F, n_bins-1]


def bin_features(X: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Map raw values to bin ids: bin b holds x <= edges[b] (last bin open)."""
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(X.shape, dtype=np.uint8)
    for f in range(X.shape[1]):
        out[:, f] = np.searchsorted(edges[f], X[:, f], side="left")
    return out


def train_gbdt(X: np.ndarray, y: np.ndarray, n_classes: int,
               params: GbdtParams = GbdtParams(), backend=None) -> GbdtModel:
    """Fit the boosted ensemble on normalized features.

    Raises ``DegenerateClass`` when any class id in [0, n_classes) has no
    training sample.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    N = X.shape[0]
    counts = np.bincount(y, minlength=n_classes)
    if n_classes < 2:
        raise DegenerateClass("need at least two classes")
    if np.any(counts == 0):
        missing = [int(c) for c in np.nonzero(counts == 0)[0]]
        raise DegenerateClass(f"classes {missing} absent from the training split")

    impl = backend or _kernels
    t0 = time.perf_counter()
    edges = quantile_bin_edges(X, params.n_bins)
    bins = bin_features(X, edges)
    grower = impl.Grower(bins, params.max_depth, params.n_bins, params.reg_lambda,
                         params.min_child_hessian, params.min_gain)

    base = np.log(counts / N)
    margins = np.tile(base, (N, 1))
    onehot = np.zeros((N, n_classes))
    onehot[np.arange(N), y] = 1.0

    feat_parts, thr_parts, left_parts, right_parts, val_parts = [], [], [], [], []
    roots = np.zeros(params.n_rounds * n_classes, dtype=np.int32)
    loss_history = np.zeros(params.n_rounds)
    offset = 0
    lr = params.learning_rate
    for r in range(params.n_rounds):
        P = _softmax(margins)
        loss_history[r] = -float(np.mean(np.log(np.maximum(P[np.arange(N), y], 1e-300))))
        G = P - onehot
        H = P * (1.0 - P)
        for c in range(n_classes):
            n_nodes = grower.grow(np.ascontiguousarray(G[:, c]),
                                  np.ascontiguousarray(H[:, c]))
            t = r * n_classes + c
            roots[t] = offset
            feat = grower.feature
            feat_parts.append(feat)
            thr = np.zeros(n_nodes)
            split = feat >= 0
            thr[split] = edges[feat[split], grower.thr_bin[split]]
            thr_parts.append(thr)
            child_l = grower.left.copy()
            child_r = grower.right.copy()
            child_l[child_l >= 0] += offset
            child_r[child_r >= 0] += offset
            left_parts.append(child_l)
            right_parts.append(child_r)
            val_parts.append(lr * grower.value)
            margins[:, c] += lr * grower.value[grower.leaf_assign]
            offset += n_nodes

    model = GbdtModel(
        n_classes=n_classes,
        n_features=X.shape[1],
        params=params,
        base_score=base,
        feature=np.concatenate(feat_parts),
        threshold=np.concatenate(thr_parts),
        left=np.concatenate(left_parts),
        right=np.concatenate(right_parts),
        value=np.concatenate(val_parts),
        roots=roots,
        loss_history=loss_history,
        train_seconds=time.perf_counter() - t0,
    )
    return model


def predict(model: GbdtModel, norm, features: np.ndarray) -> SoftmaxOutput:
    """Normalize one feature vector and return its softmax scores."""
    from .dataset import apply_normalizer

    x = apply_normalizer(norm, features).reshape(1, -1)
    probs = model.predict_proba(x)[0]
    return SoftmaxOutput(probs=probs, argmax=int(np.argmax(probs)))
