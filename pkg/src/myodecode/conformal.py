"""Conformal prediction sets over softmax outputs, with a temporal majority solver.

Regularized adaptive prediction sets: the nonconformity score of a class
is the cumulative sorted softmax mass down to and including it, plus a
penalty that grows linearly with its rank past ``k_reg``.  Calibration
picks the ceil((n+1)(1-alpha))/n empirical quantile of true-class scores;
at prediction time classes are added in descending probability while the
running score stays within that quantile.  A set of size one is treated
as certain; larger sets are resolved by majority vote over the trailing
window of sets.  Set construction is deterministic (the randomized
tie-breaking variant of the published method is intentionally off so
real-time behavior is reproducible).
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCalibration, NotCalibrated, UnknownClass

DEFAULT_ALPHA = 0.1
DEFAULT_LAMBDA = 0.01
DEFAULT_K_REG = 1
DEFAULT_WINDOW = 75


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """Conformal output: candidate labels in descending probability order."""

    labels: tuple[int, ...]
    probs: np.ndarray

    def __post_init__(self):
        if not self.labels:
            raise ValueError("prediction sets are never empty")

    @property
    def certain(self) -> bool:
        return len(self.labels) == 1

    @property
    def top(self) -> int:
        return self.labels[0]


@dataclass
class RapsCalibration:
    """Calibrated set-construction parameters."""

    alpha: float = DEFAULT_ALPHA
    lam: float = DEFAULT_LAMBDA
    k_reg: int = DEFAULT_K_REG
    q_hat: float | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "lam": self.lam, "k_reg": self.k_reg,
                "q_hat": self.q_hat}

    @classmethod
    def from_dict(cls, d: dict) -> "RapsCalibration":
        return cls(alpha=d["alpha"], lam=d["lam"], k_reg=d["k_reg"], q_hat=d["q_hat"])


def raps_score(probs: np.ndarray, true_class: int, *, lam: float = DEFAULT_LAMBDA,
               k_reg: int = DEFAULT_K_REG) -> float:
    """Nonconformity score of ``true_class`` under the given softmax output."""
    probs = np.asarray(probs, dtype=np.float64)
    if not 0 <= true_class < probs.shape[0]:
        raise UnknownClass(true_class)
    order = np.argsort(-probs, kind="stable")
    rank = int(np.nonzero(order == true_class)[0][0]) + 1  # 1-based
    mass = float(probs[order[:rank]].sum())
    return mass + lam * max(0, rank - k_reg)


def calibrate(scores, alpha: float = DEFAULT_ALPHA) -> float:
    """Empirical ceil((n+1)(1-alpha))-th smallest score (clipped to the max)."""
    scores = np.sort(np.asarray(scores, dtype=np.float64))
    n = scores.shape[0]
    if n == 0:
        raise EmptyCalibration("no calibration scores")
    k = math.ceil((n + 1) * (1 - alpha))
    k = min(k, n)
    return float(scores[k - 1])


def fit_calibration(probs: np.ndarray, labels: np.ndarray, *,
                    alpha: float = DEFAULT_ALPHA, lam: float = DEFAULT_LAMBDA,
                    k_reg: int = DEFAULT_K_REG) -> RapsCalibration:
    """Score a calibration block and return ready-to-use parameters."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    labels = np.asarray(labels)
    if probs.shape[0] == 0:
        raise EmptyCalibration("no calibration samples")
    scores = [raps_score(p, int(y), lam=lam, k_reg=k_reg) for p, y in zip(probs, labels)]
    return RapsCalibration(alpha=alpha, lam=lam, k_reg=k_reg,
                           q_hat=calibrate(scores, alpha))


def predict_set(probs: np.ndarray, cal: RapsCalibration) -> PredictionSet:
    """Classes in descending probability whose running score stays within q_hat.

    The top-1 class is always included, so sets are never empty.
    """
    if cal.q_hat is None:
        raise NotCalibrated("calibrate before predicting sets")
    probs = np.asarray(probs, dtype=np.float64)
    order = np.argsort(-probs, kind="stable")
    labels = [int(order[0])]
    mass = float(probs[order[0]])
    for rank in range(2, order.shape[0] + 1):
        mass += float(probs[order[rank - 1]])
        score = mass + cal.lam * max(0, rank - cal.k_reg)
        if score > cal.q_hat:
            break
        labels.append(int(order[rank - 1]))
    return PredictionSet(labels=tuple(labels), probs=probs)


@dataclass
class SolverWindow:
    """Majority vote over the trailing prediction sets.

    A certain (singleton) set short-circuits to its label; otherwise the
    most frequent label across the window wins, ties broken by higher
    probability in the newest set, then by lower class id.
    """

    capacity: int = DEFAULT_WINDOW
    history: deque = field(default_factory=deque)

    def push(self, pset: PredictionSet) -> None:
        self.history.append(pset)
        while len(self.history) > self.capacity:
            self.history.popleft()

    def solve(self, new_set: PredictionSet) -> int:
        self.push(new_set)
        if new_set.certain:
            return new_set.top
        counts = Counter()
        for pset in self.history:
            counts.update(pset.labels)
        best = max(
            counts.items(),
            key=lambda kv: (kv[1], float(new_set.probs[kv[0]]), -kv[0]),
        )
        return best[0]

    def reset(self) -> None:
        self.history.clear()
