"""Validation accuracy report: naive vs conformal, per movement and aggregated."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class MovementResult:
    movement: str
    naive_accuracy: float
    conformal_accuracy: float
    n_predictions: int


@dataclass
class ValidationReport:
    """Per-movement accuracies with mean +/- std aggregated across movements."""

    per_movement: list[MovementResult] = field(default_factory=list)
    conformal_enabled: bool = True
    durations_s: dict = field(default_factory=dict)

    @property
    def naive_mean(self) -> float:
        return float(np.mean([m.naive_accuracy for m in self.per_movement]))

    @property
    def naive_std(self) -> float:
        return float(np.std([m.naive_accuracy for m in self.per_movement]))

    @property
    def conformal_mean(self) -> float:
        return float(np.mean([m.conformal_accuracy for m in self.per_movement]))

    @property
    def conformal_std(self) -> float:
        return float(np.std([m.conformal_accuracy for m in self.per_movement]))

    def to_dict(self) -> dict:
        return {
            "per_movement": [
                {
                    "movement": m.movement,
                    "naive_accuracy": m.naive_accuracy,
                    "conformal_accuracy": m.conformal_accuracy,
                    "n_predictions": m.n_predictions,
                }
                for m in self.per_movement
            ],
            "naive_mean": self.naive_mean,
            "naive_std": self.naive_std,
            "conformal_mean": self.conformal_mean,
            "conformal_std": self.conformal_std,
            "conformal_enabled": self.conformal_enabled,
            "durations_s": self.durations_s,
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, d: dict) -> "ValidationReport":
        return cls(
            per_movement=[
                MovementResult(
                    movement=m["movement"],
                    naive_accuracy=m["naive_accuracy"],
                    conformal_accuracy=m["conformal_accuracy"],
                    n_predictions=m["n_predictions"],
                )
                for m in d["per_movement"]
            ],
            conformal_enabled=d.get("conformal_enabled", True),
            durations_s=d.get("durations_s", {}),
        )
