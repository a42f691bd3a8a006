"""Hand-state model, movement templates, guide trajectories, and labeling.

A hand state is a 9-vector in [0,1]: thumb flexion, thumb abduction,
index/middle/ring/pinky flexion, wrist flexion, wrist adduction, wrist
pronation.  Rest is all zeros.  The guide generator ramps a template's
target up and down in a smooth cycle; anything at or above half
activation counts as the movement, anything below as rest because
involuntary residual activity makes a tight rest threshold unusable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UnknownClass

STATE_DIM = 9
STATE_NAMES = (
    "thumb_flex", "thumb_abd",
    "index_flex", "middle_flex", "ring_flex", "pinky_flex",
    "wrist_flex", "wrist_add", "wrist_pron",
)
REST = "rest"
ACTIVATION_THRESHOLD = 0.5


def rest_state() -> np.ndarray:
    return np.zeros(STATE_DIM)


def validate_state(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (STATE_DIM,):
        raise ValueError(f"hand state must have {STATE_DIM} components, got {v.shape}")
    if np.any(v < 0) or np.any(v > 1):
        raise ValueError("hand state components must lie in [0, 1]")
    return v


@dataclass(frozen=True, eq=False)
class MovementTemplate:
    id: str
    target: np.ndarray  # full-activation hand state
    display_id: str | None = None  # template used for rendering, if remapped

    def __post_init__(self):
        object.__setattr__(self, "target", validate_state(self.target))

    @property
    def display(self) -> str:
        return self.display_id or self.id

    def activation_of(self, state: np.ndarray) -> float:
        """Scalar activation of a guide state under this template.

        Max over the template's nonzero components; all components move
        in lockstep under scalar scaling, and max stays robust should a
        template ever carry unequal targets.
        """
        nz = self.target > 0
        if not nz.any():
            return 0.0
        return float(np.max(np.asarray(state)[nz] / self.target[nz]))


def _t(**components: float) -> np.ndarray:
    v = np.zeros(STATE_DIM)
    for name, val in components.items():
        v[STATE_NAMES.index(name)] = val
    return v


def default_catalog() -> dict[str, MovementTemplate]:
    """The nine stock movements: rest, digit flexions, grasp, two pinches."""
    spec = {
        REST: _t(),
        "thumb": _t(thumb_flex=1),
        "index": _t(index_flex=1),
        "middle": _t(middle_flex=1),
        "ring": _t(ring_flex=1),
        "pinky": _t(pinky_flex=1),
        "grasp": _t(thumb_flex=1, index_flex=1, middle_flex=1, ring_flex=1, pinky_flex=1),
        "pinch2": _t(thumb_flex=1, index_flex=1),
        "pinch3": _t(thumb_flex=1, index_flex=1, middle_flex=1),
    }
    return {mid: MovementTemplate(id=mid, target=v) for mid, v in spec.items()}


def load_catalog(path: str | Path) -> dict[str, MovementTemplate]:
    """Load experimenter-defined templates from JSON (id, 9 targets, display_id)."""
    entries = json.loads(Path(path).read_text())
    catalog: dict[str, MovementTemplate] = {}
    for e in entries:
        catalog[e["id"]] = MovementTemplate(
            id=e["id"],
            target=np.asarray(e["target"], dtype=np.float64),
            display_id=e.get("display_id"),
        )
    if REST not in catalog:
        catalog[REST] = MovementTemplate(id=REST, target=rest_state())
    return catalog


def save_catalog(catalog: dict[str, MovementTemplate], path: str | Path) -> None:
    entries = [
        {"id": t.id, "target": [float(x) for x in t.target], "display_id": t.display_id}
        for t in catalog.values()
    ]
    Path(path).write_text(json.dumps(entries, indent=2))


def catalog_hash(catalog: dict[str, MovementTemplate]) -> str:
    payload = json.dumps(
        [[t.id, [float(x) for x in t.target], t.display] for t in
         sorted(catalog.values(), key=lambda t: t.id)],
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def remap_display(catalog: dict[str, MovementTemplate], executed: str, display: str) -> None:
    """Show movement `executed` as `display` without touching its EMG identity."""
    if executed not in catalog:
        raise UnknownClass(executed)
    if display not in catalog:
        raise UnknownClass(display)
    t = catalog[executed]
    catalog[executed] = MovementTemplate(id=t.id, target=t.target, display_id=display)


@dataclass(frozen=True)
class GuideTiming:
    """Plateau and ramp durations of one guide cycle.

    Defaults give a 7.5 s cycle: 1.5 s rest hold, 2.25 s rise, 1.5 s
    full hold, 2.25 s fall.
    """

    hold_s: float = 1.5
    ramp_s: float = 2.25

    def __post_init__(self):
        if self.hold_s < 0 or self.ramp_s <= 0:
            raise ValueError("hold_s must be >= 0 and ramp_s > 0")

    @property
    def period_s(self) -> float:
        return 2 * self.hold_s + 2 * self.ramp_s

    def to_dict(self) -> dict:
        return {"hold_s": self.hold_s, "ramp_s": self.ramp_s}


def guide_activation(timing: GuideTiming, t: float) -> float:
    """Activation at time t: rest hold, cosine rise, full hold, cosine fall."""
    if t < 0:
        raise ValueError("t must be >= 0")
    t = math.fmod(t, timing.period_s)
    hold, ramp = timing.hold_s, timing.ramp_s
    if t < hold:
        return 0.0
    t -= hold
    if t < ramp:
        return 0.5 * (1.0 - math.cos(math.pi * t / ramp))
    t -= ramp
    if t < hold:
        return 1.0
    t -= hold
    return 0.5 * (1.0 + math.cos(math.pi * t / ramp))


def guide_trajectory(
    template: MovementTemplate, timing: GuideTiming, t: float
) -> tuple[np.ndarray, float]:
    """Guide hand state and scalar activation at time t seconds."""
    a = guide_activation(timing, t)
    return a * template.target, a


def label(guide: np.ndarray, active_template: MovementTemplate) -> str:
    """Movement id when the guide is at or past half activation, else rest."""
    if active_template.id == REST:
        return REST
    a = active_template.activation_of(guide)
    return active_template.id if a >= ACTIVATION_THRESHOLD else REST


def class_to_state(class_id: str, catalog: dict[str, MovementTemplate]) -> np.ndarray:
    """Full-activation display target for a classified movement."""
    if class_id not in catalog:
        raise UnknownClass(class_id)
    display = catalog[class_id].display
    if display not in catalog:
        raise UnknownClass(display)
    return catalog[display].target.copy()
