"""Feature dataset assembly from recorded sessions, split and normalization.

Each recorded movement stream is swept with the 20-frame window at a hop
of one frame; each window yields 32 RMS features labeled by the mean
guide state inside the window (half activation or more = the movement,
less = rest).  Per stream, the first 80% of windows feed training, the
last 20% are held out; the trailing 12.5% of the training block is carved
out for conformal calibration (70/10/20 effective).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .. import dsp
from ..errors import EmptyTrain, MissingGuide, TooShort
from ..kinematics import ACTIVATION_THRESHOLD, REST, MovementTemplate
from ..proto import SAMPLES_PER_FRAME

if TYPE_CHECKING:
    from ..session.recording import SessionRecording

WINDOW_FRAMES = 20
TRAIN_FRAC = 0.8
CAL_FRAC_OF_TRAIN = 0.125


@dataclass
class Dataset:
    """Assembled windows with a disjoint train/calibration/test partition.

    Per segment, train+calibration cover the first 80% of windows in
    temporal order and test the last 20%; calibration is the tail of the
    80% block so the model never trains on it.
    """

    X: np.ndarray            # [N, 32] features
    y: np.ndarray            # [N] class ids
    guide: np.ndarray        # [N, 9] mean guide state per window
    t_us: np.ndarray         # [N] newest-frame timestamp per window
    segment_of: np.ndarray   # [N] index into segment order
    class_names: list[str]   # id -> movement, rest always 0
    train_idx: np.ndarray
    cal_idx: np.ndarray
    test_idx: np.ndarray

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


def _window_features(frames: list, signal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n_windows = len(frames) - (WINDOW_FRAMES - 1)
    X = np.empty((n_windows, signal.shape[0]))
    t_us = np.empty(n_windows, dtype=np.int64)
    for i in range(n_windows):
        sl = signal[:, i * SAMPLES_PER_FRAME : (i + WINDOW_FRAMES) * SAMPLES_PER_FRAME]
        X[i] = dsp.extract_features(sl).rms
        t_us[i] = frames[i + WINDOW_FRAMES - 1].t_us
    return X, t_us


def _window_guides(t_us: np.ndarray, guide_t: np.ndarray, guide_v: np.ndarray,
                   window_span_us: int) -> np.ndarray:
    """Mean guide state over each window's time span (nearest entry if none)."""
    out = np.empty((t_us.shape[0], guide_v.shape[1]))
    starts = t_us - window_span_us
    lo = np.searchsorted(guide_t, starts, side="left")
    hi = np.searchsorted(guide_t, t_us, side="right")
    for i in range(t_us.shape[0]):
        if hi[i] > lo[i]:
            out[i] = guide_v[lo[i]:hi[i]].mean(axis=0)
        else:
            nearest = np.argmin(np.abs(guide_t - t_us[i]))
            out[i] = guide_v[nearest]
    return out


def assemble(recording: "SessionRecording", catalog: dict[str, MovementTemplate],
             *, train_frac: float = TRAIN_FRAC,
             cal_frac: float = CAL_FRAC_OF_TRAIN) -> Dataset:
    """Build the labeled feature dataset from all recorded segments."""
    movements = [s.movement for s in recording.segments]
    class_names = [REST] + [m for m in movements if m != REST]
    class_id = {m: i for i, m in enumerate(class_names)}

    X_parts, y_parts, g_parts, t_parts, seg_parts = [], [], [], [], []
    train_parts, cal_parts, test_parts = [], [], []
    offset = 0
    for seg_i, seg in enumerate(recording.segments):
        if len(seg.frames) < 2 * WINDOW_FRAMES:
            raise TooShort(
                f"segment {seg.movement!r} has {len(seg.frames)} frames, "
                f"need at least {2 * WINDOW_FRAMES}"
            )
        if not seg.guide:
            raise MissingGuide(f"segment {seg.movement!r} has no guide stream")
        template = catalog[seg.movement]
        signal = np.concatenate([f.samples for f in seg.frames], axis=1).astype(np.float64)
        X, t_us = _window_features(seg.frames, signal)
        guide_t = np.array([g.t_us for g in seg.guide], dtype=np.int64)
        guide_v = np.array([g.state for g in seg.guide])
        span = WINDOW_FRAMES * SAMPLES_PER_FRAME * 500  # window length in us at 2 kHz
        G = _window_guides(t_us, guide_t, guide_v, span)
        acts = np.array([template.activation_of(g) for g in G])
        y = np.where(acts >= ACTIVATION_THRESHOLD, class_id[seg.movement], class_id[REST])
        if seg.movement == REST:
            y[:] = class_id[REST]

        n = X.shape[0]
        n_fit80 = int(round(n * train_frac))
        n_cal = int(round(n_fit80 * cal_frac))
        idx = offset + np.arange(n)
        train_parts.append(idx[: n_fit80 - n_cal])
        cal_parts.append(idx[n_fit80 - n_cal : n_fit80])
        test_parts.append(idx[n_fit80:])

        X_parts.append(X)
        y_parts.append(y)
        g_parts.append(G)
        t_parts.append(t_us)
        seg_parts.append(np.full(n, seg_i))
        offset += n

    return Dataset(
        X=np.concatenate(X_parts),
        y=np.concatenate(y_parts).astype(np.int64),
        guide=np.concatenate(g_parts),
        t_us=np.concatenate(t_parts),
        segment_of=np.concatenate(seg_parts),
        class_names=class_names,
        train_idx=np.concatenate(train_parts),
        cal_idx=np.concatenate(cal_parts),
        test_idx=np.concatenate(test_parts),
    )


@dataclass(frozen=True, eq=False)
class Normalizer:
    """Per-feature z-score parameters, fitted on training data only."""

    mean: np.ndarray
    std: np.ndarray  # floored at 1e-12

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(mean=np.asarray(d["mean"]), std=np.asarray(d["std"]))


def fit_normalizer(ds: Dataset) -> Normalizer:
    if ds.train_idx.size == 0:
        raise EmptyTrain("no training samples to fit the normalizer")
    Xt = ds.X[ds.train_idx]
    return Normalizer(mean=Xt.mean(axis=0), std=np.maximum(Xt.std(axis=0), 1e-12))


def apply_normalizer(norm: Normalizer, x: np.ndarray) -> np.ndarray:
    return (np.asarray(x, dtype=np.float64) - norm.mean) / norm.std
