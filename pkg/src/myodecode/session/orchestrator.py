"""Experiment workflow state machine: connect, monitor, record, train, validate.

Commands arrive from the gateway or the CLI and are serialized under one
lock; recording and validation completion fire from the ingestion thread
via frame/prediction taps.  Guide trajectories are clocked by device
timestamps, so accelerated (non-realtime) device streams run the exact
same code path as live ones, just faster.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..conformal import fit_calibration
from ..decoder import GbdtParams, apply_normalizer, assemble, fit_normalizer, train_gbdt
from ..engine import DecodeEngine, Prediction
from ..errors import DeviceLost, InvalidTransition, NoModel, UnknownMovement
from ..kinematics import (
    ACTIVATION_THRESHOLD,
    REST,
    GuideTiming,
    MovementTemplate,
    guide_trajectory,
    remap_display,
)
from ..proto import EmgFrame, StreamConfig
from .metrics import MovementResult, ValidationReport
from .recording import GuideEntry, Segment, SessionRecording

log = logging.getLogger(__name__)

GUIDE_STEP_US = round(1e6 / 60)  # 60 Hz guide stream, device-clocked


class Phase(str, Enum):
    DISCONNECTED = "disconnected"
    MONITORING = "monitoring"
    RECORDING = "recording"
    TRAINING = "training"
    VALIDATING = "validating"
    IDLE = "idle"


@dataclass
class SessionState:
    phase: Phase
    device_connected: bool
    model_ready: bool
    movement: str | None = None
    t_remaining_s: float | None = None
    rep: int | None = None
    n_segments: int = 0
    segments: list[str] = field(default_factory=list)
    conformal_enabled: bool = True
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "phase": self.phase.value,
            "device_connected": self.device_connected,
            "model_ready": self.model_ready,
            "movement": self.movement,
            "t_remaining_s": self.t_remaining_s,
            "rep": self.rep,
            "n_segments": self.n_segments,
            "segments": self.segments,
            "conformal_enabled": self.conformal_enabled,
            "error": self.error,
        }


class _GuideTicker:
    """Emits 60 Hz guide states on the device clock as frames arrive.

    When ``start_t_us`` is pinned (synchronized simulated participant),
    frames before it are pre-roll and ignored, so guide labels and the
    participant's drive share one origin even on accelerated streams.
    """

    def __init__(self, template: MovementTemplate, timing: GuideTiming,
                 movement_index: int, cell, start_t_us: int | None = None):
        self.template = template
        self.timing = timing
        self.movement_index = movement_index
        self.cell = cell
        self.entries: list[GuideEntry] = []
        self.t0_us: int | None = start_t_us
        self._next_us = start_t_us if start_t_us is not None else 0

    def tick(self, t_us: int) -> None:
        if self.t0_us is None:
            self.t0_us = t_us
            self._next_us = t_us
        if t_us < self.t0_us:
            return
        while self._next_us <= t_us:
            rel_s = (self._next_us - self.t0_us) / 1e6
            state, _ = guide_trajectory(self.template, self.timing, rel_s)
            if self.template.id == REST:
                state = np.zeros_like(state)
            self.entries.append(GuideEntry(t_us=self._next_us, state=state,
                                           movement=self.movement_index))
            if self.cell is not None:
                self.cell.set(state, self._next_us)
            self._next_us += GUIDE_STEP_US

    def elapsed_s(self, t_us: int) -> float:
        return 0.0 if self.t0_us is None else (t_us - self.t0_us) / 1e6


class Orchestrator:
    """Single state machine owning the engine, the recording, and the model."""

    def __init__(self, catalog: dict[str, MovementTemplate] | None = None,
                 *, timing: GuideTiming = GuideTiming(),
                 config: StreamConfig = StreamConfig(),
                 conformal_enabled: bool = True,
                 conformal_alpha: float = 0.1, conformal_lambda: float = 0.01,
                 conformal_k_reg: int = 1, solver_window: int = 75,
                 participant=None):
        self.engine = DecodeEngine(catalog, solver_window=solver_window,
                                   conformal_enabled=conformal_enabled)
        self.catalog = self.engine.catalog
        self.timing = timing
        self.stream_config = config
        self.participant = participant  # optional: drives a simulated device
        self.conformal_alpha = conformal_alpha
        self.conformal_lambda = conformal_lambda
        self.conformal_k_reg = conformal_k_reg

        self.phase = Phase.DISCONNECTED
        self.recording = SessionRecording.new(self.catalog, config, timing, [])
        self.report: ValidationReport | None = None
        self.durations: dict[str, float] = {}
        self.last_error: str | None = None

        self._lock = threading.RLock()
        self._recorder: _SegmentRecorder | None = None
        self._validator: _Validator | None = None
        self._train_thread: threading.Thread | None = None
        self._cal_probs: np.ndarray | None = None
        self._cal_labels: np.ndarray | None = None

        self.state_listeners: list = []
        self.report_listeners: list = []

        self.engine.disconnect_callbacks.append(self._on_device_lost)

    # -- state ----------------------------------------------------------

    def state(self) -> SessionState:
        with self._lock:
            s = SessionState(
                phase=self.phase,
                device_connected=self.engine.connected,
                model_ready=self.engine.has_model,
                n_segments=len(self.recording.segments),
                segments=[seg.movement for seg in self.recording.segments],
                conformal_enabled=self.engine.conformal_enabled,
                error=self.last_error,
            )
            if self._recorder is not None:
                s.movement = self._recorder.movement
                s.t_remaining_s = self._recorder.remaining_s
            if self._validator is not None:
                s.movement = self._validator.current_movement
                s.rep = self._validator.current_rep
            return s

    def _set_phase(self, phase: Phase) -> None:
        self.phase = phase
        state = self.state()
        for fn in self.state_listeners:
            fn(state)

    def _require(self, command: str, *allowed: Phase) -> None:
        if self.phase not in allowed:
            raise InvalidTransition(command, self.phase.value)

    # -- device -----------------------------------------------------------

    def connect_device(self, host: str, port: int) -> None:
        with self._lock:
            self._require("connect_device", Phase.DISCONNECTED)
            self.engine.connect(host, port)
            self._set_phase(Phase.MONITORING)

    def disconnect(self) -> None:
        with self._lock:
            self._abort_activity()
            self.engine.disconnect()
            self._set_phase(Phase.DISCONNECTED)

    def _on_device_lost(self) -> None:
        with self._lock:
            log.warning("device lost in phase %s", self.phase.value)
            self._abort_activity()
            self._set_phase(Phase.DISCONNECTED)

    def _abort_activity(self) -> None:
        if self._recorder is not None:
            self._detach_recorder()
        if self._validator is not None:
            self._detach_validator()
        if self.participant is not None:
            self.participant.rest()

    # -- recording ---------------------------------------------------------

    def start_recording(self, movement: str, duration_s: float = 30.0) -> None:
        with self._lock:
            self._require("start_recording", Phase.MONITORING, Phase.IDLE)
            if movement not in self.catalog:
                raise UnknownMovement(movement)
            if not self.engine.connected:
                raise DeviceLost("device is not streaming")
            index = self._movement_index(movement)
            start_t_us = None
            if self.participant is not None and movement != REST:
                start_t_us = self.participant.start_cycle(movement, self.timing)
            self._recorder = _SegmentRecorder(self, movement, duration_s, index,
                                              start_t_us=start_t_us)
            self.engine.frame_taps.append(self._recorder.on_frame)
            self._set_phase(Phase.RECORDING)

    def stop_recording(self) -> None:
        """Abort the running recording; the partial segment is discarded."""
        with self._lock:
            self._require("stop_recording", Phase.RECORDING)
            self._detach_recorder()
            if self.participant is not None:
                self.participant.rest()
            self._set_phase(Phase.IDLE if self.engine.has_model else Phase.MONITORING)

    def _movement_index(self, movement: str) -> int:
        order = [REST] + [m for m in self.recording.movements if m != REST]
        if movement in order:
            return order.index(movement)
        return len(order)

    def _detach_recorder(self) -> None:
        if self._recorder is not None and self._recorder.on_frame in self.engine.frame_taps:
            self.engine.frame_taps.remove(self._recorder.on_frame)
        self._recorder = None

    def _finish_recording(self, segment: Segment) -> None:
        # called from the ingestion thread when the duration elapses
        with self._lock:
            if self.phase != Phase.RECORDING:
                return
            self._detach_recorder()
            self.recording.replace_segment(segment)
            self.durations["record_s"] = self.durations.get("record_s", 0.0) + (
                len(segment.frames) * self.stream_config.frame_period_us / 1e6
            )
            if self.participant is not None:
                self.participant.rest()
            self._set_phase(Phase.IDLE if self.engine.has_model else Phase.MONITORING)

    # -- training -----------------------------------------------------------

    def train(self, params: GbdtParams = GbdtParams(), *, block: bool = True):
        with self._lock:
            self._require("train", Phase.MONITORING, Phase.IDLE)
            if not self.recording.segments:
                raise InvalidTransition("train (no recordings)", self.phase.value)
            self._set_phase(Phase.TRAINING)
        if block:
            return self._train_job(params)
        self._train_thread = threading.Thread(
            target=self._train_job, args=(params,), name="train", daemon=True
        )
        self._train_thread.start()
        return None

    def _train_job(self, params: GbdtParams):
        t0 = time.perf_counter()
        try:
            ds = assemble(self.recording, self.catalog)
            norm = fit_normalizer(ds)
            Xn = apply_normalizer(norm, ds.X)
            model = train_gbdt(Xn[ds.train_idx], ds.y[ds.train_idx],
                               ds.n_classes, params)
            model.class_names = ds.class_names
            cal_probs = model.predict_proba(Xn[ds.cal_idx])
            cal_labels = ds.y[ds.cal_idx]
            calibration = fit_calibration(
                cal_probs, cal_labels, alpha=self.conformal_alpha,
                lam=self.conformal_lambda, k_reg=self.conformal_k_reg,
            )
            wall = time.perf_counter() - t0
            with self._lock:
                self.engine.set_model(model, norm, calibration, ds.class_names)
                self._cal_probs, self._cal_labels = cal_probs, cal_labels
                self.durations["train_s"] = wall
                self.last_error = None
                self._set_phase(Phase.IDLE)
            return {"train_s": wall, "n_classes": ds.n_classes,
                    "n_samples": int(ds.X.shape[0]),
                    "fit_s": model.train_seconds}
        except Exception as e:
            with self._lock:
                self.last_error = f"{type(e).__name__}: {e}"
                self._set_phase(Phase.MONITORING if self.engine.connected
                                else Phase.DISCONNECTED)
            raise

    # -- validation -----------------------------------------------------------

    def start_validation(self, movements: list[str], reps: int = 6,
                         window_s: float = 45.0) -> None:
        with self._lock:
            self._require("start_validation", Phase.IDLE, Phase.MONITORING)
            if not self.engine.has_model:
                raise NoModel("train a model before validating")
            for m in movements:
                if m not in self.catalog:
                    raise UnknownMovement(m)
            self._validator = _Validator(self, movements, reps, window_s)
            self.engine.frame_taps.append(self._validator.on_frame)
            self.engine.prediction_taps.append(self._validator.on_prediction)
            self._validator.begin()
            self._set_phase(Phase.VALIDATING)

    def _detach_validator(self) -> None:
        v = self._validator
        if v is None:
            return
        if v.on_frame in self.engine.frame_taps:
            self.engine.frame_taps.remove(v.on_frame)
        if v.on_prediction in self.engine.prediction_taps:
            self.engine.prediction_taps.remove(v.on_prediction)
        self._validator = None

    def _finish_validation(self, report: ValidationReport) -> None:
        with self._lock:
            if self.phase != Phase.VALIDATING:
                return
            self._detach_validator()
            self.durations["validate_s"] = report.durations_s.get("validate_s", 0.0)
            report.durations_s = dict(self.durations)
            self.report = report
            if self.participant is not None:
                self.participant.rest()
            self._set_phase(Phase.IDLE)
            for fn in self.report_listeners:
                fn(report)

    def stop(self) -> None:
        """Abort any running activity; idempotent in quiet phases."""
        with self._lock:
            if self.phase == Phase.RECORDING:
                self.stop_recording()
            elif self.phase == Phase.VALIDATING:
                self._detach_validator()
                if self.participant is not None:
                    self.participant.rest()
                self._set_phase(Phase.IDLE)
            # MONITORING / IDLE / DISCONNECTED: nothing to stop

    # -- config ------------------------------------------------------------

    def set_config(self, values: dict) -> dict:
        """Apply dotted config keys; conformal changes recalibrate from cache."""
        applied = {}
        with self._lock:
            for key, val in values.items():
                if key == "conformal.enabled":
                    self.engine.conformal_enabled = bool(val)
                elif key == "conformal.alpha":
                    self.conformal_alpha = float(val)
                elif key == "conformal.lambda":
                    self.conformal_lambda = float(val)
                elif key == "conformal.k_reg":
                    self.conformal_k_reg = int(val)
                elif key == "conformal.window":
                    self.engine.solver.capacity = int(val)
                else:
                    raise KeyError(f"unknown config key {key!r}")
                applied[key] = val
            if (self._cal_probs is not None
                    and any(k.startswith("conformal.") and k != "conformal.enabled"
                            and k != "conformal.window" for k in values)):
                self.engine.calibration = fit_calibration(
                    self._cal_probs, self._cal_labels, alpha=self.conformal_alpha,
                    lam=self.conformal_lambda, k_reg=self.conformal_k_reg,
                )
            self._set_phase(self.phase)  # broadcast refreshed state
        return applied

    def remap_display(self, executed: str, display: str) -> None:
        with self._lock:
            remap_display(self.catalog, executed, display)


class _SegmentRecorder:
    """Frame tap that captures one movement segment plus its guide stream."""

    def __init__(self, orch: Orchestrator, movement: str, duration_s: float,
                 movement_index: int, start_t_us: int | None = None):
        self.orch = orch
        self.movement = movement
        self.duration_s = duration_s
        self.start_t_us = start_t_us
        self.segment = Segment(movement=movement)
        self.ticker = _GuideTicker(orch.catalog[movement], orch.timing,
                                   movement_index, orch.engine.guide_cell,
                                   start_t_us=start_t_us)
        self._done = False

    @property
    def remaining_s(self) -> float:
        if self.segment.frames:
            return max(0.0, self.duration_s - self.ticker.elapsed_s(
                self.segment.frames[-1].t_us))
        return self.duration_s

    def on_frame(self, frame: EmgFrame) -> None:
        if self._done:
            return
        if self.start_t_us is not None and frame.t_us < self.start_t_us:
            return  # pre-roll before the synchronized cycle origin
        self.ticker.tick(frame.t_us)
        self.segment.frames.append(frame)
        if self.ticker.elapsed_s(frame.t_us) >= self.duration_s:
            self._done = True
            self.segment.guide = self.ticker.entries
            self.orch._finish_recording(self.segment)


class _Validator:
    """Sequences guided movement windows and scores predictions against labels."""

    def __init__(self, orch: Orchestrator, movements: list[str], reps: int,
                 window_s: float):
        self.orch = orch
        self.movements = movements
        self.reps = reps
        self.window_s = window_s
        scale = (window_s / reps) / orch.timing.period_s
        self.timing = GuideTiming(hold_s=orch.timing.hold_s * scale,
                                  ramp_s=orch.timing.ramp_s * scale)
        self.current = -1
        self.ticker: _GuideTicker | None = None
        self.collected: dict[str, list[Prediction]] = {m: [] for m in movements}
        self.tickers: dict[str, _GuideTicker] = {}
        self._done = False

    @property
    def current_movement(self) -> str | None:
        return self.movements[self.current] if 0 <= self.current < len(self.movements) else None

    @property
    def current_rep(self) -> int | None:
        if self.ticker is None or self.ticker.t0_us is None or not self.ticker.entries:
            return None
        t = self.ticker.entries[-1].t_us
        return min(self.reps, 1 + int(self.ticker.elapsed_s(t) / self.timing.period_s))

    def begin(self) -> None:
        self._advance()

    def _advance(self) -> None:
        self.current += 1
        if self.current >= len(self.movements):
            self._done = True
            self._finish()
            return
        m = self.movements[self.current]
        start_t_us = None
        if self.orch.participant is not None and m != REST:
            start_t_us = self.orch.participant.start_cycle(m, self.timing)
        self.ticker = _GuideTicker(self.orch.catalog[m], self.timing,
                                   self.orch._movement_index(m),
                                   self.orch.engine.guide_cell,
                                   start_t_us=start_t_us)
        self.tickers[m] = self.ticker
        self.orch.engine.solver.reset()

    def on_frame(self, frame: EmgFrame) -> None:
        if self._done or self.ticker is None:
            return
        self.ticker.tick(frame.t_us)
        if self.ticker.t0_us is not None and frame.t_us >= self.ticker.t0_us \
                and self.ticker.elapsed_s(frame.t_us) >= self.window_s:
            self._advance()

    def on_prediction(self, pred: Prediction) -> None:
        if self._done:
            return
        m = self.current_movement
        if (m is not None and self.ticker is not None
                and self.ticker.t0_us is not None and pred.t_us >= self.ticker.t0_us):
            self.collected[m].append(pred)

    def _finish(self) -> None:
        report = ValidationReport(conformal_enabled=self.orch.engine.conformal_enabled)
        class_names = self.orch.engine.class_names
        for m in self.movements:
            preds = self.collected[m]
            ticker = self.tickers[m]
            res = score_predictions(preds, ticker.entries, self.orch.catalog[m],
                                    class_names, m)
            report.per_movement.append(res)
        report.durations_s["validate_s"] = self.window_s * len(self.movements)
        self.orch._finish_validation(report)


def score_predictions(preds: list[Prediction], guide: list[GuideEntry],
                      template: MovementTemplate, class_names: list[str],
                      movement: str) -> MovementResult:
    """Pair predictions with the nearest guide state and score both decoders."""
    if not preds or not guide:
        return MovementResult(movement=movement, naive_accuracy=0.0,
                              conformal_accuracy=0.0, n_predictions=0)
    g_t = np.array([g.t_us for g in guide], dtype=np.int64)
    g_states = np.array([g.state for g in guide])
    p_t = np.array([p.t_us for p in preds], dtype=np.int64)
    nearest = nearest_indices(g_t, p_t)
    labels = np.array([
        class_names.index(movement)
        if movement != REST and template.activation_of(g_states[j]) >= ACTIVATION_THRESHOLD
        else class_names.index(REST)
        for j in nearest
    ])
    naive = np.array([p.naive for p in preds])
    solved = np.array([p.solved for p in preds])
    return MovementResult(
        movement=movement,
        naive_accuracy=float(np.mean(naive == labels)),
        conformal_accuracy=float(np.mean(solved == labels)),
        n_predictions=len(preds),
    )


def nearest_indices(sorted_t: np.ndarray, query_t: np.ndarray) -> np.ndarray:
    """Index of the nearest value in sorted_t for each query timestamp."""
    if len(sorted_t) == 1:
        return np.zeros(len(query_t), dtype=np.intp)
    pos = np.searchsorted(sorted_t, query_t)
    pos = np.clip(pos, 1, len(sorted_t) - 1)
    left = sorted_t[pos - 1]
    right = sorted_t[pos]
    return np.where(query_t - left <= right - query_t, pos - 1, pos)
