"""Realtime decode pipeline: socket bytes in, classified hand states out.

One ingestion thread owns the parser and the rolling buffer.  Every
frame is offered to registered frame taps (recording is such a tap and
never drops); once the buffer is full, each new frame yields a feature
window, a softmax prediction, a conformal set, and a solved class.  The
newest decoded state lands in a latest-value cell that the wall-clock
output senders sample; per-window processing latency is tracked for the
benchmark suite.
"""

from __future__ import annotations

import logging
import socket
import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import conformal, dsp
from .conformal import PredictionSet, RapsCalibration, SolverWindow
from .decoder import GbdtModel, Normalizer, predict
from .errors import UnknownClass
from .io_out import StateCell
from .kinematics import MovementTemplate, class_to_state, default_catalog
from .proto import EmgFrame, FrameBuffer, FrameParser

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Prediction:
    """One decoded window: naive argmax plus the conformal-solved class."""

    t_us: int
    naive: int
    solved: int
    probs: np.ndarray
    set_labels: tuple[int, ...]
    certain: bool


class DecodeEngine:
    """Single-owner ingestion stage plus prediction fan-out."""

    def __init__(self, catalog: dict[str, MovementTemplate] | None = None,
                 *, buffer_frames: int = 20, solver_window: int = 75,
                 conformal_enabled: bool = True):
        self.catalog = catalog if catalog is not None else default_catalog()
        self.parser = FrameParser()
        self.buffer = FrameBuffer(capacity=buffer_frames)
        self.solver = SolverWindow(capacity=solver_window)
        self.conformal_enabled = conformal_enabled

        self.model: GbdtModel | None = None
        self.norm: Normalizer | None = None
        self.calibration: RapsCalibration | None = None
        self.class_names: list[str] = []

        self.frame_taps: list[Callable[[EmgFrame], None]] = []
        self.prediction_taps: list[Callable[[Prediction], None]] = []
        self.disconnect_callbacks: list[Callable[[], None]] = []

        self.prediction_cell = StateCell()  # decoded display state, device-timestamped
        self.guide_cell = StateCell()       # guide display state (written by recorder)
        self.latest_prediction: Prediction | None = None

        self.frames_rx = 0
        self.windows = 0
        self.first_window_wall: float | None = None
        self.last_window_wall: float | None = None
        self.latencies: deque = deque(maxlen=16384)

        self._sock: socket.socket | None = None
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()

    # -- model --------------------------------------------------------

    def set_model(self, model: GbdtModel, norm: Normalizer,
                  calibration: RapsCalibration | None,
                  class_names: list[str]) -> None:
        self.model = model
        self.norm = norm
        self.calibration = calibration
        self.class_names = list(class_names)
        self.solver.reset()

    @property
    def has_model(self) -> bool:
        return self.model is not None

    # -- device connection ----------------------------------------------

    @property
    def connected(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    def connect(self, host: str, port: int, timeout: float = 5.0) -> None:
        sock = socket.create_connection((host, port), timeout=timeout)
        sock.settimeout(0.2)
        self._sock = sock
        self._stop.clear()
        self.parser = FrameParser()
        self.buffer.clear()
        self._thread = threading.Thread(target=self._run, name="engine-ingest", daemon=True)
        self._thread.start()

    def disconnect(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def _run(self) -> None:
        try:
            while not self._stop.is_set():
                try:
                    data = self._sock.recv(65536)
                except (TimeoutError, socket.timeout):
                    continue
                except OSError:
                    break
                if not data:
                    break
                self.feed_bytes(data)
        finally:
            if not self._stop.is_set():
                log.warning("device stream ended")
                for cb in self.disconnect_callbacks:
                    cb()

    # -- processing -----------------------------------------------------

    def feed_bytes(self, data: bytes) -> None:
        """Parse and process raw stream bytes (also the test entry point)."""
        t0 = time.perf_counter()
        frames = self.parser.feed(data)
        parse_share = (time.perf_counter() - t0) / len(frames) if frames else 0.0
        for frame in frames:
            self.handle_frame(frame, parse_share)

    def handle_frame(self, frame: EmgFrame, parse_share: float = 0.0) -> None:
        t0 = time.perf_counter()
        self.frames_rx += 1
        for tap in self.frame_taps:
            tap(frame)
        self.buffer.push(frame)
        if not (self.buffer.full and self.model is not None):
            return
        fv = dsp.extract_features(self.buffer)
        out = predict(self.model, self.norm, fv.rms)
        if (self.conformal_enabled and self.calibration is not None
                and self.calibration.q_hat is not None):
            pset = conformal.predict_set(out.probs, self.calibration)
            solved = self.solver.solve(pset)
        else:
            pset = PredictionSet(labels=(out.argmax,), probs=out.probs)
            solved = out.argmax
        pred = Prediction(t_us=fv.t_us, naive=out.argmax, solved=solved,
                          probs=out.probs, set_labels=pset.labels, certain=pset.certain)
        self.latest_prediction = pred
        try:
            state = class_to_state(self.class_names[solved], self.catalog)
            self.prediction_cell.set(state, fv.t_us)
        except (IndexError, UnknownClass):
            log.warning("solved class %d has no display template", solved)
        for tap in self.prediction_taps:
            tap(pred)
        self.windows += 1
        now = time.perf_counter()
        if self.first_window_wall is None:
            self.first_window_wall = now
        self.last_window_wall = now
        self.latencies.append(now - t0 + parse_share)

    # -- stats ----------------------------------------------------------

    def latency_stats(self) -> dict:
        if not self.latencies:
            return {"windows": 0, "p50_ms": None, "p99_ms": None, "max_ms": None,
                    "steady_windows_per_s": None}
        lat = np.asarray(self.latencies) * 1e3
        span = (self.last_window_wall - self.first_window_wall
                if self.windows > 1 else None)
        return {
            "windows": self.windows,
            "p50_ms": float(np.percentile(lat, 50)),
            "p99_ms": float(np.percentile(lat, 99)),
            "max_ms": float(lat.max()),
            "steady_windows_per_s": (self.windows - 1) / span if span else None,
        }
