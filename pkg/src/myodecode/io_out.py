"""Output adapters: UDP hand-state senders, transition smoothing, cursor mapping.

The prediction sender runs on its own wall-clock schedule (~32 Hz) and
samples the newest decoded state at each tick; the guide sender does the
same at 60 Hz.  States are never queued: a missed tick is simply
replaced by the next, matching datagram semantics.  Datagram layout is
magic ``MGH1`` | u64 timestamp (us, little-endian) | 9 float32.
"""

from __future__ import annotations

import logging
import socket
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import UnknownClass
from .kinematics import STATE_DIM

log = logging.getLogger(__name__)

MAGIC = b"MGH1"
_DGRAM = struct.Struct("<Q9f")  # follows the 4-byte magic
DGRAM_BYTES = 4 + _DGRAM.size  # 48


@dataclass(frozen=True)
class OutputTarget:
    kind: str = "virtual_hand"  # virtual_hand | cursor_2d | null
    host: str = "127.0.0.1"
    port: int = 9400
    rate_hz: float = 32.0

    def __post_init__(self):
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")


@dataclass(frozen=True)
class CursorState:
    x: float
    y: float

    def __post_init__(self):
        if not (-1.0 <= self.x <= 1.0 and -1.0 <= self.y <= 1.0):
            raise ValueError("cursor coordinates must lie in [-1, 1]")


def encode_state(state: np.ndarray, t_us: int) -> bytes:
    return MAGIC + _DGRAM.pack(int(t_us), *np.asarray(state, dtype=np.float32))


def decode_state(datagram: bytes) -> tuple[np.ndarray, int]:
    if len(datagram) != DGRAM_BYTES or datagram[:4] != MAGIC:
        raise ValueError("not a hand-state datagram")
    vals = _DGRAM.unpack(datagram[4:])
    return np.asarray(vals[1:], dtype=np.float64), vals[0]


CURSOR_AXES = {
    "rest": (0.0, 0.0),
    "inversion": (-1.0, 0.0),
    "eversion": (1.0, 0.0),
    "dorsiflexion": (0.0, 1.0),
    "plantarflexion": (0.0, -1.0),
}


def map_cursor(class_id: str, activation: float = 1.0) -> CursorState:
    """Foot movements onto the 2D cursor plane: left-right and up-down axes."""
    if class_id not in CURSOR_AXES:
        raise UnknownClass(class_id)
    dx, dy = CURSOR_AXES[class_id]
    return CursorState(x=dx * activation, y=dy * activation)


class Interpolator:
    """Linear glide from the currently emitted state toward the latest target.

    Retargeting mid-flight restarts from the in-flight state, so output
    is continuous with per-step change bounded by dt / duration.
    """

    def __init__(self, duration_s: float = 0.25, initial: np.ndarray | None = None):
        self.duration_s = duration_s
        self.current = np.zeros(STATE_DIM) if initial is None else np.array(initial, float)
        self.target = self.current.copy()

    def set_target(self, target: np.ndarray) -> None:
        self.target = np.asarray(target, dtype=np.float64).copy()

    def step(self, dt: float) -> np.ndarray:
        if dt < 0:
            raise ValueError("dt must be >= 0")
        if self.duration_s <= 0:
            self.current = self.target.copy()
            return self.current.copy()
        frac = min(1.0, dt / self.duration_s)
        delta = self.target - self.current
        limit = frac * np.abs(delta)
        self.current = self.current + np.clip(delta, -limit, limit)
        return self.current.copy()


class StateCell:
    """Latest-value cell: single writer, many readers, readers never block."""

    def __init__(self, initial: np.ndarray | None = None):
        self._state = np.zeros(STATE_DIM) if initial is None else np.asarray(initial)
        self._t_us = 0
        self._lock = threading.Lock()

    def set(self, state: np.ndarray, t_us: int) -> None:
        with self._lock:
            self._state = np.asarray(state, dtype=np.float64)
            self._t_us = int(t_us)

    def get(self) -> tuple[np.ndarray, int]:
        with self._lock:
            return self._state.copy(), self._t_us


class RateSender:
    """Wall-clock paced UDP sender reading a latest-state cell each tick.

    Uses absolute deadlines so occasional scheduler delay does not skew
    the long-run rate; socket errors are logged and the loop keeps going.
    """

    def __init__(self, target: OutputTarget, cell: StateCell,
                 interpolate_s: float = 0.0):
        self.target = target
        self.cell = cell
        self.interp = Interpolator(interpolate_s) if interpolate_s > 0 else None
        self.sent = 0
        self.errors = 0
        self.send_times: deque = deque(maxlen=4096)  # enough for a 60 s rate audit
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def start(self) -> "RateSender":
        self._thread = threading.Thread(target=self._run, name="rate-sender", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        self._sock.close()

    def _run(self) -> None:
        period = 1.0 / self.target.rate_hz
        start = time.monotonic()
        n = 0
        addr = (self.target.host, self.target.port)
        while not self._stop.is_set():
            state, t_us = self.cell.get()
            if self.interp is not None:
                self.interp.set_target(state)
                state = self.interp.step(period)
            if self.target.kind != "null":
                try:
                    self._sock.sendto(encode_state(state, t_us), addr)
                except OSError as e:
                    self.errors += 1
                    log.warning("state send failed: %s", e)
            self.sent += 1
            self.send_times.append(time.monotonic())
            n += 1
            deadline = start + n * period
            delay = deadline - time.monotonic()
            if delay > 0:
                time.sleep(delay)
