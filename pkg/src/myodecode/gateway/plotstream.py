"""Plot-path decimation: peak-keeping min/max envelope per frame.

Each 18-sample frame becomes 4 values per channel (min and max of each
9-sample half), preserving spike visibility at a fraction of the rate.
The plot tap buffers chunks for the UI pump and drops under back-pressure
so the ingestion thread never stalls; the recording path is elsewhere and
never drops.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from ..proto import EmgFrame

VALUES_PER_FRAME = 4  # min/max of each 4.5 ms half-frame


@dataclass(frozen=True, eq=False)
class PlotChunk:
    t_us: int
    channels: np.ndarray  # float32 [32, 4]: [min0, max0, min1, max1]


def decimate_for_plot(frame: EmgFrame) -> PlotChunk:
    s = frame.samples.astype(np.float32)
    halves = s.reshape(s.shape[0], 2, -1)
    mins = halves.min(axis=2)
    maxs = halves.max(axis=2)
    ch = np.stack([mins[:, 0], maxs[:, 0], mins[:, 1], maxs[:, 1]], axis=1)
    return PlotChunk(t_us=frame.t_us, channels=ch)


class PlotTap:
    """Bounded chunk buffer between the ingestion thread and the UI pump."""

    def __init__(self, maxlen: int = 64):
        self.maxlen = maxlen
        self._chunks: list[PlotChunk] = []
        self._lock = threading.Lock()
        self.dropped = 0

    def on_frame(self, frame: EmgFrame) -> None:
        chunk = decimate_for_plot(frame)
        with self._lock:
            if len(self._chunks) >= self.maxlen:
                self._chunks.pop(0)
                self.dropped += 1
            self._chunks.append(chunk)

    def drain(self) -> list[PlotChunk]:
        with self._lock:
            chunks, self._chunks = self._chunks, []
            return chunks
