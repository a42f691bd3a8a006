"""Amplifier wire protocol: frame encoding, incremental parsing, rolling buffer.

One frame carries 18 samples for all 32 channels (9 ms at 2 kHz).  The
wire layout is magic byte ``0xE7``, little-endian u32 sequence counter,
little-endian u64 capture timestamp (microseconds), then the sample
block channel-major as little-endian i16.
"""

from __future__ import annotations

import logging
import struct
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import BadMagic, NotFull, Truncated

log = logging.getLogger(__name__)

MAGIC = 0xE7
CHANNELS = 32
SAMPLES_PER_FRAME = 18
HEADER = struct.Struct("<BIQ")
PAYLOAD_BYTES = CHANNELS * SAMPLES_PER_FRAME * 2
FRAME_BYTES = HEADER.size + PAYLOAD_BYTES  # 1165


@dataclass(frozen=True)
class StreamConfig:
    sample_rate_hz: int = 2000
    channels: int = CHANNELS
    samples_per_frame: int = SAMPLES_PER_FRAME
    adc_bits: int = 16
    gain: int = 4
    jitter_tolerance_us: int = 3000

    @property
    def frame_rate_hz(self) -> float:
        return self.sample_rate_hz / self.samples_per_frame  # ~111.11

    @property
    def frame_period_us(self) -> int:
        return round(1e6 * self.samples_per_frame / self.sample_rate_hz)  # 9000

    def to_dict(self) -> dict:
        return {
            "sample_rate_hz": self.sample_rate_hz,
            "channels": self.channels,
            "samples_per_frame": self.samples_per_frame,
            "adc_bits": self.adc_bits,
            "gain": self.gain,
            "jitter_tolerance_us": self.jitter_tolerance_us,
        }


@dataclass(frozen=True, eq=False)
class EmgFrame:
    """One amplifier emission: 32 channels x 18 samples of signed 16-bit counts."""

    seq: int
    t_us: int
    samples: np.ndarray  # int16 [32, 18], channel-major

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.shape != (CHANNELS, SAMPLES_PER_FRAME):
            raise ValueError(f"samples must be {CHANNELS}x{SAMPLES_PER_FRAME}, got {s.shape}")
        if s.dtype != np.int16:
            raise ValueError(f"samples must be int16, got {s.dtype}")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EmgFrame)
            and self.seq == other.seq
            and self.t_us == other.t_us
            and np.array_equal(self.samples, other.samples)
        )


def encode_frame(frame: EmgFrame) -> bytes:
    """Serialize one frame to its 1165-byte wire form."""
    return HEADER.pack(MAGIC, frame.seq, frame.t_us) + np.ascontiguousarray(
        frame.samples, dtype="<i2"
    ).tobytes()


def decode_frame(buf: bytes | bytearray | memoryview) -> EmgFrame:
    """Parse exactly one frame from the start of ``buf``.

    Raises ``Truncated`` when fewer than 1165 bytes are available and
    ``BadMagic`` when the first byte is not the frame marker.
    """
    buf = memoryview(buf)
    if len(buf) < 1:
        raise Truncated("empty buffer")
    if buf[0] != MAGIC:
        raise BadMagic(f"expected 0x{MAGIC:02X}, got 0x{buf[0]:02X}")
    if len(buf) < FRAME_BYTES:
        raise Truncated(f"need {FRAME_BYTES} bytes, have {len(buf)}")
    _, seq, t_us = HEADER.unpack_from(buf, 0)
    samples = (
        np.frombuffer(buf[HEADER.size : FRAME_BYTES], dtype="<i2")
        .reshape(CHANNELS, SAMPLES_PER_FRAME)
        .astype(np.int16, copy=True)
    )
    return EmgFrame(seq=seq, t_us=t_us, samples=samples)


class FrameParser:
    """Incremental frame parser that survives arbitrary stream fragmentation.

    Feeding a byte stream split at any positions yields the same frame
    sequence as feeding it whole.  On a bad magic byte the parser scans
    forward to the next candidate marker and counts the resync.
    """

    def __init__(self):
        self._buf = bytearray()
        self.resyncs = 0

    def feed(self, data: bytes) -> list[EmgFrame]:
        self._buf.extend(data)
        frames: list[EmgFrame] = []
        while True:
            if self._buf and self._buf[0] != MAGIC:
                skip = self._buf.find(bytes([MAGIC]))
                self.resyncs += 1
                if skip < 0:
                    self._buf.clear()
                    break
                del self._buf[:skip]
            if len(self._buf) < FRAME_BYTES:
                break
            frames.append(decode_frame(self._buf))
            del self._buf[:FRAME_BYTES]
        return frames

    @property
    def pending(self) -> int:
        return len(self._buf)


@dataclass
class FrameBuffer:
    """Rolling window of the newest frames (default 20 = ~180 ms of signal).

    A sequence-number gap flushes the buffer so no feature is ever
    computed across a discontinuity; the offending frame starts the new
    run.
    """

    capacity: int = 20
    frames: deque = field(default_factory=deque)
    gaps: int = 0

    def push(self, frame: EmgFrame) -> bool:
        """Append a frame; returns True when a seq gap forced a flush."""
        flushed = False
        if self.frames and frame.seq != self.frames[-1].seq + 1:
            log.warning(
                "seq gap %d -> %d: flushing %d buffered frames",
                self.frames[-1].seq, frame.seq, len(self.frames),
            )
            self.frames.clear()
            self.gaps += 1
            flushed = True
        self.frames.append(frame)
        while len(self.frames) > self.capacity:
            self.frames.popleft()
        return flushed

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def full(self) -> bool:
        return len(self.frames) == self.capacity

    @property
    def newest_t_us(self) -> int:
        return self.frames[-1].t_us if self.frames else 0

    def concat(self) -> np.ndarray:
        """Channel-major concatenation (32 x capacity*18) in temporal order."""
        if not self.full:
            raise NotFull(f"buffer holds {len(self.frames)}/{self.capacity} frames")
        return np.concatenate([f.samples for f in self.frames], axis=1)

    def clear(self) -> None:
        self.frames.clear()
