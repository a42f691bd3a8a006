"""Session recording container and its on-disk format.

A recording holds one segment per movement: every frame received while
that movement was recorded (lossless) plus the 60 Hz guide states that
labeled it.  Files are a JSON header followed by CRC-checked binary
chunks: frames in wire encoding, guide entries as timestamp + 9 floats +
movement id.  Magic ``MGR1``.
"""

from __future__ import annotations

import json
import struct
import time
import uuid
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import proto
from ..errors import CorruptFile, SchemaVersionMismatch
from ..kinematics import STATE_DIM, GuideTiming, MovementTemplate
from ..proto import EmgFrame, StreamConfig, encode_frame

MAGIC = b"MGR1"
SCHEMA_VERSION = 1
CHUNK_FRAMES = 1
CHUNK_GUIDE = 2
_GUIDE_REC = struct.Struct("<Q9fB")  # t_us, state, movement id


@dataclass(frozen=True, eq=False)
class GuideEntry:
    t_us: int
    state: np.ndarray  # [9] float
    movement: int      # index into the recording's movement list

    def __eq__(self, other) -> bool:
        return (isinstance(other, GuideEntry) and self.t_us == other.t_us
                and self.movement == other.movement
                and np.allclose(self.state, other.state, atol=1e-7))


@dataclass
class Segment:
    movement: str
    frames: list[EmgFrame] = field(default_factory=list)
    guide: list[GuideEntry] = field(default_factory=list)

    def seq_gaps(self) -> int:
        seqs = np.array([f.seq for f in self.frames], dtype=np.int64)
        return int(np.sum(np.diff(seqs) != 1)) if seqs.size > 1 else 0


@dataclass
class SessionRecording:
    session_id: str
    created_at: float
    config: StreamConfig
    timing: GuideTiming
    catalog_entries: list[dict]
    movements: list[str]
    segments: list[Segment] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def new(cls, catalog: dict[str, MovementTemplate], config: StreamConfig,
            timing: GuideTiming, movements: list[str],
            segments: list[Segment] | None = None) -> "SessionRecording":
        entries = [
            {"id": t.id, "target": [float(x) for x in t.target], "display_id": t.display_id}
            for t in catalog.values()
        ]
        return cls(
            session_id=uuid.uuid4().hex,
            created_at=time.time(),
            config=config,
            timing=timing,
            catalog_entries=entries,
            movements=list(movements),
            segments=segments or [],
        )

    def catalog(self) -> dict[str, MovementTemplate]:
        return {
            e["id"]: MovementTemplate(
                id=e["id"], target=np.asarray(e["target"]), display_id=e.get("display_id")
            )
            for e in self.catalog_entries
        }

    def replace_segment(self, segment: Segment) -> None:
        """Insert a segment; re-recording a movement replaces its prior data."""
        self.segments = [s for s in self.segments if s.movement != segment.movement]
        self.segments.append(segment)
        if segment.movement not in self.movements:
            self.movements.append(segment.movement)

    def all_frames(self):
        for seg in self.segments:
            yield from seg.frames

    def total_frames(self) -> int:
        return sum(len(s.frames) for s in self.segments)


def _chunk(kind: int, payload: bytes) -> bytes:
    return struct.pack("<BI", kind, len(payload)) + payload + struct.pack(
        "<I", zlib.crc32(payload)
    )


def save_session(recording: SessionRecording, path: str | Path) -> None:
    header = {
        "schema_version": recording.schema_version,
        "session_id": recording.session_id,
        "created_at": recording.created_at,
        "config": recording.config.to_dict(),
        "timing": recording.timing.to_dict(),
        "catalog": recording.catalog_entries,
        "movements": recording.movements,
        "segments": [
            {"movement": s.movement, "n_frames": len(s.frames), "n_guide": len(s.guide)}
            for s in recording.segments
        ],
    }
    hbytes = json.dumps(header, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<I", len(hbytes)), hbytes]
    for seg in recording.segments:
        parts.append(_chunk(CHUNK_FRAMES, b"".join(encode_frame(f) for f in seg.frames)))
        parts.append(_chunk(CHUNK_GUIDE, b"".join(
            _GUIDE_REC.pack(g.t_us, *np.asarray(g.state, dtype=np.float32), g.movement)
            for g in seg.guide
        )))
    Path(path).write_bytes(b"".join(parts))


def _read_chunk(blob: bytes, off: int, expected_kind: int) -> tuple[bytes, int]:
    if off + 5 > len(blob):
        raise CorruptFile("chunk header truncated")
    kind, length = struct.unpack_from("<BI", blob, off)
    if kind != expected_kind:
        raise CorruptFile(f"expected chunk kind {expected_kind}, got {kind}")
    off += 5
    if off + length + 4 > len(blob):
        raise CorruptFile("chunk payload truncated")
    payload = blob[off : off + length]
    (crc,) = struct.unpack_from("<I", blob, off + length)
    if zlib.crc32(payload) != crc:
        raise CorruptFile("chunk checksum mismatch")
    return payload, off + length + 4


def load_session(path: str | Path) -> SessionRecording:
    blob = Path(path).read_bytes()
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise CorruptFile(f"{path}: not a session file")
    (hlen,) = struct.unpack_from("<I", blob, 4)
    if 8 + hlen > len(blob):
        raise CorruptFile(f"{path}: header truncated")
    try:
        header = json.loads(blob[8 : 8 + hlen])
    except json.JSONDecodeError as e:
        raise CorruptFile(f"{path}: header unreadable: {e}") from e
    if header["schema_version"] != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"session schema v{header['schema_version']}, this build reads v{SCHEMA_VERSION}"
        )

    off = 8 + hlen
    segments = []
    for meta in header["segments"]:
        fpayload, off = _read_chunk(blob, off, CHUNK_FRAMES)
        if len(fpayload) != meta["n_frames"] * proto.FRAME_BYTES:
            raise CorruptFile("frame chunk length disagrees with header")
        frames = [
            proto.decode_frame(fpayload[i * proto.FRAME_BYTES : (i + 1) * proto.FRAME_BYTES])
            for i in range(meta["n_frames"])
        ]
        gpayload, off = _read_chunk(blob, off, CHUNK_GUIDE)
        if len(gpayload) != meta["n_guide"] * _GUIDE_REC.size:
            raise CorruptFile("guide chunk length disagrees with header")
        guide = []
        for i in range(meta["n_guide"]):
            rec = _GUIDE_REC.unpack_from(gpayload, i * _GUIDE_REC.size)
            guide.append(GuideEntry(
                t_us=rec[0],
                state=np.asarray(rec[1 : 1 + STATE_DIM], dtype=np.float64),
                movement=rec[-1],
            ))
        segments.append(Segment(movement=meta["movement"], frames=frames, guide=guide))

    return SessionRecording(
        session_id=header["session_id"],
        created_at=header["created_at"],
        config=StreamConfig(**header["config"]),
        timing=GuideTiming(**header["timing"]),
        catalog_entries=header["catalog"],
        movements=header["movements"],
        segments=segments,
        schema_version=header["schema_version"],
    )
