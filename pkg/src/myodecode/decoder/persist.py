"""Model container: checksummed binary file with a JSON manifest.

Layout: magic ``MGD1`` | u32 manifest length | manifest JSON | u64
payload length | raw little-endian arrays | sha256 over everything
before it.  The manifest pins the format version, training params,
class map, normalizer, and the catalog hash at save time; loading under
a different catalog warns but proceeds.
"""

from __future__ import annotations

import hashlib
import json
import struct
import warnings
from pathlib import Path

import numpy as np

from ..conformal import RapsCalibration
from ..errors import CatalogMismatchWarning, CorruptFile, VersionMismatch
from .dataset import Normalizer
from .gbdt import GbdtModel, GbdtParams

MAGIC = b"MGD1"
FORMAT_VERSION = 1

_ARRAYS = (
    ("feature", "<i4"), ("threshold", "<f8"), ("left", "<i4"),
    ("right", "<i4"), ("value", "<f8"), ("roots", "<i4"),
)


def save_model(path: str | Path, model: GbdtModel, norm: Normalizer,
               catalog_hash: str, calibration: RapsCalibration | None = None) -> None:
    manifest = {
        "format_version": FORMAT_VERSION,
        "params": model.params.to_dict(),
        "n_classes": model.n_classes,
        "n_features": model.n_features,
        "class_names": getattr(model, "class_names", None),
        "base_score": model.base_score.tolist(),
        "normalizer": norm.to_dict(),
        "catalog_hash": catalog_hash,
        "calibration": calibration.to_dict() if calibration else None,
        "array_lengths": {name: int(getattr(model, name).shape[0]) for name, _ in _ARRAYS},
        "train_seconds": model.train_seconds,
    }
    mbytes = json.dumps(manifest, separators=(",", ":")).encode()
    payload = b"".join(
        np.ascontiguousarray(getattr(model, name), dtype=dt).tobytes()
        for name, dt in _ARRAYS
    )
    blob = MAGIC + struct.pack("<I", len(mbytes)) + mbytes
    blob += struct.pack("<Q", len(payload)) + payload
    blob += hashlib.sha256(blob).digest()
    Path(path).write_bytes(blob)


def load_model(path: str | Path, catalog_hash: str | None = None
               ) -> tuple[GbdtModel, Normalizer, str, RapsCalibration | None]:
    """Read a model container; returns (model, normalizer, saved catalog hash, calibration)."""
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise CorruptFile(f"{path}: not a model container")
    if hashlib.sha256(blob[:-32]).digest() != blob[-32:]:
        raise CorruptFile(f"{path}: checksum mismatch (truncated or damaged)")
    (mlen,) = struct.unpack_from("<I", blob, 4)
    manifest = json.loads(blob[8 : 8 + mlen])
    if manifest["format_version"] != FORMAT_VERSION:
        raise VersionMismatch(
            f"model format v{manifest['format_version']}, this build reads v{FORMAT_VERSION}"
        )
    (plen,) = struct.unpack_from("<Q", blob, 8 + mlen)
    payload = blob[16 + mlen : 16 + mlen + plen]

    arrays = {}
    off = 0
    for name, dt in _ARRAYS:
        n = manifest["array_lengths"][name]
        nbytes = n * np.dtype(dt).itemsize
        arrays[name] = np.frombuffer(payload[off : off + nbytes], dtype=dt).copy()
        off += nbytes

    model = GbdtModel(
        n_classes=manifest["n_classes"],
        n_features=manifest["n_features"],
        params=GbdtParams.from_dict(manifest["params"]),
        base_score=np.asarray(manifest["base_score"]),
        **arrays,
    )
    if manifest.get("class_names"):
        model.class_names = manifest["class_names"]
    norm = Normalizer.from_dict(manifest["normalizer"])
    saved_hash = manifest["catalog_hash"]
    if catalog_hash is not None and catalog_hash != saved_hash:
        warnings.warn(
            "movement catalog changed since this model was saved; "
            "class ids may not line up",
            CatalogMismatchWarning,
        )
    cal = manifest.get("calibration")
    calibration = RapsCalibration.from_dict(cal) if cal else None
    return model, norm, saved_hash, calibration
