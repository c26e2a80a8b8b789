"""Reader and writer for .smfx feature containers.

Layout: magic b"SMFX", then u32 LE version (must be 1), u32 LE row count n,
u32 LE feature width d, then n rows of 4 float32 LE box coordinates
(x1, y1, x2, y2), then n rows of d float32 LE features. No padding, no
trailing bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SMFX"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


class SmfxError(ValueError):
    """Raised for any structural problem in an .smfx file."""


def read_smfx(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Return (features (n, d), boxes (n, 4)) as float32 arrays."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise SmfxError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, n, d = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SmfxError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SmfxError(f"{path}: unsupported version {version}")
    need = _HEADER.size + 4 * n * (4 + d)
    if len(data) < need:
        raise SmfxError(f"{path}: expected {need} bytes, got {len(data)}")
    if len(data) > need:
        raise SmfxError(f"{path}: {len(data) - need} trailing bytes")
    offset = _HEADER.size
    boxes = np.frombuffer(data, dtype="<f4", count=4 * n, offset=offset)
    features = np.frombuffer(data, dtype="<f4", count=n * d, offset=offset + 16 * n)
    return features.reshape(n, d).copy(), boxes.reshape(n, 4).copy()


def write_smfx(path: str | Path, features: np.ndarray, boxes: np.ndarray) -> None:
    features = np.ascontiguousarray(features, dtype="<f4")
    boxes = np.ascontiguousarray(boxes, dtype="<f4")
    if features.ndim != 2:
        raise SmfxError(f"features must be 2-D, got shape {features.shape}")
    if boxes.shape != (features.shape[0], 4):
        raise SmfxError(f"boxes must have shape ({features.shape[0]}, 4), got {boxes.shape}")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, features.shape[0], features.shape[1]))
        f.write(boxes.tobytes())
        f.write(features.tobytes())
