"""Binary feature-file format.

Layout (all little-endian): magic "ZVQF", u32 version (=1), u32 feature
dimension, u32 frame count, f32 frame rate in Hz, then T*D float32 values
row-major. One file per utterance; the filename stem is the utterance id.
"""

import struct
from pathlib import Path

import numpy as np

from ..errors import DataError
from .frontend import FeatureSequence

MAGIC = b"ZVQF"
VERSION = 1
SUFFIX = ".zvqf"
_HEADER = struct.Struct("<4sIIIf")


def write_features(feat: FeatureSequence, path) -> None:
    t, d = feat.frames.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, d, t, feat.frame_rate_hz))
        fh.write(np.ascontiguousarray(feat.frames, dtype="<f4").tobytes())


def read_features(path, utterance_id: str | None = None) -> FeatureSequence:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise DataError(f"{path}: truncated feature file header")
        magic, version, d, t, rate = _HEADER.unpack(head)
        if magic != MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise DataError(f"{path}: unsupported feature file version {version}")
        body = fh.read(4 * t * d)
        if len(body) != 4 * t * d:
            raise DataError(f"{path}: truncated feature payload, expected "
                            f"{t}x{d} float32 values")
        if fh.read(1):
            raise DataError(f"{path}: trailing bytes after feature payload")
    frames = np.frombuffer(body, dtype="<f4").reshape(t, d)
    return FeatureSequence(utterance_id=utterance_id if utterance_id is not None
                           else path.stem,
                           frames=frames, frame_rate_hz=rate)
