"""Bit-rate of a discrete (or discretized) frame representation."""

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError


@dataclass
class SymbolStream:
    """Symbols emitted for one utterance plus the audio duration they cover.

    Symbol keys are opaque: an index tuple per frame for quantized codes, an
    exact-match byte key per frame for continuous vectors. Only equality
    between keys matters.
    """

    symbols: list = field(default_factory=list)
    duration_s: float = 0.0

    def __post_init__(self):
        if not self.symbols:
            raise DataError("SymbolStream: symbols must be non-empty")
        if not (self.duration_s > 0):
            raise DataError(f"SymbolStream: duration_s must be > 0, got {self.duration_s}")


def stream_from_codes(codes) -> SymbolStream:
    """One symbol per frame: the full index tuple across sub-books."""
    idx = np.asarray(codes.indices)
    if idx.ndim == 1:
        idx = idx[:, None]
    symbols = [tuple(int(v) for v in row) for row in idx]
    return SymbolStream(symbols, idx.shape[0] / codes.frame_rate_hz)


def stream_from_frames(feat) -> SymbolStream:
    """Continuous vectors as symbols under exact match, one per frame."""
    frames = np.ascontiguousarray(feat.frames)
    symbols = [frames[t].tobytes() for t in range(frames.shape[0])]
    return SymbolStream(symbols, frames.shape[0] / feat.frame_rate_hz)


def bitrate(streams: list) -> float:
    """Bits per second: (symbols per second) times empirical symbol entropy.

    The symbol distribution is pooled over every stream, so a symbol's
    probability reflects the whole corpus, not its own utterance.
    """
    if not streams:
        raise DataError("bitrate: at least one stream required")
    counts = Counter()
    n_total = 0
    d_total = 0.0
    for s in streams:
        counts.update(s.symbols)
        n_total += len(s.symbols)
        d_total += s.duration_s
    entropy = 0.0
    for c in counts.values():
        p = c / n_total
        entropy -= p * math.log2(p)
    return (n_total / d_total) * entropy
