"""Corpus-level cepstral mean and variance normalization."""

import json
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .frontend import FeatureSequence

STD_FLOOR = 1e-8


@dataclass
class CmvnStats:
    """Per-dimension mean and (floored) standard deviation over a corpus."""

    mean: np.ndarray
    std: np.ndarray
    frame_count: int


def compute_cmvn(corpus: list[FeatureSequence]) -> CmvnStats:
    """Population statistics over every frame of every sequence.

    The std is floored at 1e-8 so a constant dimension normalizes to zero
    instead of dividing by zero.
    """
    if not corpus:
        raise DataError("compute_cmvn: empty corpus")
    dim = corpus[0].dim
    total = 0
    s1 = np.zeros(dim)
    s2 = np.zeros(dim)
    for seq in corpus:
        if seq.dim != dim:
            raise DataError(f"compute_cmvn: dimension mismatch, {seq.utterance_id} "
                            f"has D={seq.dim}, expected {dim}")
        f = seq.frames.astype(np.float64)
        s1 += f.sum(axis=0)
        s2 += (f * f).sum(axis=0)
        total += seq.n_frames
    if total < 2:
        raise DataError(f"compute_cmvn: need at least 2 frames, got {total}")
    mean = s1 / total
    var = np.maximum(s2 / total - mean * mean, 0.0)
    std = np.maximum(np.sqrt(var), STD_FLOOR)
    return CmvnStats(mean=mean, std=std, frame_count=total)


def apply_cmvn(feat: FeatureSequence, stats: CmvnStats) -> FeatureSequence:
    if feat.dim != len(stats.mean):
        raise DataError(f"apply_cmvn: {feat.utterance_id} has D={feat.dim}, "
                        f"stats have D={len(stats.mean)}")
    frames = ((feat.frames.astype(np.float64) - stats.mean) / stats.std).astype(np.float32)
    return FeatureSequence(feat.utterance_id, frames, feat.frame_rate_hz)


def save_cmvn(stats: CmvnStats, path) -> None:
    payload = {"mean": stats.mean.tolist(), "std": stats.std.tolist(),
               "frame_count": stats.frame_count}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_cmvn(path) -> CmvnStats:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        return CmvnStats(mean=np.asarray(payload["mean"], dtype=np.float64),
                         std=np.asarray(payload["std"], dtype=np.float64),
                         frame_count=int(payload["frame_count"]))
    except (KeyError, TypeError) as e:
        raise DataError(f"{path}: malformed normalization stats ({e})") from e
