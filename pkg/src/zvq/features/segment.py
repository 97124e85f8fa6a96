"""Fixed-length training segments cut from feature sequences."""

import logging

from ..numerics import Tensor
from .frontend import FeatureSequence

log = logging.getLogger(__name__)


def segment(feat: FeatureSequence, length: int = 32, hop: int = 32) -> list[Tensor]:
    """Cut [T, D] features into [1, D, length] tensors; the remainder is dropped.

    A sequence shorter than one segment yields an empty list and a warning.
    """
    t = feat.n_frames
    if t < length:
        log.warning("%s: %d frames is shorter than one %d-frame segment, skipping",
                    feat.utterance_id or "<unnamed>", t, length)
        return []
    out = []
    for start in range(0, t - length + 1, hop):
        out.append(Tensor(feat.frames[start:start + length].T[None, :, :]))
    return out
