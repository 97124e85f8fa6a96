"""Deterministic training loop with usage tracking and periodic checkpoints."""

import logging
from collections import deque

import numpy as np

from ..errors import DataError
from ..numerics import Tensor
from .checkpoint import save_checkpoint
from .config import VARIANT_SVQ
from .state import ModelState, train_step

log = logging.getLogger(__name__)


def batch_indices(seed: int, step: int, n_segments: int, batch_size: int) -> np.ndarray:
    """Segment indices for one step, derived from (seed, step) alone.

    Stateless by construction: a resumed run draws exactly the batches the
    uninterrupted run would have drawn.
    """
    rng = np.random.default_rng([seed, step, 0])
    return rng.integers(0, n_segments, size=batch_size)


class UsageWindow:
    """Fraction of (slice, code) pairs selected within the last N steps."""

    def __init__(self, n_slices: int, codebook_size: int, window: int = 1000):
        self.counts = np.zeros((n_slices, codebook_size), dtype=np.int64)
        self.window = window
        self._history: deque[np.ndarray] = deque()

    def _apply(self, indices: np.ndarray, sign: int) -> None:
        for n in range(self.counts.shape[0]):
            self.counts[n] += sign * np.bincount(indices[:, n],
                                                 minlength=self.counts.shape[1])

    def push(self, indices: np.ndarray) -> None:
        self._history.append(indices)
        self._apply(indices, 1)
        if len(self._history) > self.window:
            self._apply(self._history.popleft(), -1)

    def fraction(self) -> float:
        return float((self.counts > 0).sum()) / self.counts.size


def train_loop(state: ModelState, segments, speaker_ids, n_steps: int,
               batch_size: int = 10, checkpoint_path=None, checkpoint_interval: int = 0,
               usage_window: int = 1000, log_every: int = 1000) -> list[dict]:
    """Run steps ``state.step_count + 1 .. n_steps``; returns one record per step.

    ``segments`` is a list of [1, D, T] tensors (or one stacked [N, D, T]
    array); ``speaker_ids`` aligns with it. Records carry the step's losses,
    plus ``codebook_usage`` for the quantization variant (the usage window is
    an observability metric only and restarts empty on resume). A non-finite
    loss aborts before any further checkpoint is written, so the last
    interval checkpoint survives as the most recent good state.
    """
    if isinstance(segments, (list, tuple)):
        if not segments:
            raise DataError("train_loop: no training segments")
        data = np.concatenate([s.data if isinstance(s, Tensor) else np.asarray(s)
                               for s in segments], axis=0)
    else:
        data = np.asarray(segments, dtype=np.float32)
    if data.ndim != 3:
        raise DataError(f"train_loop: expected stacked [N, D, T] segments, "
                        f"got shape {data.shape}")
    sids = np.asarray(speaker_ids, dtype=np.int64)
    if sids.shape != (data.shape[0],):
        raise DataError(f"train_loop: {data.shape[0]} segments but "
                        f"{sids.shape} speaker ids")

    usage = None
    if state.variant == VARIANT_SVQ:
        usage = UsageWindow(state.vq_cfg.n_slices, state.vq_cfg.codebook_size,
                            window=usage_window)
    records = []
    for step in range(state.step_count, n_steps):
        pick = batch_indices(state.rng_seed, step, data.shape[0], batch_size)
        out = train_step(state, Tensor(data[pick]), sids[pick])
        indices = out.pop("indices")
        if usage is not None:
            usage.push(indices)
            out["codebook_usage"] = usage.fraction()
        records.append(out)
        if log_every and out["step"] % log_every == 0:
            log.info("step %d: recon=%.5f vq=%.5f%s", out["step"], out["recon_loss"],
                     out["vq_loss"],
                     f" usage={out['codebook_usage']:.3f}" if usage else "")
        if checkpoint_path and checkpoint_interval and out["step"] % checkpoint_interval == 0:
            save_checkpoint(state, checkpoint_path)
    if checkpoint_path:
        save_checkpoint(state, checkpoint_path)
    return records
