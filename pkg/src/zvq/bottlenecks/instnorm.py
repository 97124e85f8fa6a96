"""Instance normalization and its adaptive (speaker-conditioned) variant."""

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from ..numerics import Tensor, ops
from ..numerics.tensor import Tape


@dataclass
class InConfig:
    """epsilon stabilizes the variance; per_instance_stats switches the
    aggregation from (batch, time) to time-only per instance."""

    epsilon: float = 1e-5
    per_instance_stats: bool = False


def channel_stats(m) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and population variance of [B, C, T] over batch and time."""
    data = m.data if isinstance(m, Tensor) else np.asarray(m, dtype=np.float32)
    if data.ndim != 3:
        raise ShapeError(f"channel_stats: expected [B, C, T], got {data.shape}")
    acc = data.astype(np.float64)
    mu = acc.mean(axis=(0, 2))
    var = (acc * acc).mean(axis=(0, 2)) - mu * mu
    return mu.astype(np.float32), np.maximum(var, 0.0).astype(np.float32)


def instance_norm(tape: Tape | None, m: Tensor, cfg: InConfig | None = None) -> Tensor:
    """Normalize [B, C, T] to zero mean, unit variance per channel.

    Statistics aggregate over batch and time together by default (so training
    batches share one set of channel statistics); with per_instance_stats they
    are taken over time only, independently per (batch, channel). The op is
    differentiable through the statistics themselves.
    """
    cfg = cfg or InConfig()
    if m.ndim != 3:
        raise ShapeError(f"instance_norm: expected [B, C, T], got {m.shape}")
    axes = (2,) if cfg.per_instance_stats else (0, 2)
    # Statistics and normalization in f64, rounded once at the output: an f32
    # mean would be amplified by 1/sigma coherently across the whole group.
    x = m.data.astype(np.float64)
    mu = x.mean(axis=axes, keepdims=True)
    var = np.square(x - mu).mean(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + float(cfg.epsilon))
    y = (x - mu) * inv

    def vjp(g):
        g = g.astype(np.float64)
        g_mean = g.mean(axis=axes, keepdims=True)
        gy_mean = (g * y).mean(axis=axes, keepdims=True)
        return ((inv * (g - g_mean - y * gy_mean)).astype(np.float32),)

    out = Tensor(y)
    if tape is not None:
        tape.record(out, (m,), vjp, "instance_norm")
    return out


@dataclass
class AdainParams:
    """Linear maps from a speaker code to per-channel scale and shift.

    The scale map output passes through exp, so the applied scale is positive
    and an all-zero map yields the identity (scale 1, shift 0).
    """

    scale_weight: Tensor
    scale_bias: Tensor
    shift_weight: Tensor
    shift_bias: Tensor

    @classmethod
    def init(cls, speaker_dim: int, channels: int, rng: np.random.Generator) -> "AdainParams":
        bound = float(np.sqrt(1.0 / speaker_dim))
        def w():
            return Tensor(rng.uniform(-bound, bound, size=(channels, speaker_dim))
                          .astype(np.float32), requires_grad=True)
        def b():
            return Tensor(np.zeros(channels, dtype=np.float32), requires_grad=True)
        return cls(scale_weight=w(), scale_bias=b(), shift_weight=w(), shift_bias=b())

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.scale_weight": self.scale_weight,
                f"{prefix}.scale_bias": self.scale_bias,
                f"{prefix}.shift_weight": self.shift_weight,
                f"{prefix}.shift_bias": self.shift_bias}


def adain(tape: Tape | None, o_in: Tensor, z_s: Tensor, params: AdainParams) -> Tensor:
    """Re-style normalized content [B, C, T] with speaker-derived scale/shift."""
    if o_in.ndim != 3:
        raise ShapeError(f"adain: expected content [B, C, T], got {o_in.shape}")
    if z_s.ndim != 2 or z_s.shape[0] != o_in.shape[0]:
        raise ShapeError(f"adain: speaker code {z_s.shape} does not match "
                         f"content batch {o_in.shape}")
    if params.scale_weight.shape[0] != o_in.shape[1]:
        raise ShapeError(f"adain: params cover {params.scale_weight.shape[0]} channels, "
                         f"content has {o_in.shape[1]}")
    scale = ops.exp(tape, ops.linear(tape, z_s, params.scale_weight, params.scale_bias))
    shift = ops.linear(tape, z_s, params.shift_weight, params.shift_bias)
    return ops.channel_affine(tape, o_in, scale, shift)
