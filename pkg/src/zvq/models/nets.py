"""Forward passes and initializers for the content/speaker encoders and decoder."""

import numpy as np

from ..bottlenecks import InConfig, instance_norm
from ..errors import ShapeError
from ..numerics import Tensor, ops
from .config import DecoderConfig, ENCODER_WITH_IN, EncoderConfig, SpeakerEncoderConfig

N_RESIDUAL = 4
IN_POSITIONS = (2, 4, 6, 8, 10)


def _conv_init(rng: np.random.Generator, shape: tuple, fan_in: int) -> Tensor:
    bound = float(np.sqrt(1.0 / fan_in))
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(np.float32),
                  requires_grad=True)


def _zeros(n: int) -> Tensor:
    return Tensor(np.zeros(n, dtype=np.float32), requires_grad=True)


def encoder_conv_plan(cfg: EncoderConfig) -> list[tuple]:
    """(c_in, c_out, kernel, stride, padding) for the six conv layers.

    Layers 3 and 4 are the down-sampling slots; slots beyond ``n_downsample``
    fall back to k3/s1 so the layer count stays fixed.
    """
    h = cfg.hidden_channels
    down = (4, 2, 1)
    keep = (3, 1, 1)
    return [
        (cfg.in_dim, h) + keep,
        (h, h) + keep,
        (h, h) + (down if cfg.n_downsample >= 1 else keep),
        (h, h) + (down if cfg.n_downsample >= 2 else keep),
        (h, h) + keep,
        (h, cfg.latent_dim) + keep,
    ]


def init_content_encoder(cfg: EncoderConfig, rng: np.random.Generator) -> dict[str, Tensor]:
    params: dict[str, Tensor] = {}
    for i, (c_in, c_out, k, _, _) in enumerate(encoder_conv_plan(cfg), start=1):
        params[f"enc.conv{i}.weight"] = _conv_init(rng, (c_out, c_in, k), c_in * k)
        params[f"enc.conv{i}.bias"] = _zeros(c_out)
    d = cfg.latent_dim
    for i in range(1, N_RESIDUAL + 1):
        params[f"enc.res{i}.weight"] = _conv_init(rng, (d, d, 3), d * 3)
        params[f"enc.res{i}.bias"] = _zeros(d)
    return params


def content_encode(tape, x: Tensor, cfg: EncoderConfig, params: dict,
                   upto_layer: int | None = None) -> Tensor:
    """Run the 10-layer content stack: [B, in_dim, T] -> [B, D, T/2^n_downsample].

    ``upto_layer`` returns the activation after that position (1..10, norm
    included where present) instead of the full output; used to observe what
    the early normalization layers remove.
    """
    if x.ndim != 3 or x.shape[1] != cfg.in_dim:
        raise ShapeError(f"content_encode: expected [B, {cfg.in_dim}, T], got {x.shape}")
    t = x.shape[2]
    if t < 4:
        raise ShapeError(f"content_encode: need T >= 4, got T={t}")
    if t % cfg.downsample_factor:
        raise ShapeError(f"content_encode: T={t} not divisible by {cfg.downsample_factor}")
    with_in = cfg.variant == ENCODER_WITH_IN
    in_cfg = InConfig(epsilon=cfg.norm_epsilon)

    def at(pos, h):
        if with_in and pos in IN_POSITIONS:
            h = instance_norm(tape, h, in_cfg)
        return h

    h = x
    for i, (_, _, _, stride, padding) in enumerate(encoder_conv_plan(cfg), start=1):
        h = ops.conv1d(tape, h, params[f"enc.conv{i}.weight"], params[f"enc.conv{i}.bias"],
                       stride=stride, padding=padding)
        if i < 6:
            h = ops.relu(tape, h)
        h = at(i, h)
        if upto_layer == i:
            return h
    for i in range(1, N_RESIDUAL + 1):
        branch = ops.relu(tape, ops.conv1d(
            tape, h, params[f"enc.res{i}.weight"], params[f"enc.res{i}.bias"], padding=1))
        h = at(6 + i, ops.add(tape, h, branch))
        if upto_layer == 6 + i:
            return h
    return h


def init_speaker_encoder(cfg: SpeakerEncoderConfig, rng: np.random.Generator) -> dict[str, Tensor]:
    params: dict[str, Tensor] = {}
    widths = [cfg.in_dim, cfg.channels, cfg.channels, cfg.speaker_dim]
    for i in range(1, cfg.n_conv + 1):
        c_in, c_out = widths[i - 1], widths[i]
        params[f"spk.conv{i}.weight"] = _conv_init(rng, (c_out, c_in, 3), c_in * 3)
        params[f"spk.conv{i}.bias"] = _zeros(c_out)
    return params


def speaker_encode(tape, y: Tensor, cfg: SpeakerEncoderConfig, params: dict) -> Tensor:
    """Summarize an utterance [B, in_dim, T] into one [B, speaker_dim] vector.

    Convolutions use circular padding, so the time axis behaves as a loop and
    the pooled statistics of a sequence and of the same sequence tiled twice
    coincide exactly.
    """
    if y.ndim != 3 or y.shape[1] != cfg.in_dim:
        raise ShapeError(f"speaker_encode: expected [B, {cfg.in_dim}, T], got {y.shape}")
    if y.shape[2] < 4:
        raise ShapeError(f"speaker_encode: need T >= 4, got T={y.shape[2]}")
    h = y
    for i in range(1, cfg.n_conv + 1):
        h = ops.pad_circular(tape, h, 1)
        h = ops.conv1d(tape, h, params[f"spk.conv{i}.weight"], params[f"spk.conv{i}.bias"])
        if i < cfg.n_conv:
            h = ops.relu(tape, h)
    return ops.mean_time(tape, h)


def init_decoder(cfg: DecoderConfig, latent_dim: int, rng: np.random.Generator) -> dict[str, Tensor]:
    params: dict[str, Tensor] = {}
    h = cfg.hidden_channels
    c_in = latent_dim
    for i in range(1, cfg.n_upsample + 1):
        # Transposed-conv weights are [C_in, C_out, k]; the speaker embedding
        # is concatenated onto the input channels at every stage.
        c = c_in + cfg.speaker_embedding_dim
        params[f"dec.up{i}.weight"] = _conv_init(rng, (c, h, 4), c * 4)
        params[f"dec.up{i}.bias"] = _zeros(h)
        c_in = h
    params["dec.post1.weight"] = _conv_init(rng, (h, h, 3), h * 3)
    params["dec.post1.bias"] = _zeros(h)
    params["dec.post2.weight"] = _conv_init(rng, (cfg.out_dim, h, 3), h * 3)
    params["dec.post2.bias"] = _zeros(cfg.out_dim)
    return params


def decode_features(tape, z: Tensor, spk_vec: Tensor, cfg: DecoderConfig,
                    params: dict) -> Tensor:
    """Upsample latents [B, D, T] back to features [B, out_dim, T * 2^n_upsample]."""
    if z.ndim != 3:
        raise ShapeError(f"decode_features: expected [B, D, T], got {z.shape}")
    if spk_vec.ndim != 2 or spk_vec.shape != (z.shape[0], cfg.speaker_embedding_dim):
        raise ShapeError(f"decode_features: speaker embedding {spk_vec.shape} does not "
                         f"match batch {z.shape[0]} x {cfg.speaker_embedding_dim}")
    h = z
    for i in range(1, cfg.n_upsample + 1):
        cond = ops.broadcast_time(tape, spk_vec, h.shape[2])
        h = ops.concat_channels(tape, [h, cond])
        # k4/s2 center-cropped to exactly 2T, the frame-exact inverse of the
        # encoder's k4/s2/p1 halving.
        h = ops.transposed_conv1d(tape, h, params[f"dec.up{i}.weight"],
                                  params[f"dec.up{i}.bias"], stride=2)
        h = ops.relu(tape, h)
    h = ops.relu(tape, ops.conv1d(tape, h, params["dec.post1.weight"],
                                  params["dec.post1.bias"], padding=1))
    return ops.conv1d(tape, h, params["dec.post2.weight"], params["dec.post2.bias"],
                      padding=1)
