"""Model state, the training step, and the inference entry points."""

import logging
from dataclasses import dataclass, replace

import numpy as np

from ..bottlenecks import AdainParams, CodeSequence, SlicedCodebook, adain, sliced_vq_quantize
from ..errors import ConfigError, DataError, NumericalError, ShapeError
from ..features import FeatureSequence
from ..numerics import AdamState, Tape, Tensor, adam_step, backward, ops
from . import nets
from .config import (ENCODER_PLAIN, ENCODER_WITH_IN, FEATURE_RATE_HZ, SEGMENT_FRAMES,
                     VARIANT_IN, VARIANT_SVQ, VARIANTS, DecoderConfig, EncoderConfig,
                     SpeakerEncoderConfig, VqConfig)

log = logging.getLogger(__name__)


@dataclass
class ModelState:
    """Everything a running model owns: configs, parameters, and optimizer.

    ``params`` holds the encoder, speaker encoder, decoder, and speaker-table
    tensors; the AdaIN maps and codebook live in their own containers and are
    merged in by :meth:`all_params`. The variant decides which of those two
    exist: the normalization variant carries no codebook, the quantization
    variant no AdaIN and no speaker encoder.
    """

    variant: str
    encoder_cfg: EncoderConfig
    decoder_cfg: DecoderConfig
    speaker_cfg: SpeakerEncoderConfig | None
    vq_cfg: VqConfig | None
    params: dict[str, Tensor]
    adain_params: AdainParams | None
    codebook: SlicedCodebook | None
    adam: AdamState
    rng_seed: int
    step_count: int = 0
    codebook_initialized: bool = False

    @property
    def n_speakers(self) -> int:
        return self.decoder_cfg.n_speakers

    def all_params(self) -> dict[str, Tensor]:
        """Every trainable tensor in canonical (checkpoint) order."""
        merged = dict(self.params)
        if self.adain_params is not None:
            merged.update(self.adain_params.named("adain"))
        if self.codebook is not None:
            merged.update(self.codebook.named("vq"))
        return merged


def init_model(variant: str, n_speakers: int, rng_seed: int,
               encoder: EncoderConfig | None = None,
               speaker: SpeakerEncoderConfig | None = None,
               decoder: DecoderConfig | None = None,
               vq: VqConfig | None = None,
               learning_rate: float = 4e-4) -> ModelState:
    """Build a freshly-initialized model of either variant.

    Fields that are implied by the variant or by other configs (encoder
    normalization, decoder upsample count, speaker count) are overridden on
    the passed configs so they cannot disagree.
    """
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    if n_speakers < 1:
        raise ConfigError(f"n_speakers must be >= 1, got {n_speakers}")
    with_in = variant == VARIANT_IN
    encoder = replace(encoder or EncoderConfig(),
                      variant=ENCODER_WITH_IN if with_in else ENCODER_PLAIN)
    decoder = replace(decoder or DecoderConfig(),
                      n_upsample=encoder.n_downsample, n_speakers=n_speakers)
    speaker = (speaker or SpeakerEncoderConfig()) if with_in else None
    if with_in:
        vq = None
    else:
        vq = vq or VqConfig()
        if encoder.latent_dim % vq.n_slices:
            raise ConfigError(f"latent_dim {encoder.latent_dim} not divisible by "
                              f"n_slices {vq.n_slices}")

    rng = np.random.default_rng(rng_seed)
    params = dict(nets.init_content_encoder(encoder, rng))
    if speaker is not None:
        params.update(nets.init_speaker_encoder(speaker, rng))
    params.update(nets.init_decoder(decoder, encoder.latent_dim, rng))
    emb_bound = float(np.sqrt(1.0 / decoder.speaker_embedding_dim))
    params["spk_table"] = Tensor(
        rng.uniform(-emb_bound, emb_bound,
                    size=(n_speakers, decoder.speaker_embedding_dim)).astype(np.float32),
        requires_grad=True)

    adain_params = None
    codebook = None
    if with_in:
        adain_params = AdainParams.init(speaker.speaker_dim, encoder.latent_dim, rng)
    else:
        # Placeholder entries; replaced in place by the first training step's
        # data-dependent seeding (see _seed_codebook_from_data).
        codebook = SlicedCodebook.uniform_init(vq.codebook_size, encoder.latent_dim,
                                               vq.n_slices, rng, beta=vq.beta)

    merged = dict(params)
    if adain_params is not None:
        merged.update(adain_params.named("adain"))
    if codebook is not None:
        merged.update(codebook.named("vq"))
    return ModelState(variant=variant, encoder_cfg=encoder, decoder_cfg=decoder,
                      speaker_cfg=speaker, vq_cfg=vq, params=params,
                      adain_params=adain_params, codebook=codebook,
                      adam=AdamState.for_params(merged, learning_rate=learning_rate),
                      rng_seed=int(rng_seed))


def _check_speaker(state: ModelState, speaker_id: int) -> int:
    sid = int(speaker_id)
    if not 0 <= sid < state.n_speakers:
        raise DataError(f"unknown speaker id {speaker_id}; "
                        f"model knows ids 0..{state.n_speakers - 1}")
    return sid


def _latent_to_frames(tape, z: Tensor):
    """[B, D, T] -> [B*T, D] frame matrix (time-major within each batch item)."""
    b, d, t = z.shape
    return ops.reshape(tape, ops.transpose(tape, z, (0, 2, 1)), (b * t, d))


def _frames_to_latent(tape, frames: Tensor, b: int, t: int):
    d = frames.shape[1]
    return ops.transpose(tape, ops.reshape(tape, frames, (b, t, d)), (0, 2, 1))


def training_loss(tape, state: ModelState, batch: Tensor, speaker_ids,
                  fixed_indices: np.ndarray | None = None):
    """One forward pass; returns (total, recon, vq_loss_or_None, indices_or_None).

    ``fixed_indices`` freezes the quantizer assignments so the loss becomes
    the differentiable surrogate probed by gradient checks.
    """
    x = batch if isinstance(batch, Tensor) else Tensor(batch)
    sids = np.asarray(speaker_ids, dtype=np.int64)
    if sids.ndim != 1 or sids.shape[0] != x.shape[0]:
        raise ShapeError(f"training_loss: speaker_ids shape {sids.shape} does not "
                         f"match batch {x.shape[0]}")
    if sids.size and (sids.min() < 0 or sids.max() >= state.n_speakers):
        raise DataError(f"training_loss: speaker id out of range 0..{state.n_speakers - 1}")
    spk_vec = ops.embed_rows(tape, state.params["spk_table"], sids)
    z = nets.content_encode(tape, x, state.encoder_cfg, state.params)

    if state.variant == VARIANT_SVQ:
        b, _, t_lat = z.shape
        frames = _latent_to_frames(tape, z)
        q = sliced_vq_quantize(frames, state.codebook, tape=tape,
                               fixed_indices=fixed_indices)
        z_dec = _frames_to_latent(tape, q.z_q, b, t_lat)
        vq_term, indices = q.vq_loss, q.indices
    else:
        z_s = nets.speaker_encode(tape, x, state.speaker_cfg, state.params)
        z_dec = adain(tape, z, z_s, state.adain_params)
        vq_term, indices = None, None

    x_hat = nets.decode_features(tape, z_dec, spk_vec, state.decoder_cfg, state.params)
    recon = ops.mse(tape, x_hat, x)
    total = recon if vq_term is None else ops.add(tape, recon, vq_term)
    return total, recon, vq_term, indices


def _seed_codebook_from_data(state: ModelState, batch: Tensor) -> None:
    """Overwrite the codebook rows with encoder outputs from the first batch.

    In-place on the existing embedding tensors, so parameter identity and the
    optimizer moments survive.
    """
    x = batch if isinstance(batch, Tensor) else Tensor(batch)
    z = nets.content_encode(None, x, state.encoder_cfg, state.params)
    frames = np.ascontiguousarray(z.data.transpose(0, 2, 1)).reshape(-1, z.shape[1])
    rng = np.random.default_rng([state.rng_seed, state.step_count, 1])
    fresh = SlicedCodebook.init_from_data(frames, state.vq_cfg.codebook_size,
                                          state.vq_cfg.n_slices, rng,
                                          beta=state.vq_cfg.beta)
    for cb, src in zip(state.codebook.sub_codebooks, fresh.sub_codebooks):
        cb.embeddings.data[:] = src.embeddings.data
    state.codebook_initialized = True
    log.info("codebook seeded from %d encoder frames", frames.shape[0])


def train_step(state: ModelState, batch, speaker_ids) -> dict:
    """One optimization step; returns the step's losses (and indices for SVQ).

    Deterministic given the model state: all randomness is derived from
    (rng_seed, step_count), so an interrupted and resumed run retraces the
    uninterrupted one exactly.
    """
    if state.variant == VARIANT_SVQ and not state.codebook_initialized:
        _seed_codebook_from_data(state, batch)

    params = state.all_params()
    for p in params.values():
        p.grad = None
    tape = Tape()
    total, recon, vq_term, indices = training_loss(tape, state, batch, speaker_ids)
    total_v = total.item()
    recon_v = recon.item()
    vq_v = vq_term.item() if vq_term is not None else 0.0
    if not np.isfinite(total_v):
        raise NumericalError(f"non-finite loss at step {state.step_count + 1}: "
                             f"total={total_v} recon={recon_v} vq={vq_v}")
    backward(tape, total)
    adam_step(params, state.adam)
    state.step_count += 1
    return {"step": state.step_count, "recon_loss": recon_v, "vq_loss": vq_v,
            "total_loss": total_v, "indices": indices}


def decode(state: ModelState, z_c, speaker_id: int, z_s=None) -> Tensor:
    """Map content latents [B, D, T_latent] to features [B, out_dim, T].

    The normalization variant additionally needs the speaker code ``z_s``
    ([B, speaker_dim]) that drives the AdaIN re-styling.
    """
    sid = _check_speaker(state, speaker_id)
    z = z_c if isinstance(z_c, Tensor) else Tensor(z_c)
    if z.ndim != 3:
        raise ShapeError(f"decode: expected [B, D, T], got {z.shape}")
    spk_vec = ops.embed_rows(None, state.params["spk_table"],
                             np.full(z.shape[0], sid, dtype=np.int64))
    if state.variant == VARIANT_IN:
        if z_s is None:
            raise DataError("decode: the normalization variant needs a speaker code z_s")
        zs = z_s if isinstance(z_s, Tensor) else Tensor(z_s)
        z = adain(None, z, zs, state.adain_params)
    return nets.decode_features(None, z, spk_vec, state.decoder_cfg, state.params)


def _segment_blocks(state: ModelState, feat: FeatureSequence):
    """Split [T, D] frames into full 32-frame blocks plus a reflect-padded tail.

    Yields (block [SEGMENT_FRAMES, D], n_latent_keep, n_output_keep). The tail
    keeps ceil(rem / 2^n_downsample) latent frames and rem output frames, so
    the decoded length equals the input length exactly.
    """
    if feat.n_frames < 4:
        raise DataError(f"{feat.utterance_id or '<unnamed>'}: need at least 4 frames, "
                        f"got {feat.n_frames}")
    if feat.dim != state.encoder_cfg.in_dim:
        raise DataError(f"{feat.utterance_id or '<unnamed>'}: {feat.dim}-dim features, "
                        f"model expects {state.encoder_cfg.in_dim}")
    factor = state.encoder_cfg.downsample_factor
    frames = feat.frames
    n_full, rem = divmod(feat.n_frames, SEGMENT_FRAMES)
    for i in range(n_full):
        yield frames[i * SEGMENT_FRAMES:(i + 1) * SEGMENT_FRAMES], SEGMENT_FRAMES // factor, SEGMENT_FRAMES
    if rem:
        tail = frames[n_full * SEGMENT_FRAMES:]
        padded = np.pad(tail, ((0, SEGMENT_FRAMES - rem), (0, 0)), mode="reflect")
        yield padded, -(-rem // factor), rem


def encode_utterance(state: ModelState, feat: FeatureSequence):
    """Content representation of a whole utterance at the latent frame rate.

    Returns a CodeSequence of index tuples for the quantization variant and a
    [T_latent, D] Tensor of continuous codes for the normalization variant.
    """
    pieces = []
    for block, keep, _ in _segment_blocks(state, feat):
        z = nets.content_encode(None, Tensor(block.T[None, :, :]),
                                state.encoder_cfg, state.params)
        pieces.append(z.data[0].T[:keep])
    latents = np.concatenate(pieces, axis=0)
    if state.variant == VARIANT_IN:
        return Tensor(latents)
    q = sliced_vq_quantize(Tensor(latents), state.codebook)
    return CodeSequence(utterance_id=feat.utterance_id, indices=q.indices,
                        frame_rate_hz=state.encoder_cfg.latent_rate_hz,
                        codebook_size=state.vq_cfg.codebook_size)


def convert(state: ModelState, source_feat: FeatureSequence, target_speaker_id: int,
            reference_feat: FeatureSequence | None = None) -> FeatureSequence:
    """Re-synthesize an utterance's content with the target speaker's identity.

    For the normalization variant the speaker code is computed from
    ``reference_feat`` (an utterance of the target speaker); it defaults to
    the source utterance, which makes convert-to-source the reconstruction
    path. Output frames are at the feature rate and match the input length.
    """
    sid = _check_speaker(state, target_speaker_id)
    ref = reference_feat if reference_feat is not None else source_feat
    z_s = None
    if state.variant == VARIANT_IN:
        if ref.n_frames < 4:
            raise DataError(f"{ref.utterance_id or '<unnamed>'}: reference needs at "
                            f"least 4 frames, got {ref.n_frames}")
        if ref.dim != state.speaker_cfg.in_dim:
            raise DataError(f"{ref.utterance_id or '<unnamed>'}: {ref.dim}-dim reference, "
                            f"model expects {state.speaker_cfg.in_dim}")
        z_s = nets.speaker_encode(None, Tensor(ref.frames.T[None, :, :]),
                                  state.speaker_cfg, state.params)

    spk_vec = ops.embed_rows(None, state.params["spk_table"],
                             np.asarray([sid], dtype=np.int64))
    outputs = []
    for block, keep_latent, keep_out in _segment_blocks(state, source_feat):
        z = nets.content_encode(None, Tensor(block.T[None, :, :]),
                                state.encoder_cfg, state.params)
        if keep_latent != z.shape[2]:
            z = ops.narrow(None, z, 2, 0, keep_latent)
        if state.variant == VARIANT_SVQ:
            frames = _latent_to_frames(None, z)
            q = sliced_vq_quantize(frames, state.codebook)
            z = _frames_to_latent(None, q.z_q, 1, keep_latent)
        else:
            z = adain(None, z, z_s, state.adain_params)
        x_hat = nets.decode_features(None, z, spk_vec, state.decoder_cfg, state.params)
        outputs.append(x_hat.data[0].T[:keep_out])
    return FeatureSequence(utterance_id=source_feat.utterance_id,
                           frames=np.concatenate(outputs, axis=0),
                           frame_rate_hz=FEATURE_RATE_HZ)


def reconstruct(state: ModelState, feat: FeatureSequence, speaker_id: int) -> FeatureSequence:
    """Encode and decode an utterance with its own speaker identity."""
    return convert(state, feat, speaker_id)
