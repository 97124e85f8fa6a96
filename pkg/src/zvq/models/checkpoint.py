"""Binary model checkpoints: bit-exact save and restore of a ModelState.

Layout (all integers little-endian u32, all tensor data little-endian float32
in C order):

    magic "ZVQM" | version | header_len | header JSON
    n_params
    per parameter, in canonical order:
        name_len | name UTF-8 | ndim | dim_0 .. dim_{ndim-1} | data
    per parameter, same order:
        first-moment data | second-moment data

The header JSON carries the variant, the four config blocks, the optimizer
scalars, and the bookkeeping counters. Optimizer moment shapes are implied by
the parameter list, so they are stored as bare blobs.
"""

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..bottlenecks import AdainParams, Codebook, SlicedCodebook
from ..errors import DataError
from ..numerics import AdamState, Tensor
from .config import DecoderConfig, EncoderConfig, SpeakerEncoderConfig, VqConfig
from .state import ModelState

MAGIC = b"ZVQM"
VERSION = 1


def _header(state: ModelState) -> dict:
    return {
        "variant": state.variant,
        "encoder": asdict(state.encoder_cfg),
        "decoder": asdict(state.decoder_cfg),
        "speaker": asdict(state.speaker_cfg) if state.speaker_cfg else None,
        "vq": asdict(state.vq_cfg) if state.vq_cfg else None,
        "rng_seed": state.rng_seed,
        "step_count": state.step_count,
        "codebook_initialized": state.codebook_initialized,
        "adam": {
            "learning_rate": state.adam.learning_rate,
            "beta1": state.adam.beta1,
            "beta2": state.adam.beta2,
            "epsilon": state.adam.epsilon,
            "step_count": state.adam.step_count,
        },
    }


def save_checkpoint(state: ModelState, path) -> None:
    params = state.all_params()
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    header = json.dumps(_header(state)).encode("utf-8")
    chunks.append(struct.pack("<I", len(header)))
    chunks.append(header)
    chunks.append(struct.pack("<I", len(params)))
    for name, p in params.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", p.ndim))
        chunks.append(struct.pack(f"<{p.ndim}I", *p.shape))
        chunks.append(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
    for name in params:
        chunks.append(np.ascontiguousarray(state.adam.first_moment[name],
                                           dtype="<f4").tobytes())
        chunks.append(np.ascontiguousarray(state.adam.second_moment[name],
                                           dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, buf: bytes, label: str):
        self.buf = buf
        self.pos = 0
        self.label = label

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise DataError(f"{self.label}: truncated checkpoint "
                            f"(wanted {n} bytes at offset {self.pos})")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f32_array(self, shape: tuple) -> np.ndarray:
        n = int(np.prod(shape)) if shape else 1
        raw = self.take(4 * n)
        return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()


def load_checkpoint(path) -> ModelState:
    """Rebuild a ModelState; every tensor and counter matches the saved one bit for bit."""
    label = str(path)
    r = _Reader(Path(path).read_bytes(), label)
    if r.take(4) != MAGIC:
        raise DataError(f"{label}: not a model checkpoint (bad magic)")
    version = r.u32()
    if version != VERSION:
        raise DataError(f"{label}: unsupported checkpoint version {version}")
    header = json.loads(r.take(r.u32()).decode("utf-8"))

    tensors: dict[str, Tensor] = {}
    for _ in range(r.u32()):
        name = r.take(r.u32()).decode("utf-8")
        shape = tuple(r.u32() for _ in range(r.u32()))
        tensors[name] = Tensor(r.f32_array(shape), requires_grad=True)

    adam = AdamState(**header["adam"])
    for name, p in tensors.items():
        adam.first_moment[name] = r.f32_array(p.shape)
        adam.second_moment[name] = r.f32_array(p.shape)
    if r.pos != len(r.buf):
        raise DataError(f"{label}: {len(r.buf) - r.pos} trailing bytes after checkpoint")

    vq_cfg = VqConfig(**header["vq"]) if header["vq"] else None
    adain_params = None
    codebook = None
    params = {n: t for n, t in tensors.items()
              if not n.startswith(("adain.", "vq."))}
    if header["speaker"]:
        adain_params = AdainParams(
            scale_weight=tensors["adain.scale_weight"],
            scale_bias=tensors["adain.scale_bias"],
            shift_weight=tensors["adain.shift_weight"],
            shift_bias=tensors["adain.shift_bias"])
    if vq_cfg:
        codebook = SlicedCodebook(
            [Codebook(tensors[f"vq.book{n}.embeddings"], vq_cfg.beta)
             for n in range(vq_cfg.n_slices)])

    return ModelState(
        variant=header["variant"],
        encoder_cfg=EncoderConfig(**header["encoder"]),
        decoder_cfg=DecoderConfig(**header["decoder"]),
        speaker_cfg=SpeakerEncoderConfig(**header["speaker"]) if header["speaker"] else None,
        vq_cfg=vq_cfg,
        params=params,
        adain_params=adain_params,
        codebook=codebook,
        adam=adam,
        rng_seed=header["rng_seed"],
        step_count=header["step_count"],
        codebook_initialized=header["codebook_initialized"])
