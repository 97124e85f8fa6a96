"""Information bottlenecks: instance norm, AdaIN, and vector quantization."""

from .instnorm import AdainParams, InConfig, adain, channel_stats, instance_norm
from .vq import (CODE_SUFFIX, Codebook, CodeSequence, QuantizeResult, SlicedCodebook,
                 nearest_indices, read_codes, slice_feature, sliced_vq_quantize,
                 straight_through, vq_loss, vq_quantize, write_codes)

__all__ = [
    "CODE_SUFFIX",
    "AdainParams",
    "Codebook",
    "CodeSequence",
    "InConfig",
    "QuantizeResult",
    "SlicedCodebook",
    "adain",
    "channel_stats",
    "instance_norm",
    "nearest_indices",
    "read_codes",
    "slice_feature",
    "sliced_vq_quantize",
    "straight_through",
    "vq_loss",
    "vq_quantize",
    "write_codes",
]
