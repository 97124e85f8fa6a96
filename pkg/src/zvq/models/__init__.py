"""Model assembly: encoders, decoder, both autoencoder variants, training."""

from .checkpoint import load_checkpoint, save_checkpoint
from .config import (FEATURE_DIM, FEATURE_RATE_HZ, SEGMENT_FRAMES, VARIANT_IN, VARIANT_SVQ,
                     VARIANTS, DecoderConfig, EncoderConfig, SpeakerEncoderConfig, VqConfig)
from .nets import (content_encode, decode_features, init_content_encoder, init_decoder,
                   init_speaker_encoder, speaker_encode)
from .state import (ModelState, convert, decode, encode_utterance, init_model, reconstruct,
                    train_step, training_loss)
from .trainer import UsageWindow, batch_indices, train_loop

__all__ = [
    "FEATURE_DIM",
    "FEATURE_RATE_HZ",
    "SEGMENT_FRAMES",
    "VARIANT_IN",
    "VARIANT_SVQ",
    "VARIANTS",
    "DecoderConfig",
    "EncoderConfig",
    "ModelState",
    "SpeakerEncoderConfig",
    "UsageWindow",
    "VqConfig",
    "batch_indices",
    "content_encode",
    "convert",
    "decode",
    "decode_features",
    "encode_utterance",
    "init_content_encoder",
    "init_decoder",
    "init_model",
    "init_speaker_encoder",
    "load_checkpoint",
    "reconstruct",
    "save_checkpoint",
    "speaker_encode",
    "train_loop",
    "train_step",
    "training_loss",
]
