"""Hyperparameter containers for the two autoencoder variants."""

from dataclasses import dataclass

from ..errors import ConfigError

VARIANT_IN = "in_wae"
VARIANT_SVQ = "svq_wae"
VARIANTS = (VARIANT_IN, VARIANT_SVQ)

ENCODER_PLAIN = "plain"
ENCODER_WITH_IN = "with_in"

FEATURE_DIM = 39
SEGMENT_FRAMES = 32
FEATURE_RATE_HZ = 100.0


@dataclass(frozen=True)
class EncoderConfig:
    """Content encoder: six conv layers then four residual ReLU blocks.

    Layers 1-2 are k3/s1, layers 3-4 are the down-sampling slots (k4/s2 for
    the first ``n_downsample`` of them, k3/s1 otherwise), layers 5-6 are k3/s1
    with layer 6 projecting to ``latent_dim``. The residual blocks run at
    ``latent_dim`` width. With ``variant="with_in"`` an instance norm follows
    layers 2, 4, 6 and the additions of residual blocks 2 and 4.
    """

    in_dim: int = FEATURE_DIM
    hidden_channels: int = 256
    n_downsample: int = 2
    latent_dim: int = 64
    variant: str = ENCODER_PLAIN
    norm_epsilon: float = 1e-5

    def __post_init__(self):
        if self.n_downsample not in (1, 2):
            raise ConfigError(f"n_downsample must be 1 or 2, got {self.n_downsample}")
        if self.variant not in (ENCODER_PLAIN, ENCODER_WITH_IN):
            raise ConfigError(f"unknown encoder variant {self.variant!r}")
        if self.norm_epsilon <= 0:
            raise ConfigError(f"norm_epsilon must be > 0, got {self.norm_epsilon}")
        for name in ("in_dim", "hidden_channels", "latent_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")

    @property
    def downsample_factor(self) -> int:
        return 2 ** self.n_downsample

    @property
    def latent_rate_hz(self) -> float:
        return FEATURE_RATE_HZ / self.downsample_factor


@dataclass(frozen=True)
class SpeakerEncoderConfig:
    """Three convolutions with circular padding, then a global time average."""

    in_dim: int = FEATURE_DIM
    n_conv: int = 3
    channels: int = 256
    speaker_dim: int = 64

    def __post_init__(self):
        if self.n_conv != 3:
            raise ConfigError(f"speaker encoder is a fixed 3-conv stack, got n_conv={self.n_conv}")
        for name in ("in_dim", "channels", "speaker_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")


@dataclass(frozen=True)
class DecoderConfig:
    """Transposed-conv upsampler mirroring the encoder's down-sampling.

    Each upsampling stage sees the speaker embedding broadcast-concatenated
    on the channel axis, so conditioning reaches every temporal scale.
    """

    out_dim: int = FEATURE_DIM
    n_upsample: int = 2
    hidden_channels: int = 256
    speaker_embedding_dim: int = 64
    n_speakers: int = 2

    def __post_init__(self):
        if self.n_upsample not in (1, 2):
            raise ConfigError(f"n_upsample must be 1 or 2, got {self.n_upsample}")
        for name in ("out_dim", "hidden_channels", "speaker_embedding_dim", "n_speakers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")


@dataclass(frozen=True)
class VqConfig:
    codebook_size: int = 128
    n_slices: int = 2
    beta: float = 0.25

    def __post_init__(self):
        if self.codebook_size < 1:
            raise ConfigError(f"codebook_size must be >= 1, got {self.codebook_size}")
        if self.n_slices < 1:
            raise ConfigError(f"n_slices must be >= 1, got {self.n_slices}")
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")
