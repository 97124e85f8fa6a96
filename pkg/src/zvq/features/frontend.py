"""MFCC extraction and time-derivative augmentation."""

from dataclasses import dataclass

import numpy as np
from scipy.fftpack import dct

from ..errors import ConfigError, DataError
from .audio import AudioClip


@dataclass
class MfccConfig:
    """Front-end knobs; milliseconds, so behavior is sample-rate-agnostic."""

    window_ms: float = 25.0
    hop_ms: float = 10.0
    n_mels: int = 40
    n_coeffs: int = 13
    pre_emphasis: float = 0.97
    log_floor: float = 1e-10
    delta_window: int = 2

    def __post_init__(self):
        if not (0 < self.hop_ms <= self.window_ms):
            raise ConfigError(f"hop_ms={self.hop_ms} must be in (0, window_ms={self.window_ms}]")
        if self.n_coeffs > self.n_mels:
            raise ConfigError(f"n_coeffs={self.n_coeffs} cannot exceed n_mels={self.n_mels}")
        if self.n_mels < 1 or self.n_coeffs < 1:
            raise ConfigError("n_mels and n_coeffs must be positive")


@dataclass
class FeatureSequence:
    """[T, D] float32 frame matrix with its frame rate and source id."""

    utterance_id: str
    frames: np.ndarray
    frame_rate_hz: float

    def __post_init__(self):
        self.frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2:
            raise DataError(f"{self.utterance_id}: frames must be [T, D], "
                            f"got shape {self.frames.shape}")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular filters on the mel scale covering 0 .. sample_rate/2."""
    mel_pts = np.linspace(_hz_to_mel(0.0), _hz_to_mel(sample_rate / 2.0), n_mels + 2)
    bins = np.floor((n_fft + 1) * _mel_to_hz(mel_pts) / sample_rate).astype(int)
    fb = np.zeros((n_mels, n_fft // 2 + 1))
    for m in range(1, n_mels + 1):
        lo, mid, hi = bins[m - 1], bins[m], bins[m + 1]
        for k in range(lo, mid):
            fb[m - 1, k] = (k - lo) / max(mid - lo, 1)
        for k in range(mid, hi):
            fb[m - 1, k] = (hi - k) / max(hi - mid, 1)
    return fb


def mfcc(clip: AudioClip, cfg: MfccConfig | None = None,
         utterance_id: str = "") -> FeatureSequence:
    """Cepstral coefficients (c0 kept) from a mono clip.

    Pipeline: pre-emphasis, windowed framing (Hamming), power spectrum,
    mel filterbank, floored log, orthonormal DCT-II. Frame count is
    floor((n_samples - win) / hop) + 1; the clip must cover one full window.
    """
    cfg = cfg or MfccConfig()
    sr = clip.sample_rate
    win = int(round(cfg.window_ms * sr / 1000.0))
    hop = int(round(cfg.hop_ms * sr / 1000.0))
    x = np.asarray(clip.samples, dtype=np.float64)
    if len(x) < win:
        raise DataError(f"{utterance_id or 'clip'}: {len(x)} samples is shorter "
                        f"than one {win}-sample analysis window")

    emph = np.concatenate([x[:1], x[1:] - cfg.pre_emphasis * x[:-1]])
    n_frames = (len(emph) - win) // hop + 1
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = emph[idx] * np.hamming(win)[None, :]

    n_fft = 1
    while n_fft < win:
        n_fft *= 2
    power = np.abs(np.fft.rfft(frames, n_fft)) ** 2 / n_fft
    fb = mel_filterbank(cfg.n_mels, n_fft, sr)
    logmel = np.log(np.maximum(power @ fb.T, cfg.log_floor))
    ceps = dct(logmel, type=2, axis=1, norm="ortho")[:, :cfg.n_coeffs]
    return FeatureSequence(utterance_id=utterance_id,
                           frames=ceps.astype(np.float32),
                           frame_rate_hz=1000.0 / cfg.hop_ms)


def add_deltas(feat: FeatureSequence, window: int = 2) -> FeatureSequence:
    """Append first and second regression deltas, tripling the feature dim.

    Deltas use the +/-window regression d_t = sum_j j*(c_{t+j} - c_{t-j}) /
    (2 * sum_j j^2) with edge frames replicated, so an interior linear ramp
    has delta exactly equal to its slope.
    """
    if window < 1:
        raise ConfigError(f"delta window must be >= 1, got {window}")

    def regression(c):
        pad = np.pad(c, ((window, window), (0, 0)), mode="edge")
        denom = 2.0 * sum(j * j for j in range(1, window + 1))
        d = np.zeros_like(c)
        for j in range(1, window + 1):
            d += j * (pad[window + j:window + j + len(c)]
                      - pad[window - j:window - j + len(c)])
        return d / denom

    static = feat.frames.astype(np.float64)
    d1 = regression(static)
    d2 = regression(d1)
    out = np.concatenate([static, d1, d2], axis=1).astype(np.float32)
    return FeatureSequence(feat.utterance_id, out, feat.frame_rate_hz)
