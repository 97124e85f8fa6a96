"""PCM WAV ingestion and emission."""

import wave
from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass
class AudioClip:
    """Mono waveform scaled to [-1, 1), plus its sample rate."""

    samples: np.ndarray
    sample_rate: int

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


def read_wav(path) -> AudioClip:
    """Read a 16-bit PCM mono RIFF/WAVE file.

    Samples are scaled by 1/32768 so the value range is [-1, 1). Compressed,
    multi-channel, or non-16-bit files are rejected.
    """
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getcomptype() != "NONE":
                raise DataError(f"{path}: compressed WAV not supported "
                                f"(comptype={wf.getcomptype()!r})")
            if wf.getnchannels() != 1:
                raise DataError(f"{path}: expected mono audio, got "
                                f"{wf.getnchannels()} channels")
            if wf.getsampwidth() != 2:
                raise DataError(f"{path}: expected 16-bit PCM, got "
                                f"{8 * wf.getsampwidth()}-bit")
            n = wf.getnframes()
            raw = wf.readframes(n)
            rate = wf.getframerate()
    except wave.Error as e:
        raise DataError(f"{path}: not a readable WAV file ({e})") from e
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0
    return AudioClip(samples=samples, sample_rate=rate)


def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    """Write float samples in [-1, 1] as 16-bit PCM mono."""
    pcm = np.clip(np.round(np.asarray(samples, dtype=np.float64) * 32768.0),
                  -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(pcm.tobytes())
