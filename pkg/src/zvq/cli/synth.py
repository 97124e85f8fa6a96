"""Synthetic desk-scale speech corpus: formant-template phones, tilted talkers.

Each phone class is a harmonic stack shaped by a two-bump formant envelope at
class-specific frequencies; each speaker applies a fixed pitch offset and
spectral tilt. Classes are therefore separable in cepstral features by
construction, while speakers differ in exactly the global characteristics a
speaker encoder should absorb.
"""

import math
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..features import write_wav
from .manifest import ManifestEntry, write_manifest

PEAK = 0.3
FADE_MS = 5.0


def _phone_formants(phone: int, sample_rate: int):
    nyq_cap = 0.45 * sample_rate
    f1 = min(280.0 + 110.0 * phone, nyq_cap)
    f2 = min(1050.0 + 240.0 * phone, nyq_cap)
    return f1, f2


def _phone_wave(phone: int, speaker: int, n_samples: int, sample_rate: int,
                rng: np.random.Generator) -> np.ndarray:
    f0 = 95.0 + 30.0 * speaker
    tilt = 0.6 * speaker
    f1, f2 = _phone_formants(phone, sample_rate)
    t = np.arange(n_samples) / sample_rate
    x = np.zeros(n_samples)
    n_harm = int(0.45 * sample_rate / f0)
    for n in range(1, n_harm + 1):
        f = n * f0
        amp = (math.exp(-((f - f1) / 170.0) ** 2)
               + 0.7 * math.exp(-((f - f2) / 260.0) ** 2))
        amp *= math.exp(-tilt * f / 4000.0)
        if amp < 1e-4:
            continue
        x += amp * np.sin(2.0 * math.pi * f * t + rng.uniform(0.0, 2.0 * math.pi))
    x += 0.003 * rng.normal(size=n_samples)
    peak = np.abs(x).max()
    if peak > 0:
        x *= PEAK / peak
    fade = int(FADE_MS * sample_rate / 1000.0)
    if fade:
        ramp = 0.5 - 0.5 * np.cos(np.linspace(0.0, math.pi, fade))
        x[:fade] *= ramp
        x[-fade:] *= ramp[::-1]
    return x


def make_synth_corpus(out_dir, n_speakers: int = 2, n_phones: int = 5,
                      utterances_per_speaker: int = 20, seed: int = 0,
                      sample_rate: int = 8000, phones_per_utterance: int = 8,
                      phone_ms: int = 160) -> dict:
    """Write WAVs, a manifest, and an ABX item file; byte-stable under seed.

    Item spans are on the 100 Hz feature clock, labeled by phone class and
    speaker. Returns a summary with the file counts and paths.
    """
    if n_speakers < 1 or n_phones < 2 or utterances_per_speaker < 1:
        raise ConfigError(f"synth corpus needs n_speakers >= 1, n_phones >= 2, "
                          f"utterances_per_speaker >= 1; got {n_speakers}, "
                          f"{n_phones}, {utterances_per_speaker}")
    out = Path(out_dir)
    wav_dir = out / "wav"
    wav_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n_phone_samples = int(phone_ms * sample_rate / 1000.0)
    frames_per_phone = phone_ms / 10.0

    entries = []
    item_lines = []
    for s in range(n_speakers):
        speaker = f"spk{s}"
        for u in range(utterances_per_speaker):
            utt = f"{speaker}_u{u:03d}"
            phones = rng.integers(0, n_phones, size=phones_per_utterance)
            pieces = [_phone_wave(int(p), s, n_phone_samples, sample_rate, rng)
                      for p in phones]
            # Manifest paths are kept relative to the manifest itself so the
            # corpus directory can be moved or mounted anywhere.
            wav_rel = Path("wav") / f"{utt}.wav"
            write_wav(out / wav_rel, np.concatenate(pieces), sample_rate)
            entries.append(ManifestEntry(utt, wav_rel, speaker))
            for i, p in enumerate(phones):
                start = round(i * frames_per_phone)
                end = round((i + 1) * frames_per_phone)
                item_lines.append(f"{utt} {start} {end} ph{int(p)} {speaker}\n")

    manifest_path = out / "manifest.tsv"
    write_manifest(entries, manifest_path)
    items_path = out / "items.txt"
    with open(items_path, "w", encoding="utf-8") as fh:
        fh.writelines(item_lines)
    return {"n_wavs": len(entries), "manifest": str(manifest_path),
            "items": str(items_path), "n_items": len(item_lines)}
