"""Acoustic front end: WAV ingestion, MFCCs, deltas, CMVN, segmentation."""

from .audio import AudioClip, read_wav, write_wav
from .cmvn import CmvnStats, apply_cmvn, compute_cmvn, load_cmvn, save_cmvn
from .featio import read_features, write_features
from .frontend import FeatureSequence, MfccConfig, add_deltas, mel_filterbank, mfcc
from .segment import segment

__all__ = [
    "AudioClip",
    "CmvnStats",
    "FeatureSequence",
    "MfccConfig",
    "add_deltas",
    "apply_cmvn",
    "compute_cmvn",
    "load_cmvn",
    "mel_filterbank",
    "mfcc",
    "read_features",
    "read_wav",
    "save_cmvn",
    "segment",
    "write_features",
    "write_wav",
]
