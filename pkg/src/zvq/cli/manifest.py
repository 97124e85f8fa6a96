"""Corpus manifests: tab-separated (utterance_id, wav_path, speaker_name)."""

from dataclasses import dataclass
from pathlib import Path

from ..errors import DataError

ROLES = ("train_unit", "train_voice", "test")


@dataclass(frozen=True)
class ManifestEntry:
    utterance_id: str
    wav_path: Path
    speaker_name: str


@dataclass
class Manifest:
    entries: list
    role: str | None = None

    def __post_init__(self):
        if self.role is not None and self.role not in ROLES:
            raise DataError(f"manifest role must be one of {ROLES}, got {self.role!r}")

    @property
    def speaker_names(self) -> list:
        return sorted({e.speaker_name for e in self.entries})


def read_manifest(path, role: str | None = None, check_paths: bool = True) -> Manifest:
    """Load a manifest; relative wav paths resolve against the manifest's dir."""
    base = Path(path).parent
    entries = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields "
                                f"(utterance_id, wav_path, speaker_name), got {len(parts)}")
            utt, wav, speaker = (p.strip() for p in parts)
            if not utt or not wav or not speaker:
                raise DataError(f"{path}:{lineno}: empty field")
            if utt in seen:
                raise DataError(f"{path}:{lineno}: duplicate utterance_id {utt!r}")
            seen.add(utt)
            wav_path = Path(wav)
            if not wav_path.is_absolute():
                wav_path = base / wav_path
            entries.append(ManifestEntry(utt, wav_path, speaker))
    if not entries:
        raise DataError(f"{path}: empty manifest")
    if check_paths:
        missing = [str(e.wav_path) for e in entries if not e.wav_path.is_file()]
        if missing:
            raise DataError(f"{path}: {len(missing)} wav path(s) not found, "
                            f"first: {missing[0]}")
    return Manifest(entries, role)


def write_manifest(entries: list, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(f"{e.utterance_id}\t{e.wav_path}\t{e.speaker_name}\n")
