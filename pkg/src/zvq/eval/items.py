"""Item files: labeled time spans referencing utterance representations."""

import math
from dataclasses import dataclass

from ..errors import DataError
from .abx import AbxItem

# Span frame indices are given on the acoustic-feature clock.
ITEM_FRAME_RATE_HZ = 100.0


@dataclass(frozen=True)
class ItemSpan:
    utterance_id: str
    start_frame: int
    end_frame: int
    category: str
    talker: str


def parse_item_file(path) -> list:
    """Parse `utterance_id start end category talker` lines into spans.

    Blank lines and lines starting with '#' are skipped. Frame indices are
    100 Hz positions, half-open [start, end).
    """
    spans = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 fields "
                                f"(utterance_id start end category talker), "
                                f"got {len(parts)}")
            utt, start_s, end_s, category, talker = parts
            try:
                start, end = int(start_s), int(end_s)
            except ValueError:
                raise DataError(f"{path}:{lineno}: frame indices must be integers")
            if start < 0 or end <= start:
                raise DataError(f"{path}:{lineno}: need 0 <= start < end, "
                                f"got [{start}, {end})")
            spans.append(ItemSpan(utt, start, end, category, talker))
    if not spans:
        raise DataError(f"{path}: no items")
    return spans


def make_abx_items(spans: list, sequences: dict) -> list:
    """Slice representations out of per-utterance sequences.

    ``sequences`` maps utterance_id to an object with ``frames`` [T, D] and
    ``frame_rate_hz``. Span endpoints are rescaled from the 100 Hz item clock
    to the representation's own rate, widening outward (floor/ceil) so a span
    never loses the frame its boundary falls inside.
    """
    items = []
    for span in spans:
        seq = sequences.get(span.utterance_id)
        if seq is None:
            raise DataError(f"item references unknown utterance {span.utterance_id!r}")
        scale = seq.frame_rate_hz / ITEM_FRAME_RATE_HZ
        lo = math.floor(span.start_frame * scale)
        hi = min(math.ceil(span.end_frame * scale), seq.frames.shape[0])
        if hi <= lo:
            raise DataError(f"{span.utterance_id}: span [{span.start_frame}, "
                            f"{span.end_frame}) is empty at "
                            f"{seq.frame_rate_hz:g} Hz (length {seq.frames.shape[0]})")
        items.append(AbxItem(seq.frames[lo:hi], span.category, span.talker))
    return items
