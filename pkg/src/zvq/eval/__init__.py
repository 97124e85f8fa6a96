"""Objective metrics: bit-rate and machine-ABX discriminability."""

from .abx import (ACROSS_TALKER, MODES, WITHIN_TALKER, AbxItem, AbxReport,
                  abx_score)
from .bitrate import SymbolStream, bitrate, stream_from_codes, stream_from_frames
from .dtw import (METRIC_ANGULAR, METRIC_COSINE, DtwReport, dtw_distance,
                  dtw_report)
from .items import ITEM_FRAME_RATE_HZ, ItemSpan, make_abx_items, parse_item_file
from .report import metric_report, write_metric_report

__all__ = [
    "ACROSS_TALKER",
    "AbxItem",
    "AbxReport",
    "DtwReport",
    "ITEM_FRAME_RATE_HZ",
    "ItemSpan",
    "METRIC_ANGULAR",
    "METRIC_COSINE",
    "MODES",
    "SymbolStream",
    "WITHIN_TALKER",
    "abx_score",
    "bitrate",
    "dtw_distance",
    "dtw_report",
    "make_abx_items",
    "metric_report",
    "parse_item_file",
    "stream_from_codes",
    "stream_from_frames",
    "write_metric_report",
]
