"""Dynamic time warping over frame sequences with cosine-family metrics."""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ShapeError

METRIC_COSINE = "cosine"
METRIC_ANGULAR = "angular"


@dataclass
class DtwReport:
    distance: float
    path_length: int
    n_zero_norm_frames: int


def _frame_distances(a: np.ndarray, b: np.ndarray, frame_metric: str):
    """Pairwise frame distances [T_a, T_b] plus the zero-norm frame count.

    Cosine distance is computed as half the squared chord between unit
    vectors, 1 - cos = |u - v|^2 / 2: unlike the inner-product form this is
    exactly zero for identical frames and loses no precision for nearly
    parallel ones. The angular variant uses the same chord through arcsin,
    which stays well conditioned where arccos does not. A zero-norm frame has
    no direction; it is scored as distance 1 to every frame and flagged.
    """
    if frame_metric not in (METRIC_COSINE, METRIC_ANGULAR):
        raise ConfigError(f"unknown frame metric {frame_metric!r}")
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    za, zb = na == 0.0, nb == 0.0
    ua = a / np.where(za, 1.0, na)[:, None]
    ub = b / np.where(zb, 1.0, nb)[:, None]
    chord_sq = ((ua[:, None, :] - ub[None, :, :]) ** 2).sum(axis=2)
    if frame_metric == METRIC_COSINE:
        d = 0.5 * chord_sq
    else:
        half_chord = np.clip(0.5 * np.sqrt(chord_sq), 0.0, 1.0)
        d = 2.0 * np.arcsin(half_chord) / math.pi
    d[za, :] = 1.0
    d[:, zb] = 1.0
    return d, int(za.sum() + zb.sum())


def dtw_report(a, b, frame_metric: str = METRIC_COSINE) -> DtwReport:
    """Symmetric DTW (diagonal/up/right steps), normalized by path length.

    Among minimum-cost alignments the shortest path is used for
    normalization, making the result well defined.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError(f"dtw: need [T, D] matrices with equal D, "
                         f"got {a.shape} and {b.shape}")
    if a.shape[0] < 1 or b.shape[0] < 1:
        raise ShapeError("dtw: sequences must have at least one frame")

    d, n_zero = _frame_distances(a, b, frame_metric)
    ta, tb = d.shape
    cost = np.empty((ta, tb))
    length = np.empty((ta, tb), dtype=np.int64)
    cost[0, :] = np.cumsum(d[0, :])
    cost[:, 0] = np.cumsum(d[:, 0])
    length[0, :] = np.arange(1, tb + 1)
    length[:, 0] = np.arange(1, ta + 1)
    for i in range(1, ta):
        for j in range(1, tb):
            best_c, best_l = cost[i - 1, j - 1], length[i - 1, j - 1]
            for ci, li in ((cost[i - 1, j], length[i - 1, j]),
                           (cost[i, j - 1], length[i, j - 1])):
                if ci < best_c or (ci == best_c and li < best_l):
                    best_c, best_l = ci, li
            cost[i, j] = d[i, j] + best_c
            length[i, j] = best_l + 1
    n = int(length[ta - 1, tb - 1])
    return DtwReport(float(cost[ta - 1, tb - 1]) / n, n, n_zero)


def dtw_distance(a, b, frame_metric: str = METRIC_COSINE) -> float:
    return dtw_report(a, b, frame_metric).distance
