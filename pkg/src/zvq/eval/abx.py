"""Machine ABX discriminability over DTW-aligned frame sequences."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from .dtw import METRIC_COSINE, dtw_report

WITHIN_TALKER = "within_talker"
ACROSS_TALKER = "across_talker"
MODES = (WITHIN_TALKER, ACROSS_TALKER)


@dataclass
class AbxItem:
    """One labeled segment: frame matrix [T, D] plus category and talker."""

    representation: np.ndarray
    category: str
    talker: str

    def __post_init__(self):
        self.representation = np.asarray(self.representation, dtype=np.float64)
        if self.representation.ndim != 2 or self.representation.shape[0] < 1:
            raise DataError(f"AbxItem: representation must be [T >= 1, D], "
                            f"got shape {self.representation.shape}")
        if not self.category or not self.talker:
            raise DataError("AbxItem: category and talker labels must be non-empty")


@dataclass
class AbxReport:
    error_rate: float
    n_triples: int
    per_category: dict = field(default_factory=dict)
    cells: dict = field(default_factory=dict)
    skipped_cells: list = field(default_factory=list)
    mode: str = ACROSS_TALKER
    seed: int = 0
    n_zero_norm_frames: int = 0


class _PairCache:
    """DTW distances between items, computed once per unordered pair."""

    def __init__(self, items, frame_metric):
        self.items = items
        self.frame_metric = frame_metric
        self.table = {}
        self.n_zero_norm = 0

    def dist(self, i: int, j: int) -> float:
        key = (i, j) if i <= j else (j, i)
        got = self.table.get(key)
        if got is None:
            rep = dtw_report(self.items[key[0]].representation,
                             self.items[key[1]].representation, self.frame_metric)
            self.table[key] = got = rep.distance
            self.n_zero_norm += rep.n_zero_norm_frames
        return got


def _admissible(items, x_idx, cat_a, cat_b, mode):
    """A-candidates (category of X, not X itself) and B-candidates for one X."""
    tx = items[x_idx].talker
    if mode == WITHIN_TALKER:
        ok = lambda it: it.talker == tx
    else:
        ok = lambda it: it.talker != tx
    a_set = [i for i, it in enumerate(items)
             if it.category == cat_a and i != x_idx and ok(it)]
    b_set = [i for i, it in enumerate(items) if it.category == cat_b and ok(it)]
    return a_set, b_set


def abx_score(items: list, mode: str = ACROSS_TALKER, seed: int = 0,
              max_triples_per_cell: int = 10_000,
              frame_metric: str = METRIC_COSINE) -> AbxReport:
    """Fraction of (A, B, X) triples where X sounds closer to B than to A.

    A and X share a category, B comes from another; a triple errs when
    dtw(A, X) >= dtw(B, X), ties counting one half. Across-talker mode
    requires X's talker to differ from both A's and B's; within-talker mode
    keeps all three on one talker. Cells are ordered category pairs; each
    cell beyond ``max_triples_per_cell`` admissible triples is sampled
    uniformly with a seed derived from (seed, cell index), so results do not
    depend on traversal or worker partitioning. The report averages cell
    error rates, unweighted, then averages those per A-category.
    """
    if mode not in MODES:
        raise DataError(f"abx_score: mode must be one of {MODES}, got {mode!r}")
    cats = sorted({it.category for it in items})
    if len(cats) < 2:
        raise DataError("abx_score: need at least two categories")

    cache = _PairCache(items, frame_metric)
    cells = {}
    skipped = []
    n_total = 0
    cell_idx = -1
    for cat_a in cats:
        for cat_b in cats:
            if cat_b == cat_a:
                continue
            cell_idx += 1
            name = f"{cat_a}|{cat_b}"
            xs, a_sets, b_sets, weights = [], [], [], []
            for i, it in enumerate(items):
                if it.category != cat_a:
                    continue
                a_set, b_set = _admissible(items, i, cat_a, cat_b, mode)
                if a_set and b_set:
                    xs.append(i)
                    a_sets.append(a_set)
                    b_sets.append(b_set)
                    weights.append(len(a_set) * len(b_set))
            total = sum(weights)
            if total == 0:
                skipped.append(name)
                continue

            if total <= max_triples_per_cell:
                triples = [(a, b, x) for k, x in enumerate(xs)
                           for a in a_sets[k] for b in b_sets[k]]
            else:
                rng = np.random.default_rng([seed, cell_idx])
                p = np.asarray(weights, dtype=np.float64) / total
                picks = rng.choice(len(xs), size=max_triples_per_cell, p=p)
                triples = []
                for k in picks:
                    a_set, b_set = a_sets[k], b_sets[k]
                    triples.append((a_set[rng.integers(len(a_set))],
                                    b_set[rng.integers(len(b_set))], xs[k]))

            err = 0.0
            for a, b, x in triples:
                d_ax, d_bx = cache.dist(a, x), cache.dist(b, x)
                if d_ax > d_bx:
                    err += 1.0
                elif d_ax == d_bx:
                    err += 0.5
            cells[name] = {"error": err / len(triples), "n_triples": len(triples)}
            n_total += len(triples)

    if not cells:
        raise DataError("abx_score: no admissible triples in any cell")
    per_category = {}
    for cat_a in cats:
        vals = [v["error"] for k, v in cells.items() if k.split("|")[0] == cat_a]
        if vals:
            per_category[cat_a] = float(np.mean(vals))
    overall = float(np.mean([v["error"] for v in cells.values()]))
    return AbxReport(overall, n_total, per_category, cells, skipped, mode, seed,
                     cache.n_zero_norm)
