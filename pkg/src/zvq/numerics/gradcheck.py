"""Central-difference verification of tape gradients."""

import json
import os
from dataclasses import dataclass

import numpy as np

from ..errors import TapeError
from .tensor import Tape, Tensor, backward

# When set, every check appends one JSON line describing its outcome here.
LOG_ENV_VAR = "ZVQ_GRADCHECK_LOG"


@dataclass
class GradCheckReport:
    label: str
    passed: bool
    max_rel_err: float
    worst_index: int
    n_coords: int
    nonfinite_index: int | None = None


def finite_difference_check(f, x: Tensor, h: float = 1e-3, tol: float = 1e-3,
                            label: str = "") -> GradCheckReport:
    """Compare tape gradients of ``f`` against central differences at ``x``.

    ``f(tape, x)`` must build a scalar on the given tape and be deterministic;
    it is re-evaluated forward-only (tape=None) at x +/- h per coordinate.
    Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator. A
    non-finite function value fails the check and is reported with the
    coordinate that produced it.

    When the scalar carries its float64 reduction value (``scalar_f64``), the
    difference quotient reads that instead of the rounded float32: the final
    rounding carries no gradient information, only measurement noise of order
    ulp(|f|)/2h, which would swamp the tolerance for |f| beyond ~10.
    """
    probe = Tensor(x.data.copy(), requires_grad=True)
    tape = Tape()
    out = f(tape, probe)
    if out.size != 1:
        raise TapeError(f"finite_difference_check: f must return a scalar, got {out.shape}")
    backward(tape, out)
    analytic = (np.zeros(probe.size, dtype=np.float64) if probe.grad is None
                else probe.grad.reshape(-1).astype(np.float64))

    flat = x.data.reshape(-1)
    max_rel = 0.0
    worst = -1
    report = None
    for i in range(flat.size):
        fs = []
        steps = []
        bad = False
        for sign in (1.0, -1.0):
            pert = flat.copy()
            pert[i] = np.float32(pert[i] + sign * h)
            steps.append(float(pert[i]))
            out_pert = f(None, Tensor(pert.reshape(x.shape)))
            val = out_pert.scalar_f64 if out_pert.scalar_f64 is not None else out_pert.item()
            if not np.isfinite(val):
                report = GradCheckReport(label, False, float("inf"), i, flat.size,
                                         nonfinite_index=i)
                bad = True
                break
            fs.append(val)
        if bad:
            break
        # Use the realized float32 steps, not the nominal h.
        numeric = (fs[0] - fs[1]) / (steps[0] - steps[1])
        denom = max(abs(analytic[i]), abs(numeric), 1e-8)
        rel = abs(analytic[i] - numeric) / denom
        if rel > max_rel:
            max_rel = rel
            worst = i
    if report is None:
        report = GradCheckReport(label, max_rel <= tol, max_rel, worst, flat.size)

    log_path = os.environ.get(LOG_ENV_VAR)
    if log_path:
        with open(log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(report.__dict__, sort_keys=True) + "\n")
    return report
