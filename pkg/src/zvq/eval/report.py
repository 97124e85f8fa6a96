"""Uniform JSON envelope for metric results."""

import json
import math

from ..errors import DataError


def metric_report(metric: str, value: float, config: dict, seed: int,
                  n_items: int | None = None, n_triples: int | None = None) -> dict:
    if not metric:
        raise DataError("metric_report: metric name must be non-empty")
    if not math.isfinite(value):
        raise DataError(f"metric_report: {metric} value is not finite: {value}")
    report = {"metric": metric, "value": float(value), "config": dict(config),
              "seed": int(seed)}
    if n_items is not None:
        report["n_items"] = int(n_items)
    if n_triples is not None:
        report["n_triples"] = int(n_triples)
    return report


def write_metric_report(path, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
