"""Z-score flagging of rolling forecast errors."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .arima import ForecastPoint
from .errors import ConfigError, DataError, DegenerateResidualsError


@dataclass(frozen=True)
class DetectorConfig:
    threshold: float = 3.0
    two_sided: bool = False

    def __post_init__(self):
        if not self.threshold > 0:
            raise ConfigError(f"threshold must be positive, got {self.threshold}")


@dataclass(frozen=True)
class DetectionOutcome:
    day_index: int
    z_score: float
    flagged: bool
    actual_fraud_day: bool | None = None


def residual_stats(train_residuals) -> tuple[float, float]:
    """Mean and sample standard deviation (n - 1) of in-sample errors."""
    r = np.asarray(train_residuals, dtype=float)
    if len(r) < 2:
        raise DegenerateResidualsError("need at least two in-sample residuals")
    sd = float(r.std(ddof=1))
    if not sd > 0:
        raise DegenerateResidualsError("in-sample residuals have zero spread")
    return float(r.mean()), sd


def z_scores(errors, mu: float, sigma: float) -> np.ndarray:
    return (np.asarray(errors, dtype=float) - mu) / sigma


def is_flagged(z, config: DetectorConfig):
    z = np.asarray(z, dtype=float)
    return np.abs(z) > config.threshold if config.two_sided else z > config.threshold


def detect(forecasts: Sequence[ForecastPoint], train_residuals, config: DetectorConfig = DetectorConfig(),
           truth=None) -> list[DetectionOutcome]:
    """Flag test days whose forecast error is more than ``threshold``
    in-sample standard deviations above the in-sample mean error.

    ``truth`` optionally carries the per-day fraud indicator so the
    outcomes can be written next to the ground truth.
    """
    if not forecasts:
        raise DataError("no forecasts to score")
    mu, sigma = residual_stats(train_residuals)
    z = z_scores([f.error for f in forecasts], mu, sigma)
    flags = is_flagged(z, config)
    if truth is not None and len(truth) != len(forecasts):
        raise DataError("truth length differs from the number of forecasts")
    return [
        DetectionOutcome(f.day_index, float(zi), bool(fl), None if truth is None else bool(truth[i]))
        for i, (f, zi, fl) in enumerate(zip(forecasts, z, flags))
    ]


def write_detections_csv(path, dates, forecasts: Sequence[ForecastPoint],
                         outcomes: Sequence[DetectionOutcome]) -> None:
    """``date,actual,predicted,error,zscore,flagged,truth`` per test day."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "actual", "predicted", "error", "zscore", "flagged", "truth"])
        for d, f, o in zip(dates, forecasts, outcomes):
            truth = "" if o.actual_fraud_day is None else int(o.actual_fraud_day)
            w.writerow([d.isoformat() if hasattr(d, "isoformat") else d, repr(f.actual), repr(f.predicted),
                        repr(f.error), repr(o.z_score), int(o.flagged), truth])
