"""Day-level Precision/Recall/F-Measure, per-series averaging and the
fraud-injection robustness experiment."""

from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ArimaFraudError, ConfigError, ShapeError
from .ingest import SplitSeries, eligibility

log = logging.getLogger(__name__)

METRICS = ("precision", "recall", "f_measure")
METRIC_LABELS = {"precision": "Precision", "recall": "Recall", "f_measure": "F-Measure"}

# A detector maps a split series and a seed to one boolean flag per test day.
Detector = Callable[[SplitSeries, int], Sequence[bool]]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Metrics:
    """None marks an undefined metric (division by zero)."""

    precision: float | None
    recall: float | None
    f_measure: float | None

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f_measure": self.f_measure}


@dataclass(frozen=True)
class InjectionSpec:
    count_range: tuple[int, int] = (1, 8)
    repetitions: int = 100
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.count_range
        if not 1 <= lo <= hi:
            raise ConfigError(f"invalid count range {self.count_range}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be positive")

    def rep_seed(self, rep: int) -> int:
        return self.seed ^ rep


@dataclass(frozen=True)
class Injection:
    day_index: int  # position within the test set
    count: int


@dataclass
class MetricsReport:
    """Per-series and aggregate metrics for one or more methods.

    ``per_series[method][series_id]`` holds that series' metrics (averaged
    over injection repetitions where applicable); ``aggregate[method]`` is
    the arithmetic mean over series with a defined value.
    """

    methods: list[str]
    per_series: dict[str, dict[str, Metrics]]
    aggregate: dict[str, Metrics]
    failures: dict[str, dict[str, str]] = field(default_factory=dict)
    excluded: dict[str, dict[str, list[str]]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "methods": list(self.methods),
            "aggregate": {m: self.aggregate[m].as_dict() for m in self.methods},
            "per_series": {m: {sid: v.as_dict() for sid, v in sorted(self.per_series[m].items())}
                           for m in self.methods},
            "excluded_undefined": {m: {k: sorted(v) for k, v in self.excluded.get(m, {}).items()}
                                   for m in self.methods},
            "failures": {m: dict(sorted(self.failures.get(m, {}).items())) for m in self.methods},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def to_csv(self) -> str:
        """Rows are metrics, columns are methods, values in percent (2 d.p.)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["METRICS"] + [m.upper() for m in self.methods])
        for key in METRICS:
            row = [METRIC_LABELS[key]]
            for m in self.methods:
                v = getattr(self.aggregate[m], key)
                row.append("" if v is None else f"{100.0 * v:.2f}%")
            w.writerow(row)
        return buf.getvalue()


def confusion(flags, truth) -> ConfusionCounts:
    f = np.asarray(flags, dtype=bool)
    t = np.asarray(truth, dtype=bool)
    if f.shape != t.shape:
        raise ShapeError(f"flags {f.shape} and truth {t.shape} differ in shape")
    return ConfusionCounts(int((f & t).sum()), int((f & ~t).sum()), int((~f & t).sum()), int((~f & ~t).sum()))


def metrics(c: ConfusionCounts) -> Metrics:
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else None
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else None
    if precision is None or recall is None or precision + recall == 0:
        f = None
    else:
        f = 2.0 * precision * recall / (precision + recall)
    return Metrics(precision, recall, f)


def f_measure(precision: float, recall: float) -> float:
    return 2.0 * precision * recall / (precision + recall)


def _mean_defined(values) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def average_metrics(items: Sequence[Metrics]) -> Metrics:
    """Component-wise mean, skipping undefined entries."""
    return Metrics(*(_mean_defined(getattr(m, k) for m in items) for k in METRICS))


def draw_injection(test_len: int, spec: InjectionSpec, rep: int = 0) -> Injection:
    if test_len < 1:
        raise ShapeError("cannot inject into an empty test set")
    rng = np.random.default_rng(spec.rep_seed(rep))
    day = int(rng.integers(test_len))
    lo, hi = spec.count_range
    return Injection(day, int(rng.integers(lo, hi + 1)))


def apply_injection(split_series: SplitSeries, injection: Injection) -> SplitSeries:
    s = split_series.series
    total = s.total_counts.copy()
    fraud = s.fraud_counts.copy()
    i = split_series.train_len + injection.day_index
    total[i] += injection.count
    fraud[i] += injection.count
    return split_series.with_series(s.replace_counts(total, fraud))


def inject_frauds(split_series: SplitSeries, spec: InjectionSpec, rep: int = 0) -> SplitSeries:
    """Add ``u ~ Uniform{lo..hi}`` fraudulent transactions to one uniformly
    drawn test day. Repetition ``rep`` uses seed ``spec.seed ^ rep``."""
    return apply_injection(split_series, draw_injection(split_series.test_len, spec, rep))


def strip_train_frauds(split_series: SplitSeries) -> SplitSeries:
    """Remove labelled frauds from the training days so the series can be
    reused in the injection experiment with a legitimate-only training set."""
    s = split_series.series
    total = s.total_counts.copy()
    fraud = s.fraud_counts.copy()
    n = split_series.train_len
    total[:n] -= fraud[:n]
    fraud[:n] = 0
    return split_series.with_series(s.replace_counts(total, fraud))


def _evaluate_once(detector: Detector, split_series: SplitSeries, seed: int) -> Metrics:
    flags = detector(split_series, seed)
    return metrics(confusion(flags, split_series.test_truth))


def run_experiment(series_set: Sequence[SplitSeries], detectors: Mapping[str, Detector],
                   spec: InjectionSpec | None = None, seed: int = 0) -> MetricsReport:
    """Evaluate every detector on every series.

    Eligible series are evaluated once. With an injection spec, ineligible
    series are stripped of training frauds, receive one injected fraud day
    per repetition, and their metrics are averaged over repetitions before
    the global average. Without a spec, ineligible series are skipped.
    """
    methods = list(detectors)
    per_series: dict[str, dict[str, Metrics]] = {m: {} for m in methods}
    failures: dict[str, dict[str, str]] = {m: {} for m in methods}

    for split_series in series_set:
        sid = split_series.customer_id
        status = eligibility(split_series)
        if status.eligible:
            variants = [(split_series, seed)]
        elif spec is not None:
            base = strip_train_frauds(split_series)
            variants = [(inject_frauds(base, spec, rep), spec.rep_seed(rep)) for rep in range(spec.repetitions)]
        else:
            log.info("skipping ineligible series %s (%s)", sid, status.reason)
            continue

        for method, detector in detectors.items():
            try:
                runs = [_evaluate_once(detector, s, rseed) for s, rseed in variants]
            except ArimaFraudError as exc:
                warnings.warn(f"{method} failed on series {sid}: {exc}", stacklevel=2)
                failures[method][sid] = f"{type(exc).__name__}: {exc}"
                continue
            per_series[method][sid] = average_metrics(runs) if len(runs) > 1 else runs[0]

    aggregate = {}
    excluded = {}
    for m in methods:
        values = list(per_series[m].values())
        aggregate[m] = average_metrics(values)
        excluded[m] = {k: [sid for sid, v in per_series[m].items() if getattr(v, k) is None] for k in METRICS}
        if any(excluded[m].values()):
            log.info("%s: undefined metrics excluded from averages: %s", m, excluded[m])
    return MetricsReport(methods, per_series, aggregate, failures, excluded)


def report_from_flags(flag_sets: Mapping[str, Mapping[str, tuple[Sequence[bool], Sequence[bool]]]]) -> MetricsReport:
    """Build a report from already computed ``method -> series -> (flags, truth)``."""
    methods = list(flag_sets)
    per_series = {m: {sid: metrics(confusion(f, t)) for sid, (f, t) in flag_sets[m].items()} for m in methods}
    aggregate = {m: average_metrics(list(per_series[m].values())) for m in methods}
    excluded = {m: {k: [sid for sid, v in per_series[m].items() if getattr(v, k) is None] for k in METRICS}
                for m in methods}
    return MetricsReport(methods, per_series, aggregate, {}, excluded)
