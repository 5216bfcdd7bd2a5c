"""End-to-end orchestration: order identification, the ARIMA detector,
baseline adapters and the on-disk pipeline run."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import baselines, ingest
from .arima import (
    ArimaModel,
    ArimaOrder,
    ForecastPoint,
    arma_coefficients_significant,
    difference,
    fit,
    rolling_forecast,
    significance_check,
)
from .detector import DetectionOutcome, DetectorConfig, detect, write_detections_csv
from .errors import ArimaFraudError, ConfigError, DataError, EstimationError, NoDataError
from .evaluation import InjectionSpec, MetricsReport, report_from_flags, run_experiment
from .stattests import AdfResult, Correlogram, adf_test, correlogram, ljung_box, suggest_orders

log = logging.getLogger(__name__)

ALL_METHODS = ("arima",) + baselines.METHODS
DEFAULT_EXTRA_ORDERS = ((1, 1), (1, 2))


@dataclass(frozen=True)
class PipelineConfig:
    input_path: Path | None = None
    output_dir: Path = Path("out")
    split_ratio: float = 0.7
    z_threshold: float = 3.0
    two_sided: bool = False
    order: ArimaOrder | None = None
    max_d: int = 2
    adf_significance: float = 0.05
    ljung_box_lags: int = 10
    ljung_box_alpha: float = 0.05
    refit_every: int | None = None
    methods: tuple[str, ...] = ALL_METHODS
    k: int | None = None
    lof_threshold: float = 1.5
    trees: int = 100
    subsample: int | None = None
    restarts: int = 10
    inject: bool = False
    reps: int = 100
    count_range: tuple[int, int] = (1, 8)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError(f"split_ratio must lie in (0, 1), got {self.split_ratio}")
        DetectorConfig(self.z_threshold, self.two_sided)
        unknown = set(self.methods) - set(ALL_METHODS)
        if unknown:
            raise ConfigError(f"unknown methods: {sorted(unknown)}")

    @property
    def detector_config(self) -> DetectorConfig:
        return DetectorConfig(self.z_threshold, self.two_sided)

    @property
    def injection_spec(self) -> InjectionSpec:
        return InjectionSpec(tuple(self.count_range), self.reps, self.seed)


@dataclass(frozen=True)
class CandidateFit:
    order: ArimaOrder
    model: ArimaModel | None
    aic: float
    significant: bool
    ljung_box_p: float | None
    error: str | None = None

    @property
    def accepted(self) -> bool:
        return (self.model is not None and self.significant
                and self.ljung_box_p is not None and self.ljung_box_p > 0.05)

    def to_dict(self) -> dict:
        return {"order": list(self.order.as_tuple()), "aic": self.aic, "significant": self.significant,
                "ljung_box_p": self.ljung_box_p, "error": self.error}


@dataclass(frozen=True)
class ModelSelection:
    model: ArimaModel
    d: int
    adf: list[AdfResult]
    correlogram: Correlogram | None
    candidates: list[CandidateFit] = field(default_factory=list)
    fallback: bool = False

    def to_dict(self) -> dict:
        return {
            "selected_order": list(self.model.order.as_tuple()),
            "d": self.d,
            "adf": [a.to_dict() for a in self.adf],
            "candidates": [c.to_dict() for c in self.candidates],
            "fallback": self.fallback,
        }


def choose_differencing(train, max_d: int = 2, significance: float = 0.05) -> tuple[int, list[AdfResult]]:
    """Difference until the ADF test rejects a unit root (at most ``max_d``)."""
    results = []
    y = np.asarray(train, dtype=float)
    for d in range(max_d + 1):
        res = adf_test(y, significance=significance)
        results.append(res)
        if res.stationary or d == max_d:
            return d, results
        y = difference(y, 1)
    return max_d, results


def _evaluate_candidate(train, order: ArimaOrder, lb_lags: int) -> CandidateFit:
    try:
        model = fit(train, order)
    except ArimaFraudError as exc:
        return CandidateFit(order, None, np.inf, False, None, f"{type(exc).__name__}: {exc}")
    significant = arma_coefficients_significant(model)
    k = order.p + order.q
    lb_p = None
    if lb_lags > k and len(model.train_residuals) > lb_lags:
        try:
            lb_p = ljung_box(model.train_residuals, lb_lags, k).p_value
        except ArimaFraudError:
            lb_p = None
    return CandidateFit(order, model, model.aic, significant, lb_p)


def select_model(train, config: PipelineConfig = PipelineConfig()) -> ModelSelection:
    """Box-Jenkins identification on the training counts.

    ADF decides the differencing degree; ACF/PACF cutoffs propose (p, q)
    candidates, to which (1,1) and (1,2) are added. The lowest-AIC
    candidate with significant ARMA coefficients and Ljung-Box p above
    ``ljung_box_alpha`` wins; if none qualifies the lowest AIC is used.
    """
    train = np.asarray(train, dtype=float)
    if config.order is not None:
        model = fit(train, config.order)
        return ModelSelection(model, config.order.d, [], None, [_evaluate_candidate(train, config.order,
                                                                                      config.ljung_box_lags)])

    d, adf_results = choose_differencing(train, config.max_d, config.adf_significance)
    cg = correlogram(difference(train, d))
    pq = list(suggest_orders(cg))
    for extra in DEFAULT_EXTRA_ORDERS:
        if extra not in pq:
            pq.append(extra)
    candidates = [_evaluate_candidate(train, ArimaOrder(p, d, q), config.ljung_box_lags) for p, q in pq]
    fitted = [c for c in candidates if c.model is not None]
    if not fitted:
        raise EstimationError("no candidate order could be fitted",
                              {"candidates": [c.to_dict() for c in candidates]})
    passing = [c for c in fitted if c.significant and c.ljung_box_p is not None
               and c.ljung_box_p > config.ljung_box_alpha]
    fallback = not passing
    pool = passing or fitted
    best = min(pool, key=lambda c: c.aic)
    if fallback:
        log.warning("no candidate passed significance and Ljung-Box checks; using lowest AIC %s", best.order)
    return ModelSelection(best.model, d, adf_results, cg, candidates, fallback)


@dataclass(frozen=True)
class ArimaRun:
    selection: ModelSelection
    forecasts: list[ForecastPoint]
    outcomes: list[DetectionOutcome]

    @property
    def flags(self) -> np.ndarray:
        return np.array([o.flagged for o in self.outcomes])


def arima_detect(split_series: ingest.SplitSeries, config: PipelineConfig = PipelineConfig(),
                 selection: ModelSelection | None = None) -> ArimaRun:
    if selection is None:
        selection = select_model(split_series.train, config)
    model = selection.model
    forecasts = rolling_forecast(model, split_series.train, split_series.test, config.refit_every)
    outcomes = detect(forecasts, model.train_residuals, config.detector_config, split_series.test_truth)
    return ArimaRun(selection, forecasts, outcomes)


class ArimaDetector:
    """Detector callable for :func:`run_experiment`.

    Model selection depends only on the training days, so it is cached
    across injection repetitions of the same series.
    """

    def __init__(self, config: PipelineConfig):
        self.config = config
        self._cache: dict[bytes, ModelSelection] = {}

    def __call__(self, split_series: ingest.SplitSeries, seed: int) -> np.ndarray:
        key = split_series.customer_id.encode() + b"|" + np.asarray(split_series.train).tobytes()
        if key not in self._cache:
            self._cache[key] = select_model(split_series.train, self.config)
        return arima_detect(split_series, self.config, self._cache[key]).flags


class BaselineDetector:
    def __init__(self, method: str, config: PipelineConfig):
        self.method = method
        self.config = config

    def __call__(self, split_series: ingest.SplitSeries, seed: int) -> np.ndarray:
        return run_baseline_on_split(self.method, split_series, self.config, seed).flags


def run_baseline_on_split(method: str, split_series: ingest.SplitSeries, config: PipelineConfig, seed: int):
    return baselines.run_baseline(
        method, split_series.series.total_counts, split_series.train_len, seed,
        k=config.k, lof_threshold=config.lof_threshold, trees=config.trees,
        subsample=config.subsample, restarts=config.restarts,
    )


def make_detectors(config: PipelineConfig) -> dict:
    return {m: ArimaDetector(config) if m == "arima" else BaselineDetector(m, config) for m in config.methods}


def evaluate(splits: Sequence[ingest.SplitSeries], config: PipelineConfig) -> MetricsReport:
    spec = config.injection_spec if config.inject else None
    return run_experiment(splits, make_detectors(config), spec, config.seed)


# -- on-disk run -------------------------------------------------------------

def write_correlogram_csv(cg: Correlogram, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lag", "acf", "pacf", "band"])
        for lag, a, p, band in cg.rows():
            w.writerow([lag, repr(a), repr(p), repr(band)])


def write_baseline_csv(path, dates, actual, flagset: baselines.BaselineFlagSet, truth) -> None:
    """Same columns as the ARIMA detections; the method score goes in
    ``zscore`` and the forecast columns stay empty."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "actual", "predicted", "error", "zscore", "flagged", "truth"])
        for d, a, s, f, t in zip(dates, actual, flagset.scores, flagset.flags, truth):
            w.writerow([d.isoformat(), int(a), "", "", repr(float(s)), int(bool(f)), int(bool(t))])


def model_diagnostics(model: ArimaModel, lb_lags: int = 10) -> dict:
    k = model.order.p + model.order.q
    out = {"significance": [vars(t) for t in significance_check(model)]}
    if lb_lags > k and len(model.train_residuals) > lb_lags:
        out["ljung_box"] = ljung_box(model.train_residuals, lb_lags, k).to_dict()
    return out


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n")


def run_pipeline(config: PipelineConfig) -> MetricsReport:
    """Transactions CSV to comparison report, writing every intermediate
    artifact under ``config.output_dir``."""
    if config.input_path is None:
        raise DataError("no input file given")
    transactions = ingest.read_transactions(config.input_path)
    if not transactions:
        raise NoDataError(f"{config.input_path}: no transactions")
    out = Path(config.output_dir)
    for sub in ("counts", "models", "diagnostics"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    series = ingest.aggregate_all(transactions)
    splits = [ingest.split(s, config.split_ratio) for s in series.values()]
    status = [ingest.eligibility(s) for s in splits]
    for s in series.values():
        ingest.write_counts_csv(s, out / "counts" / f"{s.customer_id}.csv")
    ingest.write_eligibility_report(status, out / "eligibility.json")

    eligible = [sp for sp, st in zip(splits, status) if st.eligible]
    if not eligible and not config.inject:
        reasons = "; ".join(f"{st.customer_id}: {st.reason}" for st in status)
        raise NoDataError(f"no eligible series ({reasons})")

    for method in config.methods:
        (out / "detections" / method).mkdir(parents=True, exist_ok=True)
    for sp in eligible:
        cid = sp.customer_id
        if "arima" in config.methods:
            run = arima_detect(sp, config)
            sel = run.selection
            if sel.correlogram is not None:
                write_correlogram_csv(sel.correlogram, out / "diagnostics" / f"{cid}_correlogram.csv")
            diag = sel.to_dict()
            diag.update(model_diagnostics(sel.model, config.ljung_box_lags))
            _write_json(out / "diagnostics" / f"{cid}.json", diag)
            (out / "models" / f"{cid}.json").write_text(sel.model.to_json() + "\n")
            write_detections_csv(out / "detections" / "arima" / f"{cid}.csv", sp.test_dates,
                                 run.forecasts, run.outcomes)
        for method in config.methods:
            if method == "arima":
                continue
            fs = run_baseline_on_split(method, sp, config, config.seed)
            write_baseline_csv(out / "detections" / method / f"{cid}.csv", sp.test_dates, sp.test,
                               fs, sp.test_truth)

    report = evaluate(splits, config)
    (out / "report.json").write_text(report.to_json())
    (out / "report.csv").write_text(report.to_csv())
    return report


def report_from_directory(directory) -> MetricsReport:
    """Rebuild a report from ``<directory>/<method>/<series>.csv`` detection files."""
    directory = Path(directory)
    flag_sets = {}
    for method_dir in sorted(p for p in directory.iterdir() if p.is_dir()):
        per = {}
        for f in sorted(method_dir.glob("*.csv")):
            with open(f, newline="") as fh:
                rows = list(csv.DictReader(fh))
            if not rows or "truth" not in rows[0]:
                raise DataError(f"{f}: missing flagged/truth columns")
            per[f.stem] = ([r["flagged"] == "1" for r in rows], [r["truth"] == "1" for r in rows])
        if per:
            flag_sets[method_dir.name] = per
    if not flag_sets:
        raise NoDataError(f"{directory}: no detection files found")
    order = [m for m in ALL_METHODS if m in flag_sets] + sorted(set(flag_sets) - set(ALL_METHODS))
    return report_from_flags({m: flag_sets[m] for m in order})
