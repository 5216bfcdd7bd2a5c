"""Fraud detection on daily transaction counts with ARIMA forecasts and
Z-score flagging, plus distribution-based baselines."""

from .arima import ArimaModel, ArimaOrder, fit, rolling_forecast, simulate
from .detector import DetectorConfig, detect
from .errors import (ArimaFraudError, ConfigError, DataError, EstimationError,
                     InvalidModelError)
from .ingest import DailyCountSeries, TransactionRecord, aggregate, split

__version__ = "0.1.0"

__all__ = [
    "ArimaFraudError", "ArimaModel", "ArimaOrder", "ConfigError", "DailyCountSeries", "DataError",
    "DetectorConfig", "EstimationError", "InvalidModelError", "TransactionRecord", "aggregate",
    "detect", "fit", "rolling_forecast", "simulate", "split",
]
