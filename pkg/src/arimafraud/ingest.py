"""Transaction parsing, daily-count aggregation, chronological split and
series eligibility."""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigError, DataError, NoDataError

TRANSACTION_FIELDS = ("customer_id", "timestamp", "amount", "label")


@dataclass(frozen=True)
class TransactionRecord:
    customer_id: str
    timestamp: datetime
    amount: Decimal
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label!r}")
        if self.timestamp.tzinfo is None:
            object.__setattr__(self, "timestamp", self.timestamp.replace(tzinfo=timezone.utc))
        else:
            object.__setattr__(self, "timestamp", self.timestamp.astimezone(timezone.utc))

    @property
    def day(self) -> date:
        return self.timestamp.date()


def _frozen(values, dtype=np.int64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DailyCountSeries:
    """Calendar-indexed daily transaction counts for one customer.

    Day ``i`` is ``start_date + i`` days; days without activity hold 0.
    """

    customer_id: str
    start_date: date
    total_counts: np.ndarray
    fraud_counts: np.ndarray

    def __post_init__(self):
        total = _frozen(self.total_counts)
        fraud = _frozen(self.fraud_counts)
        if total.ndim != 1 or total.shape != fraud.shape:
            raise DataError("total_counts and fraud_counts must be 1-D and equally long")
        if len(total) == 0:
            raise NoDataError(f"series {self.customer_id!r} is empty")
        if (total < 0).any() or (fraud < 0).any():
            raise DataError("counts must be non-negative")
        if (fraud > total).any():
            raise DataError("fraud_counts exceed total_counts")
        object.__setattr__(self, "total_counts", total)
        object.__setattr__(self, "fraud_counts", fraud)

    def __len__(self):
        return len(self.total_counts)

    @property
    def dates(self) -> list[date]:
        return [self.start_date + timedelta(days=i) for i in range(len(self))]

    @property
    def fraud_days(self) -> np.ndarray:
        return self.fraud_counts > 0

    def replace_counts(self, total_counts, fraud_counts) -> "DailyCountSeries":
        return DailyCountSeries(self.customer_id, self.start_date, total_counts, fraud_counts)


@dataclass(frozen=True)
class SplitSeries:
    series: DailyCountSeries
    train_len: int
    test_len: int
    ratio: float

    def __post_init__(self):
        if self.train_len + self.test_len != len(self.series):
            raise DataError("train_len + test_len must equal the series length")

    @property
    def customer_id(self) -> str:
        return self.series.customer_id

    @property
    def train(self) -> np.ndarray:
        return self.series.total_counts[: self.train_len]

    @property
    def test(self) -> np.ndarray:
        return self.series.total_counts[self.train_len :]

    @property
    def train_fraud(self) -> np.ndarray:
        return self.series.fraud_counts[: self.train_len]

    @property
    def test_fraud(self) -> np.ndarray:
        return self.series.fraud_counts[self.train_len :]

    @property
    def test_truth(self) -> np.ndarray:
        """Boolean fraud-day indicator over the test days."""
        return self.test_fraud > 0

    @property
    def test_dates(self) -> list[date]:
        return self.series.dates[self.train_len :]

    def with_series(self, series: DailyCountSeries) -> "SplitSeries":
        return SplitSeries(series, self.train_len, self.test_len, self.ratio)


@dataclass(frozen=True)
class Eligibility:
    customer_id: str
    eligible: bool
    reason: str | None = None
    train_frauds: int = 0
    test_frauds: int = 0


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        return datetime.fromisoformat(text)
    except ValueError as exc:
        raise DataError(f"invalid timestamp {text!r}") from exc


def read_transactions(path) -> list[TransactionRecord]:
    """Read a ``customer_id,timestamp,amount,label`` CSV."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(TRANSACTION_FIELDS) - set(reader.fieldnames or ())
        if reader.fieldnames is None:
            raise NoDataError(f"{path}: empty file")
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                amount = Decimal(row["amount"]) if row["amount"] else Decimal(0)
                label = int(row["label"])
            except (InvalidOperation, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            records.append(
                TransactionRecord(row["customer_id"], parse_timestamp(row["timestamp"]), amount, label)
            )
    return records


def write_transactions(records: Iterable[TransactionRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRANSACTION_FIELDS)
        for r in records:
            writer.writerow([r.customer_id, r.timestamp.isoformat(), str(r.amount), r.label])


def customer_ids(transactions: Iterable[TransactionRecord]) -> list[str]:
    return sorted({t.customer_id for t in transactions})


def aggregate(transactions: Iterable[TransactionRecord], customer_id: str) -> DailyCountSeries:
    """Daily total and fraud counts for one customer, zero-filled between
    the first and last transaction day."""
    per_day_total: dict[date, int] = defaultdict(int)
    per_day_fraud: dict[date, int] = defaultdict(int)
    for t in transactions:
        if t.customer_id != customer_id:
            continue
        per_day_total[t.day] += 1
        per_day_fraud[t.day] += t.label
    if not per_day_total:
        raise NoDataError(f"no transactions for customer {customer_id!r}")

    first, last = min(per_day_total), max(per_day_total)
    n = (last - first).days + 1
    total = np.zeros(n, dtype=np.int64)
    fraud = np.zeros(n, dtype=np.int64)
    for day, count in per_day_total.items():
        i = (day - first).days
        total[i] = count
        fraud[i] = per_day_fraud[day]
    return DailyCountSeries(customer_id, first, total, fraud)


def aggregate_all(transactions: Iterable[TransactionRecord]) -> dict[str, DailyCountSeries]:
    transactions = list(transactions)
    if not transactions:
        raise NoDataError("no transactions")
    return {cid: aggregate(transactions, cid) for cid in customer_ids(transactions)}


def fraud_fraction(transactions: Iterable[TransactionRecord]) -> float:
    labels = [t.label for t in transactions]
    if not labels:
        raise NoDataError("no transactions")
    return sum(labels) / len(labels)


def train_length(n: int, ratio: float) -> int:
    # Exact decimal arithmetic: float 0.7 * 170 floors to 118, not 119.
    return math.floor(Fraction(repr(float(ratio))) * n)


def split(series: DailyCountSeries, ratio: float = 0.7) -> SplitSeries:
    """Chronological train/test split; the first ``floor(ratio * n)`` days
    form the training set."""
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must lie in (0, 1), got {ratio}")
    n = len(series)
    n_train = train_length(n, ratio)
    return SplitSeries(series, n_train, n - n_train, float(ratio))


def eligibility(split_series: SplitSeries) -> Eligibility:
    train_frauds = int(split_series.train_fraud.sum())
    test_frauds = int(split_series.test_fraud.sum())
    reason = None
    if train_frauds > 0:
        reason = "fraud in train"
    elif test_frauds == 0:
        reason = "no fraud in test"
    return Eligibility(split_series.customer_id, reason is None, reason, train_frauds, test_frauds)


def write_counts_csv(series: DailyCountSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "total", "fraud"])
        for d, tot, fr in zip(series.dates, series.total_counts, series.fraud_counts):
            writer.writerow([d.isoformat(), int(tot), int(fr)])


def read_counts_csv(path, customer_id: str | None = None) -> DailyCountSeries:
    """Read a ``date,total,fraud`` CSV written by :func:`write_counts_csv`.

    The ``fraud`` column is optional; dates must be consecutive.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise NoDataError(f"{path}: no rows")
    dates = [date.fromisoformat(r["date"]) for r in rows]
    for a, b in zip(dates, dates[1:]):
        if (b - a).days != 1:
            raise DataError(f"{path}: dates are not consecutive at {b}")
    total = [int(r["total"]) for r in rows]
    fraud = [int(r.get("fraud") or 0) for r in rows]
    return DailyCountSeries(customer_id or path.stem, dates[0], total, fraud)


def eligibility_report(results: Iterable[Eligibility]) -> dict:
    results = list(results)
    return {
        "eligible": [r.customer_id for r in results if r.eligible],
        "rejected": [
            {"customer_id": r.customer_id, "reason": r.reason,
             "train_frauds": r.train_frauds, "test_frauds": r.test_frauds}
            for r in results if not r.eligible
        ],
    }


def write_eligibility_report(results: Iterable[Eligibility], path) -> None:
    Path(path).write_text(json.dumps(eligibility_report(results), indent=2) + "\n")
