"""Synthetic transaction corpora with known fraud days.

Legitimate daily counts come from a rounded, zero-truncated ARIMA
simulation (or a Poisson process with random bursts, for model-mismatch
studies); fraudulent transactions are added on chosen days.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone
from decimal import Decimal

import numpy as np

from .arima import ArimaModel, ArimaOrder, simulate
from .errors import ConfigError, InvalidModelError
from .ingest import DailyCountSeries, TransactionRecord, train_length

# Series lengths (train + test days) of the nine reference customers.
REFERENCE_LENGTHS = (275, 277, 275, 266, 188, 235, 277, 273, 170)


@dataclass(frozen=True)
class CustomerProfile:
    customer_id: str
    base_model: ArimaModel
    active_days: int
    fraud_days: tuple[tuple[int, int], ...] = ()
    start_date: date = date(2017, 6, 1)
    kind: str = "arima"

    def __post_init__(self):
        object.__setattr__(self, "fraud_days", tuple((int(d), int(c)) for d, c in self.fraud_days))
        if self.active_days < 2:
            raise ConfigError("active_days must be at least 2")
        for day, count in self.fraud_days:
            if not 0 <= day < self.active_days:
                raise ConfigError(f"fraud day {day} outside 0..{self.active_days - 1}")
            if count < 1:
                raise ConfigError("fraud counts must be at least 1")
        if self.kind not in ("arima", "poisson"):
            raise ConfigError(f"unknown generator kind {self.kind!r}")


def _legit_counts(profile: CustomerProfile, rng: np.random.Generator) -> np.ndarray:
    n = profile.active_days
    if profile.kind == "poisson":
        lam = max(profile.base_model.mean, 0.1)
        counts = rng.poisson(lam, n)
        bursts = rng.random(n) < 0.03
        counts[bursts] += rng.poisson(2.0 * lam, bursts.sum())
    else:
        if not (profile.base_model.is_stationary(0.0) and profile.base_model.is_invertible(0.0)):
            raise InvalidModelError(f"{profile.customer_id}: base model is not stationary/invertible")
        seed = int(rng.integers(2**63))
        counts = np.maximum(0, np.rint(simulate(profile.base_model, n, seed))).astype(np.int64)
    # the first and last day must be active so the aggregated span matches
    counts[0] = max(counts[0], 1)
    counts[-1] = max(counts[-1], 1)
    return counts.astype(np.int64)


def simulate_counts(profile: CustomerProfile, seed) -> DailyCountSeries:
    rng = np.random.default_rng(seed)
    legit = _legit_counts(profile, rng)
    fraud = np.zeros_like(legit)
    for day, count in profile.fraud_days:
        fraud[day] += count
    return DailyCountSeries(profile.customer_id, profile.start_date, legit + fraud, fraud)


def _profile_seeds(n: int, seed) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


def generate_counts(profiles, seed) -> list[DailyCountSeries]:
    """Daily count series for every profile, as ``generate_corpus`` would
    produce them before expansion into transactions."""
    profiles = list(profiles)
    seeds = _profile_seeds(len(profiles), seed)
    return [simulate_counts(p, s.spawn(1)[0]) for p, s in zip(profiles, seeds)]


def expand_transactions(series: DailyCountSeries, seed) -> list[TransactionRecord]:
    """Individual transactions with uniform times of day; ``fraud_counts[i]``
    of day ``i``'s transactions, picked at random, are labelled fraud."""
    rng = np.random.default_rng(seed)
    out = []
    for i, (total, fraud) in enumerate(zip(series.total_counts, series.fraud_counts)):
        if total == 0:
            continue
        day = datetime.combine(series.start_date + timedelta(days=i), time(), tzinfo=timezone.utc)
        secs = np.sort(rng.integers(0, 86400, size=int(total)))
        amounts = np.round(rng.lognormal(3.5, 1.0, size=int(total)), 2)
        labels = np.zeros(int(total), dtype=int)
        labels[rng.choice(int(total), size=int(fraud), replace=False)] = 1
        for s, a, lab in zip(secs, amounts, labels):
            out.append(TransactionRecord(series.customer_id, day + timedelta(seconds=int(s)),
                                         Decimal(f"{a:.2f}"), int(lab)))
    return out


def generate_corpus(profiles, seed) -> list[TransactionRecord]:
    """Simulate every profile and expand the counts into transactions."""
    profiles = list(profiles)
    records = []
    for p, s in zip(profiles, _profile_seeds(len(profiles), seed)):
        count_seed, txn_seed = s.spawn(2)
        records.extend(expand_transactions(simulate_counts(p, count_seed), txn_seed))
    return records


def _base_model(rng: np.random.Generator, sigma2: float) -> ArimaModel:
    phi = rng.uniform(0.3, 0.6)
    theta = rng.uniform(0.0, 0.3)
    mean = rng.uniform(3.0, 8.0)
    return ArimaModel(ArimaOrder(1, 0, 1), [phi], [theta], mean * (1.0 - phi), sigma2)


def reference_profiles(seed, n_eligible: int = 9, n_ineligible: int = 15, ratio: float = 0.7,
                       count_range=(1, 8), sigma2: float = 1.0, kind: str = "arima") -> list[CustomerProfile]:
    """Profiles shaped like the nine retained customers plus rejected ones.

    Eligible profiles take the reference lengths and carry fraud bursts of
    ``count_range`` extra transactions only in the test window (one profile
    gets two fraud days). Ineligible ones carry frauds in the training
    window, and a third of them in the test window as well.
    """
    rng = np.random.default_rng(seed)
    lo, hi = count_range
    profiles = []
    for i in range(n_eligible + n_ineligible):
        n = REFERENCE_LENGTHS[i % len(REFERENCE_LENGTHS)] if i < n_eligible else int(rng.integers(170, 280))
        n_train = train_length(n, ratio)
        if i < n_eligible:
            k = 2 if i == 7 else 1
            days = rng.choice(np.arange(n_train, n), size=k, replace=False)
        else:
            days = [int(rng.integers(1, n_train))]
            if (i - n_eligible) % 3 == 2:
                days.append(int(rng.integers(n_train, n)))
        frauds = tuple((int(d), int(rng.integers(lo, hi + 1))) for d in sorted(days))
        start = date(2017, 6, 1) + timedelta(days=int(rng.integers(0, 330)))
        profiles.append(CustomerProfile(f"C{i:02d}", _base_model(rng, sigma2), n, frauds, start, kind))
    return profiles
