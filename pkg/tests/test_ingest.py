import json
import random
from datetime import date, datetime, timedelta, timezone
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, strategies as st

from arimafraud import ingest
from arimafraud.errors import ConfigError, DataError, NoDataError

T0 = datetime(2018, 3, 1, 12, 0, tzinfo=timezone.utc)


def txn(cid, day_offset, label=0, hour=12):
    return ingest.TransactionRecord(cid, T0.replace(hour=hour) + timedelta(days=day_offset), Decimal("10.00"), label)


@pytest.mark.parametrize("n, train, test", [(275, 192, 83), (277, 193, 84), (266, 186, 80),
                                            (188, 131, 57), (235, 164, 71), (273, 191, 82), (170, 119, 51)])
def test_split_lengths(n, train, test):
    s = ingest.DailyCountSeries("x", date(2018, 1, 1), np.ones(n), np.zeros(n))
    sp = ingest.split(s, 0.7)
    assert (sp.train_len, sp.test_len) == (train, test)


def test_train_length_avoids_float_rounding():
    assert int(0.7 * 170) == 118
    assert ingest.train_length(170, 0.7) == 119


@pytest.mark.parametrize("ratio", [0.0, 1.0, -0.1, 1.5])
def test_split_rejects_bad_ratio(ratio):
    s = ingest.DailyCountSeries("x", date(2018, 1, 1), [1, 2, 3], [0, 0, 0])
    with pytest.raises(ConfigError):
        ingest.split(s, ratio)


def test_aggregate_zero_fills_gaps():
    records = [txn("a", 0), txn("a", 0, hour=3), txn("a", 3, label=1), txn("b", 1)]
    s = ingest.aggregate(records, "a")
    assert s.start_date == T0.date()
    assert list(s.total_counts) == [2, 0, 0, 1]
    assert list(s.fraud_counts) == [0, 0, 0, 1]


def test_aggregate_uses_utc_day():
    local = datetime(2018, 3, 1, 23, 30, tzinfo=timezone(timedelta(hours=-5)))
    r = ingest.TransactionRecord("a", local, Decimal(1), 0)
    assert r.day == date(2018, 3, 2)


def test_aggregate_missing_customer():
    with pytest.raises(NoDataError):
        ingest.aggregate([txn("a", 0)], "zzz")
    with pytest.raises(NoDataError):
        ingest.aggregate_all([])


def test_bad_label_rejected():
    with pytest.raises(DataError):
        ingest.TransactionRecord("a", T0, Decimal(1), 2)


records_strategy = st.lists(
    st.tuples(st.sampled_from("abc"), st.integers(0, 30), st.booleans(), st.integers(0, 23)),
    min_size=1, max_size=60,
)


@given(records_strategy, st.randoms(use_true_random=False))
def test_aggregation_permutation_invariant(rows, rnd):
    records = [txn(c, d, int(f), h) for c, d, f, h in rows]
    shuffled = records[:]
    rnd.shuffle(shuffled)
    a, b = ingest.aggregate_all(records), ingest.aggregate_all(shuffled)
    assert a.keys() == b.keys()
    for cid in a:
        assert a[cid].start_date == b[cid].start_date
        assert np.array_equal(a[cid].total_counts, b[cid].total_counts)
        assert np.array_equal(a[cid].fraud_counts, b[cid].fraud_counts)


@given(records_strategy)
def test_total_counts_sum_to_transactions(rows):
    records = [txn(c, d, int(f), h) for c, d, f, h in rows]
    for cid, s in ingest.aggregate_all(records).items():
        mine = [r for r in records if r.customer_id == cid]
        assert s.total_counts.sum() == len(mine)
        assert s.fraud_counts.sum() == sum(r.label for r in mine)


@given(st.lists(st.integers(0, 20), min_size=2, max_size=300), st.floats(0.05, 0.95))
def test_split_is_partition(counts, ratio):
    s = ingest.DailyCountSeries("x", date(2018, 1, 1), counts, [0] * len(counts))
    sp = ingest.split(s, ratio)
    assert np.array_equal(np.concatenate([sp.train, sp.test]), s.total_counts)
    if sp.test_len:
        assert sp.test_dates[0] == s.start_date + timedelta(days=sp.train_len)


def _series(fraud):
    n = len(fraud)
    return ingest.DailyCountSeries("s", date(2018, 1, 1), [5] * n, fraud)


def test_eligibility_rules():
    fraud = [0] * 10
    assert ingest.eligibility(ingest.split(_series(fraud), 0.7)).reason == "no fraud in test"
    fraud[8] = 1
    assert ingest.eligibility(ingest.split(_series(fraud), 0.7)).eligible
    fraud[2] = 1
    res = ingest.eligibility(ingest.split(_series(fraud), 0.7))
    assert not res.eligible and res.reason == "fraud in train"
    assert (res.train_frauds, res.test_frauds) == (1, 1)


def test_filter_rejects_exactly_the_constructed_fifteen():
    rng = random.Random(5)
    series, expected = [], set()
    for i in range(24):
        fraud = [0] * 100
        if i < 9:
            fraud[rng.randrange(70, 100)] = 1
        else:
            expected.add(f"s{i}")
            # odd: fraud in train (half of them also in test); even: no fraud at all
            if i % 2:
                fraud[rng.randrange(0, 70)] = 1
                if i % 3 == 0:
                    fraud[rng.randrange(70, 100)] = 2
        series.append(ingest.DailyCountSeries(f"s{i}", date(2018, 1, 1), [5] * 100, fraud))
    rejected = {s.customer_id for s in series if not ingest.eligibility(ingest.split(s, 0.7)).eligible}
    assert rejected == expected


def test_fraud_fraction_fixture():
    records = [txn("a", i % 50, int(i < 87)) for i in range(11471)]
    assert round(100 * ingest.fraud_fraction(records), 2) == 0.76


def test_csv_round_trips(tmp_path):
    records = [txn("a", 0), txn("a", 2, 1), txn("b", 0)]
    path = tmp_path / "t.csv"
    ingest.write_transactions(records, path)
    assert ingest.read_transactions(path) == records

    s = ingest.aggregate(records, "a")
    ingest.write_counts_csv(s, tmp_path / "a.csv")
    back = ingest.read_counts_csv(tmp_path / "a.csv")
    assert back.customer_id == "a" and back.start_date == s.start_date
    assert np.array_equal(back.total_counts, s.total_counts)
    assert np.array_equal(back.fraud_counts, s.fraud_counts)


def test_read_transactions_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(NoDataError):
        ingest.read_transactions(empty)
    bad = tmp_path / "bad.csv"
    bad.write_text("customer_id,timestamp\na,2018-01-01\n")
    with pytest.raises(DataError):
        ingest.read_transactions(bad)
    ts = tmp_path / "ts.csv"
    ts.write_text("customer_id,timestamp,amount,label\na,yesterday,1,0\n")
    with pytest.raises(DataError):
        ingest.read_transactions(ts)


def test_zulu_timestamps():
    assert ingest.parse_timestamp("2018-01-01T10:00:00Z") == datetime(2018, 1, 1, 10, tzinfo=timezone.utc)


def test_eligibility_report_json(tmp_path):
    results = [ingest.Eligibility("a", True), ingest.Eligibility("b", False, "fraud in train", 2, 0)]
    ingest.write_eligibility_report(results, tmp_path / "e.json")
    data = json.loads((tmp_path / "e.json").read_text())
    assert data["eligible"] == ["a"]
    assert data["rejected"][0]["reason"] == "fraud in train"


def test_series_arrays_are_read_only():
    s = ingest.DailyCountSeries("x", date(2018, 1, 1), [1, 2], [0, 1])
    with pytest.raises(ValueError):
        s.total_counts[0] = 9


def test_series_validation():
    with pytest.raises(DataError):
        ingest.DailyCountSeries("x", date(2018, 1, 1), [1, 2], [0, 3])
    with pytest.raises(NoDataError):
        ingest.DailyCountSeries("x", date(2018, 1, 1), [], [])
