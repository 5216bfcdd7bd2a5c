import json
from datetime import date

import numpy as np
import pytest
from hypothesis import given, strategies as st

from arimafraud import evaluation as ev
from arimafraud import ingest
from arimafraud.errors import ConfigError, DegenerateSeriesError, ShapeError
from oracles import confusion_loop

bools = st.lists(st.booleans(), min_size=1, max_size=40)


def split_of(total, fraud, ratio=0.7, cid="s"):
    return ingest.split(ingest.DailyCountSeries(cid, date(2018, 1, 1), total, fraud), ratio)


def test_confusion_examples():
    c = ev.confusion([True, False, True], [True, False, True])
    assert c.fp == 0 and c.fn == 0
    truth = [False] * 10
    truth[2] = truth[7] = True
    c = ev.confusion([False] * 10, truth)
    assert (c.fn, c.tn) == (2, 8)
    with pytest.raises(ShapeError):
        ev.confusion([True], [True, False])


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=20, max_size=20))
def test_confusion_matches_loop(pairs):
    f, t = zip(*pairs)
    c = ev.confusion(f, t)
    assert (c.tp, c.fp, c.fn, c.tn) == confusion_loop(f, t)
    assert c.total == 20


def test_metric_examples():
    m = ev.metrics(ev.ConfusionCounts(1, 1, 0, 5))
    assert (m.precision, m.recall) == (0.5, 1.0)
    assert m.f_measure == pytest.approx(2 / 3)
    assert ev.metrics(ev.ConfusionCounts(0, 0, 2, 5)).precision is None
    assert ev.metrics(ev.ConfusionCounts(0, 3, 0, 5)).recall is None
    assert ev.metrics(ev.ConfusionCounts(0, 1, 1, 5)).f_measure is None


def test_f_of_means_is_not_mean_of_f():
    assert round(ev.f_measure(0.5, 0.6667), 4) == 0.5714
    per_series = [ev.Metrics(0.5, 1.0, ev.f_measure(0.5, 1.0)), ev.Metrics(0.5, 1 / 3, ev.f_measure(0.5, 1 / 3))]
    agg = ev.average_metrics(per_series)
    assert agg.precision == 0.5 and agg.recall == pytest.approx(2 / 3)
    assert agg.f_measure == pytest.approx((2 / 3 + 0.4) / 2)
    assert agg.f_measure != pytest.approx(ev.f_measure(agg.precision, agg.recall), abs=1e-3)


@given(bools.flatmap(lambda f: st.tuples(st.just(f), st.lists(st.booleans(), min_size=len(f), max_size=len(f)))))
def test_swap_symmetry(ft):
    f, t = ft
    a = ev.metrics(ev.confusion(f, t))
    b = ev.metrics(ev.confusion(t, f))
    assert a.precision == b.recall and a.recall == b.precision


@given(st.floats(1e-6, 1), st.floats(1e-6, 1))
def test_f_measure_bounds(p, r):
    f = ev.f_measure(p, r)
    assert f <= min(2 * p, 2 * r) + 1e-12
    assert f <= max(p, r) + 1e-12
    assert f >= min(p, r) - 1e-12


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=10))
def test_average_equals_mean_when_defined(rows):
    agg = ev.average_metrics([ev.Metrics(*r) for r in rows])
    for i, key in enumerate(ev.METRICS):
        assert getattr(agg, key) == pytest.approx(np.mean([r[i] for r in rows]))


def test_average_skips_undefined():
    agg = ev.average_metrics([ev.Metrics(None, 0.5, None), ev.Metrics(0.4, 1.0, 0.6)])
    assert agg.as_dict() == {"precision": 0.4, "recall": 0.75, "f_measure": 0.6}
    assert ev.average_metrics([ev.Metrics(None, None, None)]).precision is None


def test_injection_spec_validation():
    with pytest.raises(ConfigError):
        ev.InjectionSpec(count_range=(0, 8))
    with pytest.raises(ConfigError):
        ev.InjectionSpec(repetitions=0)
    assert ev.InjectionSpec(seed=42).rep_seed(3) == 42 ^ 3


def test_injection_deterministic_and_conservative():
    sp = split_of([5] * 50, [0] * 50)
    spec = ev.InjectionSpec(seed=9)
    a, b = ev.draw_injection(sp.test_len, spec, 4), ev.draw_injection(sp.test_len, spec, 4)
    assert a == b
    out = ev.inject_frauds(sp, spec, 4)
    assert out.series.total_counts.sum() - sp.series.total_counts.sum() == a.count
    assert out.test_fraud[a.day_index] == a.count
    assert np.array_equal(out.train, sp.train)


@given(st.integers(0, 2**32 - 1), st.integers(0, 1000), st.integers(2, 200))
def test_injection_never_touches_train(seed, rep, n):
    sp = split_of([3] * n, [0] * n)
    if sp.test_len == 0:
        return
    out = ev.inject_frauds(sp, ev.InjectionSpec(seed=seed), rep)
    assert np.array_equal(out.train, sp.train) and np.array_equal(out.train_fraud, sp.train_fraud)
    assert 1 <= out.test.sum() - sp.test.sum() <= 8


def test_injection_uniformity():
    spec = ev.InjectionSpec(seed=2024)
    counts = np.bincount([ev.draw_injection(50, spec, r).count for r in range(10000)], minlength=9)[1:]
    assert np.all(np.abs(counts / 10000 - 0.125) <= 0.01)


def test_strip_train_frauds():
    sp = split_of([5] * 10, [1] + [0] * 9)
    out = ev.strip_train_frauds(sp)
    assert out.series.total_counts[0] == 4 and out.train_fraud.sum() == 0


def _oracle(split_series, seed):
    return split_series.test_truth


def test_run_experiment_perfect_detector():
    sp = split_of([5] * 20, [0] * 18 + [1, 0])
    rep = ev.run_experiment([sp], {"oracle": _oracle})
    assert rep.aggregate["oracle"].as_dict() == {"precision": 1.0, "recall": 1.0, "f_measure": 1.0}


def test_run_experiment_injects_ineligible_series():
    eligible = split_of([5] * 20, [0] * 18 + [1, 0], cid="a")
    rejected = split_of([5] * 20, [1] + [0] * 19, cid="b")
    calls = []

    def detector(s, seed):
        calls.append(s.customer_id)
        return s.test_truth

    rep = ev.run_experiment([eligible, rejected], {"d": detector}, ev.InjectionSpec(repetitions=7, seed=1))
    assert calls.count("a") == 1 and calls.count("b") == 7
    assert set(rep.per_series["d"]) == {"a", "b"}
    skipped = ev.run_experiment([eligible, rejected], {"d": detector})
    assert set(skipped.per_series["d"]) == {"a"}


def test_run_experiment_records_failures():
    sp = split_of([5] * 20, [0] * 18 + [1, 0])

    def broken(s, seed):
        raise DegenerateSeriesError("nope")

    with pytest.warns(UserWarning):
        rep = ev.run_experiment([sp], {"broken": broken, "ok": _oracle})
    assert "s" in rep.failures["broken"] and rep.per_series["broken"] == {}
    assert rep.aggregate["ok"].f_measure == 1.0


def test_two_series_mean():
    rep = ev.report_from_flags({"m": {
        "x": ([True, True, False, False, False], [True, False, True, True, False]),
        "y": ([True, False], [True, True]),
    }})
    fx, fy = rep.per_series["m"]["x"].f_measure, rep.per_series["m"]["y"].f_measure
    assert rep.aggregate["m"].f_measure == pytest.approx((fx + fy) / 2)


def test_report_layout():
    rep = ev.report_from_flags({m: {"x": ([True, False], [True, False])} for m in
                                ("arima", "boxplot", "lof", "iforest", "kmeans")})
    lines = rep.to_csv().splitlines()
    assert lines[0] == "METRICS,ARIMA,BOXPLOT,LOF,IFOREST,KMEANS"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["Precision", "Recall", "F-Measure"]
    assert lines[1].split(",")[1] == "100.00%"
    data = json.loads(rep.to_json())
    assert list(data["aggregate"]) == ["arima", "boxplot", "lof", "iforest", "kmeans"]
