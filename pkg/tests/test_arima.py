import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from arimafraud import arima
from arimafraud.arima import ArimaModel, ArimaOrder
from arimafraud.errors import (ConfigError, DataError, EstimationError, InsufficientDataError,
                               InvalidModelError)
from oracles import ar1_recursion, acf_direct


def model(p=(), q=(), c=0.0, sigma2=1.0, d=0):
    return ArimaModel(ArimaOrder(len(p), d, len(q)), list(p), list(q), c, sigma2)


# -- orders and model ------------------------------------------------------

def test_order_parse_and_validation():
    assert ArimaOrder.parse("1,0,2").as_tuple() == (1, 0, 2)
    assert str(ArimaOrder(1, 0, 2)) == "ARIMA(1,0,2)"
    with pytest.raises(ConfigError):
        ArimaOrder(1, 3, 0)
    with pytest.raises(ConfigError):
        ArimaOrder(-1, 0, 0)
    with pytest.raises(ConfigError):
        ArimaOrder.parse("1,2")


def test_mean_from_intercept():
    m = model(p=[0.5, 0.2], c=3.0)
    assert m.mean == pytest.approx(3.0 / 0.3)


def test_model_json_round_trip():
    m = arima.fit(arima.simulate(model(p=[0.5], q=[0.2], c=1.0), 300, seed=1), (1, 0, 1))
    back = ArimaModel.from_dict(json.loads(m.to_json(residuals=True)))
    assert back.order == m.order
    assert np.array_equal(back.phi, m.phi) and np.array_equal(back.theta, m.theta)
    assert back.intercept == m.intercept and back.sigma2 == m.sigma2
    assert np.array_equal(back.train_residuals, m.train_residuals)
    assert np.array_equal(back.coef_stderr, m.coef_stderr)


def test_coefficient_count_checked():
    with pytest.raises(InvalidModelError):
        ArimaModel(ArimaOrder(2, 0, 0), [0.5], [], 0.0, 1.0)


# -- polynomial helpers ------------------------------------------------------

@given(st.lists(st.floats(-0.99, 0.99), min_size=1, max_size=5))
def test_pacf_parametrisation_round_trip(r):
    a = arima.pacf_to_coefs(np.array(r))
    assert arima.roots_outside_unit_circle(a, tol=0.0)
    assert np.allclose(arima.coefs_to_pacf(a), r, atol=1e-8)


def test_roots_check():
    assert arima.roots_outside_unit_circle([0.5])
    assert not arima.roots_outside_unit_circle([1.0])
    assert not arima.roots_outside_unit_circle([0.5, 0.6])


@given(arrays(np.float64, st.integers(3, 40), elements=st.integers(-1000, 1000).map(float)),
       st.integers(1, 2))
def test_difference_integrate_identity(x, d):
    assert np.array_equal(arima.integrate(arima.difference(x, d), x[:d]), x)


# -- simulation --------------------------------------------------------------

def test_simulate_constant():
    assert np.array_equal(arima.simulate(model(c=5.0, sigma2=0.0), 50, seed=0), np.full(50, 5.0))


def test_simulate_ar1_acf():
    x = arima.simulate(model(p=[0.6]), 10000, seed=2)
    assert abs(acf_direct(x, 1)[0] - 0.6) < 0.03


def test_simulate_ma1_acf():
    x = arima.simulate(model(q=[0.5]), 10000, seed=3)
    assert abs(acf_direct(x, 1)[0] - 0.4) < 0.03


def test_simulate_deterministic_and_validated():
    m = model(p=[0.3], q=[0.3], c=1.0)
    assert np.array_equal(arima.simulate(m, 100, seed=7), arima.simulate(m, 100, seed=7))
    with pytest.raises(InvalidModelError):
        arima.simulate(model(p=[1.2]), 10, seed=0)
    with pytest.raises(InvalidModelError):
        arima.simulate(model(q=[-1.5]), 10, seed=0)


def test_simulate_integrated():
    m = model(c=1.0, sigma2=0.0, d=1)
    assert np.array_equal(arima.simulate(m, 5, seed=0), [1.0, 2.0, 3.0, 4.0, 5.0])


# -- estimation --------------------------------------------------------------

def test_fit_null_model_closed_form():
    x = np.random.default_rng(0).normal(4.0, 2.0, size=300)
    m = arima.fit(x, (0, 0, 0))
    assert m.intercept == pytest.approx(x.mean(), abs=1e-6)
    assert m.sigma2 == pytest.approx(x.var(), abs=1e-6)


def test_fit_ar_matches_ols():
    # with zero pre-sample errors, AR-only conditional ML is least squares
    x = arima.simulate(model(p=[0.5, -0.3], c=2.0), 800, seed=5)
    m = arima.fit(x, (2, 0, 0))
    y = x[2:]
    X = np.column_stack([np.ones(len(y)), x[1:-1], x[:-2]])
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    assert m.intercept == pytest.approx(beta[0], abs=1e-4)
    assert np.allclose(m.phi, beta[1:], atol=1e-4)
    assert m.sigma2 == pytest.approx(resid @ resid / len(y), rel=1e-6)


def test_fit_recovers_ar1():
    x = arima.simulate(model(p=[0.6], c=1.0), 2000, seed=10)
    m = arima.fit(x, (1, 0, 0))
    assert 0.53 <= m.phi[0] <= 0.67
    assert m.coef_stderr[1] == pytest.approx(np.sqrt((1 - 0.36) / 2000), rel=0.15)


def test_fit_recovers_ma1():
    x = arima.simulate(model(q=[-0.4]), 2000, seed=11)
    m = arima.fit(x, (0, 0, 1))
    assert -0.47 <= m.theta[0] <= -0.33


def test_fit_close_to_exact_mle():
    sm = pytest.importorskip("statsmodels.tsa.arima.model")
    x = arima.simulate(model(p=[0.5], q=[0.3], c=2.0), 2000, seed=12)
    ours = arima.fit(x, (1, 0, 1))
    ref = sm.ARIMA(x, order=(1, 0, 1)).fit()
    assert ours.phi[0] == pytest.approx(ref.arparams[0], abs=0.01)
    assert ours.theta[0] == pytest.approx(ref.maparams[0], abs=0.01)
    assert ours.mean == pytest.approx(ref.params[0], abs=0.01)


def test_fit_residual_length_and_constraints():
    x = arima.simulate(model(p=[0.4], q=[0.4], c=1.0), 400, seed=13)
    for order in [(1, 0, 1), (2, 0, 1), (1, 1, 1), (0, 1, 2)]:
        m = arima.fit(x, order)
        p, d, q = order
        assert len(m.train_residuals) == len(x) - d - p
        assert m.is_stationary() and m.is_invertible()
        assert m.sigma2 > 0


def test_fit_loglik_nests_null_model():
    x = arima.simulate(model(p=[0.3], q=[0.2], c=1.0), 500, seed=14)
    for p, d, q in [(1, 0, 1), (2, 0, 0), (0, 0, 2), (1, 1, 1)]:
        m = arima.fit(x, (p, d, q))
        y = arima.difference(x, d)[p:]
        null = arima.fit(y, (0, 0, 0))
        assert m.loglik >= null.loglik - 1e-8


def test_fit_errors():
    with pytest.raises(InsufficientDataError):
        arima.fit(np.arange(15.0), (1, 0, 1))
    with pytest.raises(DataError):
        arima.fit(np.full(100, 2.0), (1, 0, 0))
    with pytest.raises(DataError):
        arima.fit([1.0, np.nan] * 50, (0, 0, 0))


def test_estimation_error_carries_diagnostics():
    err = EstimationError("failed", {"status": 1})
    assert err.diagnostics == {"status": 1} and err.exit_code == 3


# -- forecasting -------------------------------------------------------------

def test_rolling_forecast_null_model():
    m = model(c=4.2)
    fc = arima.rolling_forecast(m, [1.0, 2.0, 3.0], [5.0, 6.0])
    assert [f.predicted for f in fc] == [4.2, 4.2]
    assert [f.error for f in fc] == [5.0 - 4.2, 6.0 - 4.2]


def test_rolling_forecast_ar1_hand_recursion():
    m = model(p=[0.7], c=0.5)
    train, test = [1.0, 3.0], [2.0, 5.0, 4.0]
    fc = arima.rolling_forecast(m, train, test)
    expected = ar1_recursion(train + test, 0.5, 0.7)[len(train) - 1:]
    assert np.allclose([f.predicted for f in fc], expected, atol=1e-10)
    for f in fc:
        assert f.error == f.actual - f.predicted


def test_rolling_forecast_ramp_with_differencing():
    m = model(c=2.0, d=1)
    ramp = 3.0 + 2.0 * np.arange(12)
    fc = arima.rolling_forecast(m, ramp[:8], ramp[8:])
    assert [f.predicted for f in fc] == list(ramp[8:])


def test_rolling_forecast_on_train_reproduces_residuals():
    x = arima.simulate(model(p=[0.5], q=[0.3], c=1.0), 300, seed=15)
    for order in [(1, 0, 1), (0, 0, 2), (1, 1, 1)]:
        m = arima.fit(x, order)
        p, d, _ = order
        fc = arima.rolling_forecast(m, x[: d + p], x[d + p:])
        assert np.allclose([f.error for f in fc], m.train_residuals, atol=1e-10)


def test_rolling_forecast_uses_only_past():
    m = model(p=[0.5], q=[0.4], c=1.0)
    x = arima.simulate(m, 60, seed=16)
    a = arima.rolling_forecast(m, x[:40], x[40:])
    y = x.copy()
    y[50:] += 100.0
    b = arima.rolling_forecast(m, y[:40], y[40:])
    assert [f.predicted for f in a[:11]] == [f.predicted for f in b[:11]]


def test_rolling_forecast_refit():
    x = arima.simulate(model(p=[0.5], c=1.0), 300, seed=17)
    m = arima.fit(x[:200], (1, 0, 0))
    fixed = arima.rolling_forecast(m, x[:200], x[200:])
    refit = arima.rolling_forecast(m, x[:200], x[200:], refit_every=25)
    assert [f.predicted for f in fixed[:25]] == [f.predicted for f in refit[:25]]
    assert fixed[30].predicted != refit[30].predicted


def test_rolling_forecast_empty_test():
    with pytest.raises(DataError):
        arima.rolling_forecast(model(c=1.0), [1.0, 2.0], [])


# -- significance ------------------------------------------------------------

def _with_se(value, se):
    return ArimaModel(ArimaOrder(1, 0, 0), [value], [], 0.0, 1.0, coef_stderr=[1.0, se])


def test_significance_check_cases():
    t = arima.significance_check(_with_se(0.6, 0.02))[1]
    assert t.t_ratio == pytest.approx(30.0) and t.significant
    t = arima.significance_check(_with_se(0.01, 0.05))[1]
    assert t.t_ratio == pytest.approx(0.2) and not t.significant


def test_significance_without_stderr():
    tests = arima.significance_check(model(p=[0.5]))
    assert all(t.significant is None for t in tests)


def test_strong_ar_is_significant():
    x = arima.simulate(model(p=[0.8]), 2000, seed=18)
    assert arima.arma_coefficients_significant(arima.fit(x, (1, 0, 0)))
