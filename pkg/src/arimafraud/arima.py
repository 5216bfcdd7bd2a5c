"""ARIMA(p, d, q) models fitted by conditional maximum likelihood, with
simulation and rolling one-step-ahead forecasting.

The model for the d-times differenced series ``y`` is

    y_t = c + sum_i phi_i y_{t-i} + w_t + sum_j theta_j w_{t-j},  w_t ~ N(0, sigma2)

Estimation maximises the Gaussian likelihood conditional on the first
``p`` observations with pre-sample innovations set to zero (CSS-ML).
AR and MA coefficients are optimised through their partial
autocorrelations so every estimate is stationary and invertible.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import optimize
from scipy.signal import lfilter

from .errors import (
    ConfigError,
    DataError,
    DegenerateSeriesError,
    EstimationError,
    InsufficientDataError,
    InvalidModelError,
)

log = logging.getLogger(__name__)

ROOT_TOL = 1e-9
_PACF_BOUND = 1.0 - 1e-6
_MAX_D = 2


@dataclass(frozen=True)
class ArimaOrder:
    p: int
    d: int
    q: int

    def __post_init__(self):
        for name in ("p", "d", "q"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise ConfigError(f"order {name} must be a non-negative integer, got {v!r}")
        if self.d > _MAX_D:
            raise ConfigError(f"differencing degree above {_MAX_D} is not supported")

    @classmethod
    def parse(cls, text: str) -> "ArimaOrder":
        try:
            p, d, q = (int(v) for v in text.split(","))
        except ValueError as exc:
            raise ConfigError(f"order must look like 'p,d,q', got {text!r}") from exc
        return cls(p, d, q)

    def __str__(self):
        return f"ARIMA({self.p},{self.d},{self.q})"

    def as_tuple(self):
        return (self.p, self.d, self.q)


@dataclass(frozen=True)
class ArimaModel:
    order: ArimaOrder
    phi: np.ndarray
    theta: np.ndarray
    intercept: float
    sigma2: float
    train_residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    loglik: float = float("nan")
    coef_stderr: np.ndarray | None = None
    nobs: int = 0

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float).reshape(-1)
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if len(phi) != self.order.p or len(theta) != self.order.q:
            raise InvalidModelError("coefficient counts do not match the order")
        if not self.sigma2 >= 0.0:
            raise InvalidModelError("sigma2 must be non-negative")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "train_residuals", np.asarray(self.train_residuals, dtype=float))
        if self.coef_stderr is not None:
            object.__setattr__(self, "coef_stderr", np.asarray(self.coef_stderr, dtype=float))

    @property
    def mean(self) -> float:
        """Process mean of the differenced series, c / (1 - sum(phi))."""
        return self.intercept / (1.0 - self.phi.sum())

    @property
    def coef_names(self) -> list[str]:
        return (["const"] + [f"ar.L{i}" for i in range(1, self.order.p + 1)]
                + [f"ma.L{j}" for j in range(1, self.order.q + 1)])

    @property
    def coefs(self) -> np.ndarray:
        return np.concatenate([[self.intercept], self.phi, self.theta])

    @property
    def n_params(self) -> int:
        """Estimated parameters including sigma2."""
        return self.order.p + self.order.q + 2

    @property
    def aic(self) -> float:
        return -2.0 * self.loglik + 2.0 * self.n_params

    @property
    def bic(self) -> float:
        return -2.0 * self.loglik + np.log(max(self.nobs, 1)) * self.n_params

    def is_stationary(self, tol: float = ROOT_TOL) -> bool:
        return roots_outside_unit_circle(self.phi, tol)

    def is_invertible(self, tol: float = ROOT_TOL) -> bool:
        return roots_outside_unit_circle(-self.theta, tol)

    def to_dict(self, residuals: bool = False) -> dict:
        out = {
            "order": list(self.order.as_tuple()),
            "phi": self.phi.tolist(),
            "theta": self.theta.tolist(),
            "intercept": self.intercept,
            "mean": self.mean,
            "sigma2": self.sigma2,
            "loglik": self.loglik,
            "aic": self.aic,
            "nobs": self.nobs,
            "stderr": None if self.coef_stderr is None else dict(zip(self.coef_names, self.coef_stderr.tolist())),
        }
        if residuals:
            out["train_residuals"] = self.train_residuals.tolist()
        return out

    def to_json(self, residuals: bool = False) -> str:
        return json.dumps(self.to_dict(residuals), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "ArimaModel":
        order = ArimaOrder(*data["order"])
        stderr = data.get("stderr")
        if isinstance(stderr, dict):
            names = (["const"] + [f"ar.L{i}" for i in range(1, order.p + 1)]
                     + [f"ma.L{j}" for j in range(1, order.q + 1)])
            stderr = [stderr[n] for n in names]
        return cls(order, data["phi"], data["theta"], float(data["intercept"]), float(data["sigma2"]),
                   data.get("train_residuals", []), float(data.get("loglik", float("nan"))),
                   stderr, int(data.get("nobs", 0)))


@dataclass(frozen=True)
class ForecastPoint:
    day_index: int
    predicted: float
    actual: float
    error: float


@dataclass(frozen=True)
class CoefficientTest:
    name: str
    value: float
    stderr: float | None
    t_ratio: float | None
    significant: bool | None


# -- polynomial helpers ------------------------------------------------------

def roots_outside_unit_circle(coefs, tol: float = ROOT_TOL) -> bool:
    """True iff every root of ``1 - sum_i a_i z^i`` has modulus > 1 + tol."""
    a = np.asarray(coefs, dtype=float)
    if len(a) == 0 or not a.any():
        return True
    # roots of the monic reciprocal polynomial are the inverse roots
    inv = np.roots(np.concatenate([[1.0], -a]))
    return bool(np.all(np.abs(inv) * (1.0 + tol) < 1.0))


def pacf_to_coefs(r) -> np.ndarray:
    """AR coefficients whose partial autocorrelations are ``r``."""
    a = np.zeros(0)
    for rk in np.asarray(r, dtype=float):
        a = np.concatenate([a - rk * a[::-1], [rk]])
    return a


def coefs_to_pacf(a) -> np.ndarray:
    """Inverse of :func:`pacf_to_coefs`; requires a stationary polynomial."""
    a = np.asarray(a, dtype=float).copy()
    r = np.zeros(len(a))
    for k in range(len(a), 0, -1):
        rk = a[-1]
        if abs(rk) >= 1.0:
            raise ValueError("polynomial is not stationary")
        r[k - 1] = rk
        a = (a[:-1] + rk * a[:-1][::-1]) / (1.0 - rk * rk)
    return r


def _constrain(u) -> np.ndarray:
    return pacf_to_coefs(_PACF_BOUND * np.tanh(u))


def _unconstrain(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    k = np.arange(1, len(a) + 1)
    while not roots_outside_unit_circle(a, 1e-3):
        a = a * 0.9**k
    r = coefs_to_pacf(a) / _PACF_BOUND
    return np.arctanh(np.clip(r, -0.999, 0.999))


# -- differencing ------------------------------------------------------------

def difference(x, d: int = 1) -> np.ndarray:
    return np.diff(np.asarray(x, dtype=float), n=d) if d else np.asarray(x, dtype=float)


def integrate(dx, initial) -> np.ndarray:
    """Invert ``d``-fold differencing given the first ``d`` original values."""
    initial = np.atleast_1d(np.asarray(initial, dtype=float))
    d = len(initial)
    if d == 0:
        return np.asarray(dx, dtype=float).copy()
    # heads[k] is the first value of the k-times differenced series
    heads = [initial[0]]
    level = initial.copy()
    for _ in range(1, d):
        level = np.diff(level)
        heads.append(level[0])
    out = np.asarray(dx, dtype=float)
    for k in range(d - 1, -1, -1):
        nxt = np.empty(len(out) + 1)
        nxt[0] = heads[k]
        for i, v in enumerate(out):
            nxt[i + 1] = nxt[i] + v
        out = nxt
    return out


def _integration_base(x: np.ndarray, d: int) -> np.ndarray:
    """x_t - (Delta^d x)_t, i.e. the part of x_t determined by x_{t-1..t-d}.

    Entry ``i`` corresponds to ``x[i + d]``.
    """
    n = len(x)
    base = np.zeros(n - d)
    for k in range(1, d + 1):
        base -= comb(d, k) * (-1) ** k * x[d - k : n - k]
    return base


# -- likelihood ----------------------------------------------------------------

def css_residuals(y, intercept: float, phi, theta) -> np.ndarray:
    """One-step innovations for t >= p with zero pre-sample innovations."""
    y = np.asarray(y, dtype=float)
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    p, n = len(phi), len(y)
    w = y[p:] - intercept
    for i in range(p):
        w = w - phi[i] * y[p - 1 - i : n - 1 - i]
    if len(theta):
        return lfilter([1.0], np.concatenate([[1.0], theta]), w)
    return w


def css_loglik(y, intercept, phi, theta) -> float:
    """Conditional Gaussian log-likelihood with sigma2 concentrated out."""
    e = css_residuals(y, intercept, phi, theta)
    m = len(e)
    sse = float(e @ e)
    if sse <= 0.0:
        return np.inf
    return -0.5 * m * (np.log(2.0 * np.pi * sse / m) + 1.0)


def _hannan_rissanen(y, p: int, q: int):
    """Regression starting values (mean, phi, theta)."""
    n = len(y)
    ybar = y.mean()
    z = y - ybar
    if q == 0:
        if p == 0:
            return ybar, np.zeros(0), np.zeros(0)
        X = np.column_stack([z[p - 1 - i : n - 1 - i] for i in range(p)])
        phi = np.linalg.lstsq(X, z[p:], rcond=None)[0]
        return ybar, phi, np.zeros(0)

    m = min(max(p + q, int(np.ceil(10 * np.log10(n)))), n // 4)
    X = np.column_stack([z[m - 1 - i : n - 1 - i] for i in range(m)])
    a = np.linalg.lstsq(X, z[m:], rcond=None)[0]
    ehat = np.zeros(n)
    ehat[m:] = z[m:] - X @ a
    start = m + max(p, q)
    cols = [z[start - i : n - i] for i in range(1, p + 1)]
    cols += [ehat[start - j : n - j] for j in range(1, q + 1)]
    coef = np.linalg.lstsq(np.column_stack(cols), z[start:], rcond=None)[0]
    return ybar, coef[:p], coef[p:]


def _numerical_hessian(f, x, rel_step: float = 1e-4) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    k = len(x)
    h = rel_step * np.maximum(np.abs(x), 1.0)
    H = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = h[i]
            ej[j] = h[j]
            v = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4.0 * h[i] * h[j])
            H[i, j] = H[j, i] = v
    return H


def _stderr(y, model_coefs, p: int) -> np.ndarray:
    def nll(b):
        return -css_loglik(y, b[0], b[1 : 1 + p], b[1 + p :])

    try:
        H = _numerical_hessian(nll, model_coefs)
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        return np.full(len(model_coefs), np.nan)
    var = np.diag(cov)
    with np.errstate(invalid="ignore"):
        return np.where(var > 0, np.sqrt(np.abs(var)), np.nan)


def fit(series, order, maxiter: int = 500) -> ArimaModel:
    """Fit an ARIMA model by conditional maximum likelihood.

    Parameters
    ----------
    series : array_like
        Observations in time order.
    order : ArimaOrder or tuple
        ``(p, d, q)``.
    maxiter : int
        Iteration cap for the quasi-Newton optimiser.

    Returns
    -------
    ArimaModel
        With in-sample residuals of length ``len(series) - d - p``.
    """
    if not isinstance(order, ArimaOrder):
        order = ArimaOrder(*order)
    p, d, q = order.as_tuple()
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or not np.isfinite(x).all():
        raise DataError("series must be a finite 1-D sequence")
    need = 10 * (p + q + 1) + d
    if len(x) < need:
        raise InsufficientDataError(f"{order} needs at least {need} observations, got {len(x)}")
    y = difference(x, d)
    if np.all(y == y[0]):
        raise DegenerateSeriesError(f"series is constant after {d}-fold differencing")

    if p == 0 and q == 0:
        c = float(y.mean())
        e = y - c
        sigma2 = float(e @ e / len(e))
        loglik = -0.5 * len(e) * (np.log(2.0 * np.pi * sigma2) + 1.0)
        return ArimaModel(order, [], [], c, sigma2, e, loglik, [np.sqrt(sigma2 / len(e))], len(e))

    # optimise on the standardised series; coefficients are scale-free
    loc, scale = y.mean(), y.std()
    ys = (y - loc) / scale

    def unpack(v):
        phi = _constrain(v[1 : 1 + p])
        theta = -_constrain(v[1 + p :])
        return v[0] * (1.0 - phi.sum()), phi, theta

    def objective(v):
        c, phi, theta = unpack(v)
        e = css_residuals(ys, c, phi, theta)
        sse = e @ e
        return 0.5 * len(e) * np.log(sse / len(e)) if sse > 0 else -np.inf

    try:
        mu0, phi0, theta0 = _hannan_rissanen(ys, p, q)
        start = np.concatenate([[mu0], _unconstrain(phi0), _unconstrain(-theta0)])
    except (np.linalg.LinAlgError, ValueError):
        start = np.zeros(1 + p + q)
    null_start = np.zeros(1 + p + q)
    null_start[0] = ys[p:].mean()
    if not objective(start) <= objective(null_start):
        start = null_start

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = optimize.minimize(objective, start, method="BFGS",
                                options={"maxiter": maxiter, "gtol": 1e-6})
    diagnostics = {"status": int(res.status), "message": str(res.message), "nit": int(res.nit),
                   "fun": float(res.fun), "order": order.as_tuple()}
    if not np.isfinite(res.fun) or res.status not in (0, 2):
        raise EstimationError(f"{order}: optimiser did not converge ({res.message})", diagnostics)
    if res.status == 2:
        log.debug("%s: %s", order, res.message)

    c_s, phi, theta = unpack(res.x)
    intercept = float(loc * (1.0 - phi.sum()) + scale * c_s)
    e = css_residuals(y, intercept, phi, theta)
    sigma2 = float(e @ e / len(e))
    if not sigma2 > 0.0:
        raise DegenerateSeriesError("zero residual variance")
    loglik = css_loglik(y, intercept, phi, theta)
    stderr = _stderr(y, np.concatenate([[intercept], phi, theta]), p)
    return ArimaModel(order, phi, theta, intercept, sigma2, e, loglik, stderr, len(e))


# -- simulation and forecasting ----------------------------------------------

def _check_valid(model: ArimaModel) -> None:
    if not model.is_stationary(0.0):
        raise InvalidModelError(f"{model.order}: AR polynomial has roots on or inside the unit circle")
    if not model.is_invertible(0.0):
        raise InvalidModelError(f"{model.order}: MA polynomial has roots on or inside the unit circle")


def simulate(model: ArimaModel, n: int, seed=None, burn_in: int | None = None) -> np.ndarray:
    """Draw ``n`` observations from the model.

    The ARMA part starts at its process mean and the first ``burn_in``
    draws are discarded; with d > 0 the result is integrated from zero.
    """
    _check_valid(model)
    if n < 1:
        raise ConfigError("n must be positive")
    p, d, q = model.order.as_tuple()
    if burn_in is None:
        burn_in = max(200, 10 * (p + q))
    rng = np.random.default_rng(seed)
    total = n + burn_in
    w = rng.normal(0.0, np.sqrt(model.sigma2), size=total)
    b = np.concatenate([[1.0], model.theta])
    a = np.concatenate([[1.0], -model.phi])
    y = model.mean + lfilter(b, a, w)
    y = y[burn_in:]
    if d:
        y = integrate(y, np.zeros(d))[d:]
    return y


def one_step_predictions(model: ArimaModel, history) -> tuple[np.ndarray, np.ndarray]:
    """In-sample one-step predictions over ``history`` with fixed coefficients.

    Returns ``(predicted, error)`` aligned with ``history``; the first
    ``d + p`` entries, which have no full conditioning set, are NaN.
    """
    x = np.asarray(history, dtype=float)
    p, d, _ = model.order.as_tuple()
    y = difference(x, d)
    e = css_residuals(y, model.intercept, model.phi, model.theta)
    yhat = y[p:] - e
    base = _integration_base(x, d)[p:]
    pred = np.full(len(x), np.nan)
    pred[d + p :] = base + yhat
    err = np.full(len(x), np.nan)
    err[d + p :] = x[d + p :] - pred[d + p :]
    return pred, err


def rolling_forecast(model: ArimaModel, train, test, refit_every: int | None = None) -> list[ForecastPoint]:
    """One-step-ahead forecasts for each test day.

    Each prediction conditions on every actual value before it (training
    data plus test days already observed). Coefficients stay fixed unless
    ``refit_every`` is given, in which case the model is re-estimated with
    the same order on all data observed so far every ``refit_every`` days.
    """
    train = np.asarray(train, dtype=float)
    test = np.asarray(test, dtype=float)
    if len(test) == 0:
        raise DataError("test portion is empty")
    _check_valid(model)
    full = np.concatenate([train, test])
    n_train = len(train)
    if n_train < model.order.d + model.order.p:
        raise InsufficientDataError("training history shorter than d + p")

    if not refit_every:
        pred, _ = one_step_predictions(model, full)
        pred = pred[n_train:]
    else:
        if refit_every < 1:
            raise ConfigError("refit_every must be positive")
        pred = np.empty(len(test))
        current = model
        for block in range(0, len(test), refit_every):
            if block:
                try:
                    current = fit(full[: n_train + block], current.order)
                except (EstimationError, DataError) as exc:
                    log.warning("refit at test day %d failed, keeping previous model: %s", block, exc)
            stop = min(block + refit_every, len(test))
            p_all, _ = one_step_predictions(current, full[: n_train + stop])
            pred[block:stop] = p_all[n_train + block : n_train + stop]

    return [ForecastPoint(i, float(pr), float(a), float(a - pr)) for i, (pr, a) in enumerate(zip(pred, test))]


def significance_check(model: ArimaModel, critical: float = 1.96) -> list[CoefficientTest]:
    """t-ratios of every coefficient; ``significant`` is None where no
    standard error is available."""
    out = []
    stderr = model.coef_stderr
    for i, (name, value) in enumerate(zip(model.coef_names, model.coefs)):
        se = None if stderr is None or i >= len(stderr) else float(stderr[i])
        if se is None or not np.isfinite(se) or se <= 0:
            out.append(CoefficientTest(name, float(value), se, None, None))
            continue
        t = float(value / se)
        out.append(CoefficientTest(name, float(value), se, t, abs(t) > critical))
    return out


def arma_coefficients_significant(model: ArimaModel, critical: float = 1.96) -> bool:
    """True when every AR and MA coefficient is significant (vacuous for
    p = q = 0). The intercept is not required to be significant."""
    tests = [t for t in significance_check(model, critical) if t.name != "const"]
    return all(t.significant for t in tests)
