"""Box-Jenkins identification tools: ADF unit-root test, sample ACF/PACF,
Ljung-Box whiteness test and a correlogram-based order heuristic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ConfigError, DataError, DegenerateSeriesError, InsufficientDataError

# MacKinnon (1994) response-surface coefficients for the asymptotic
# distribution of the Dickey-Fuller tau statistic, one integrated regressor.
# Keys: "n" no deterministic terms, "c" constant, "ct" constant + trend.
_TAU_MAX = {"n": np.inf, "c": 2.74, "ct": 0.7}
_TAU_MIN = {"n": -19.04, "c": -18.83, "ct": -16.18}
_TAU_STAR = {"n": -1.04, "c": -1.61, "ct": -2.89}
_TAU_SMALLP = {
    "n": (0.6344, 1.2378, 3.2496e-2),
    "c": (2.1659, 1.4412, 3.8269e-2),
    "ct": (3.2512, 1.6047, 4.9588e-2),
}
_TAU_LARGEP = {
    "n": (0.4797, 9.3557e-1, -0.6999e-1, 3.3066e-2),
    "c": (1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2),
    "ct": (2.5261, 6.1654e-1, -3.7956e-1, -6.0285e-2),
}


@dataclass(frozen=True)
class AdfResult:
    t_statistic: float
    p_value: float
    lags_used: int
    nobs: int
    stationary: bool
    significance: float
    regression: str

    def to_dict(self) -> dict:
        return {
            "t_statistic": self.t_statistic,
            "p_value": self.p_value,
            "lags_used": self.lags_used,
            "nobs": self.nobs,
            "stationary": self.stationary,
            "significance": self.significance,
            "regression": self.regression,
        }


@dataclass(frozen=True)
class Correlogram:
    acf: np.ndarray
    pacf: np.ndarray
    confidence_band: float
    n: int

    @property
    def max_lag(self) -> int:
        return len(self.acf)

    def rows(self):
        """(lag, acf, pacf, band) tuples, lag starting at 1."""
        for k, (a, p) in enumerate(zip(self.acf, self.pacf), start=1):
            yield k, float(a), float(p), self.confidence_band


@dataclass(frozen=True)
class LjungBoxResult:
    q_statistic: float
    p_value: float
    lags: int
    dof: int

    def to_dict(self) -> dict:
        return {"q_statistic": self.q_statistic, "p_value": self.p_value,
                "lags": self.lags, "dof": self.dof}


def _as_series(series) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise DataError("expected a 1-D series")
    if not np.isfinite(x).all():
        raise DataError("series contains non-finite values")
    return x


def _check_not_constant(x: np.ndarray) -> None:
    if len(x) == 0 or np.all(x == x[0]):
        raise DegenerateSeriesError("series is constant")


def mackinnon_pvalue(tau: float, regression: str = "c") -> float:
    """Asymptotic p-value of a Dickey-Fuller tau statistic."""
    if regression not in _TAU_STAR:
        raise ConfigError(f"unknown regression {regression!r}")
    if tau > _TAU_MAX[regression]:
        return 1.0
    if tau < _TAU_MIN[regression]:
        return 0.0
    if tau <= _TAU_STAR[regression]:
        coef = _TAU_SMALLP[regression]
    else:
        coef = _TAU_LARGEP[regression]
    return float(stats.norm.cdf(np.polyval(coef[::-1], tau)))


def default_adf_maxlag(n: int) -> int:
    return int(np.floor(12.0 * (n / 100.0) ** 0.25))


def _adf_design(x: np.ndarray, lags: int, start: int, regression: str):
    """Regress dx_t on x_{t-1}, dx_{t-1..t-lags} and deterministic terms,
    for t in [start, n). ``start`` must be >= lags + 1."""
    dx = np.diff(x)
    # row for x index t uses dx[t-1] as the response
    t = np.arange(start, len(x))
    cols = [x[t - 1]]
    for i in range(1, lags + 1):
        cols.append(dx[t - 1 - i])
    if regression in ("c", "ct"):
        cols.append(np.ones(len(t)))
    if regression == "ct":
        cols.append(t.astype(float))
    return dx[t - 1], np.column_stack(cols)


def _ols(y, X):
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise DegenerateSeriesError("ADF regression is rank deficient")
    resid = y - X @ beta
    return beta, float(resid @ resid)


def adf_test(series, max_lag: int | None = None, significance: float = 0.05,
             regression: str = "c", autolag: bool = True) -> AdfResult:
    """Augmented Dickey-Fuller test with MacKinnon p-values.

    With ``autolag`` the number of lagged differences is chosen by AIC over
    ``0..max_lag`` on a common estimation sample, then the chosen regression
    is re-estimated on all available observations. Without it exactly
    ``max_lag`` lags are used.
    """
    x = _as_series(series)
    if regression not in _TAU_STAR:
        raise ConfigError(f"regression must be one of {sorted(_TAU_STAR)}")
    if not 0.0 < significance < 1.0:
        raise ConfigError("significance must lie in (0, 1)")
    n = len(x)
    if max_lag is None:
        max_lag = default_adf_maxlag(n)
    if max_lag < 0:
        raise ConfigError("max_lag must be non-negative")
    if n < 20 + max_lag:
        raise InsufficientDataError(f"ADF needs at least {20 + max_lag} observations, got {n}")
    _check_not_constant(x)

    if autolag:
        best_aic, lags = np.inf, 0
        for k in range(max_lag + 1):
            y, X = _adf_design(x, k, max_lag + 1, regression)
            try:
                _, ssr = _ols(y, X)
            except DegenerateSeriesError:
                # e.g. a constant stretch covering the common sample
                continue
            nobs = len(y)
            if ssr <= 0.0:
                continue
            aic = nobs * np.log(ssr / nobs) + 2.0 * X.shape[1]
            if aic < best_aic:
                best_aic, lags = aic, k
    else:
        lags = max_lag

    y, X = _adf_design(x, lags, lags + 1, regression)
    beta, ssr = _ols(y, X)
    nobs, k = X.shape
    s2 = ssr / (nobs - k)
    cov = s2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(cov[0, 0])
    tau = float(beta[0] / se) if se > 0 else -np.inf
    p = mackinnon_pvalue(tau, regression)
    return AdfResult(tau, p, lags, nobs, p < significance, significance, regression)


def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags ``1..max_lag`` (biased denominator)."""
    x = _as_series(series)
    n = len(x)
    if not 1 <= max_lag < n:
        raise ConfigError(f"max_lag must lie in [1, {n - 1}], got {max_lag}")
    _check_not_constant(x)
    z = x - x.mean()
    denom = z @ z
    return np.array([z[: n - k] @ z[k:] / denom for k in range(1, max_lag + 1)])


def durbin_levinson(rho) -> np.ndarray:
    """Partial autocorrelations from autocorrelations ``rho[1..L]``."""
    rho = np.asarray(rho, dtype=float)
    L = len(rho)
    out = np.empty(L)
    phi = np.zeros(0)
    v = 1.0
    for k in range(1, L + 1):
        num = rho[k - 1] - phi @ rho[: k - 1][::-1]
        a = num / v if v > 0 else 0.0
        phi = np.concatenate([phi - a * phi[::-1], [a]])
        v *= 1.0 - a * a
        out[k - 1] = a
    return out


def pacf(series, max_lag: int) -> np.ndarray:
    """Partial autocorrelations at lags ``1..max_lag`` via Durbin-Levinson."""
    x = _as_series(series)
    if not 1 <= max_lag < len(x) / 2:
        raise ConfigError(f"max_lag must lie in [1, n/2), got {max_lag} for n={len(x)}")
    return durbin_levinson(acf(x, max_lag))


def confidence_band(n: int) -> float:
    return 1.96 / np.sqrt(n)


def correlogram(series, max_lag: int | None = None) -> Correlogram:
    x = _as_series(series)
    n = len(x)
    if max_lag is None:
        max_lag = min(20, (n - 1) // 2)
    r = acf(x, max_lag)
    return Correlogram(r, pacf(x, max_lag), confidence_band(n), n)


def ljung_box(residuals, lags: int = 10, fitted_params: int = 0) -> LjungBoxResult:
    """Ljung-Box portmanteau test on ``lags`` autocorrelations with
    ``lags - fitted_params`` degrees of freedom."""
    if lags <= fitted_params:
        raise ConfigError(f"lags ({lags}) must exceed fitted_params ({fitted_params})")
    x = _as_series(residuals)
    n = len(x)
    if n <= lags:
        raise InsufficientDataError(f"Ljung-Box needs more than {lags} residuals, got {n}")
    r = acf(x, lags)
    k = np.arange(1, lags + 1)
    q = float(n * (n + 2) * np.sum(r**2 / (n - k)))
    dof = lags - fitted_params
    return LjungBoxResult(q, float(stats.chi2.sf(q, dof)), lags, dof)


def cutoff_lag(values, band: float, run: int = 3) -> int:
    """Smallest lag k >= 0 such that lags k+1..k+run all lie inside the band.

    Lags beyond the computed range count as inside.
    """
    inside = np.abs(np.asarray(values)) <= band
    for k in range(len(inside) + 1):
        if inside[k : k + run].all():
            return k
    return len(inside)


def suggest_orders(cg: Correlogram, max_order: int = 5, max_candidates: int = 4) -> list[tuple[int, int]]:
    """Ranked (p, q) candidates from the PACF and ACF cutoffs.

    The cutoff lag of the PACF gives p and that of the ACF gives q; the
    neighbours one order below are kept as alternatives because the visual
    drop-off is often ambiguous by one lag.
    """
    p_star = min(cutoff_lag(cg.pacf, cg.confidence_band), max_order)
    q_star = min(cutoff_lag(cg.acf, cg.confidence_band), max_order)
    if p_star == 0 and q_star == 0:
        return [(1, 1), (0, 0)]
    ranked = []
    for p, q in ((p_star, q_star), (p_star, q_star - 1), (p_star - 1, q_star), (p_star - 1, q_star - 1)):
        if p >= 0 and q >= 0 and (p, q) not in ranked:
            ranked.append((p, q))
    return ranked[:max_candidates]
