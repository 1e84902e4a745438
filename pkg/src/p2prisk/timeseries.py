"""Classical baselines: differencing, correlograms, AR(p) and VAR(p) by least squares.

Conventions
-----------
* ``acf`` uses the biased (divide-by-n) autocovariance, so the Toeplitz
  system behind ``pacf`` is positive semi-definite and Durbin-Levinson is
  well defined.
* AR/VAR are fitted by conditional least squares: row t regresses x_t on an
  intercept and x_{t-1}..x_{t-p}.
* ``BIC = n ln(RSS/n) + k ln n`` with n the number of regression rows; the
  VAR form replaces RSS/n by det(Sigma).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, NumericalError


def difference(series, d: int = 1) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    if d < 0:
        raise ValueError("d must be >= 0")
    if len(x) <= d:
        raise DataError(f"series of length {len(x)} too short for {d}-fold differencing")
    return np.diff(x, n=d, axis=0) if d else x.copy()


def inverse_difference(diffs, last_levels) -> np.ndarray:
    """Undo ``d = len(last_levels)`` rounds of differencing.

    ``last_levels`` holds the first value of each intermediate series,
    outermost first: for d=1 just ``[x[0]]``.  The result includes the anchor.
    """
    anchors = np.atleast_1d(np.asarray(last_levels, dtype=np.float64))
    if anchors.size == 0:
        raise DataError("inverse_difference needs at least one anchor value")
    out = np.asarray(diffs, dtype=np.float64)
    for a in anchors[::-1]:
        out = np.concatenate([[a], a + np.cumsum(out)])
    return out


def acf(series, max_lag: int) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    n = len(x)
    if max_lag < 0 or n <= max_lag:
        raise DataError(f"need more than {max_lag} observations, have {n}")
    xc = x - x.mean()
    gamma0 = float(xc @ xc) / n
    if gamma0 <= 0.0:
        raise NumericalError("autocorrelation of a constant series is undefined")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for k in range(1, max_lag + 1):
        out[k] = float(xc[k:] @ xc[:-k]) / n / gamma0
    return out


def pacf_from_acf(rho: np.ndarray) -> np.ndarray:
    """Durbin-Levinson: partial autocorrelations from autocorrelations rho[0..K]."""
    K = len(rho) - 1
    out = np.empty(K + 1)
    out[0] = 1.0
    if K == 0:
        return out
    phi = np.zeros(K + 1)
    phi[1] = rho[1]
    out[1] = rho[1]
    v = 1.0 - rho[1] ** 2
    for k in range(2, K + 1):
        if v <= 0.0:
            out[k:] = 0.0
            break
        num = rho[k] - phi[1:k] @ rho[k - 1:0:-1]
        a = num / v
        prev = phi[1:k].copy()
        phi[1:k] = prev - a * prev[::-1]
        phi[k] = a
        out[k] = a
        v *= 1.0 - a * a
    return out


def pacf(series, max_lag: int) -> np.ndarray:
    return pacf_from_acf(acf(series, max_lag))


@dataclass(frozen=True)
class CorrelogramReport:
    lags: np.ndarray
    acf: np.ndarray
    pacf: np.ndarray
    conf_band: float


def correlogram(series, max_lag: int) -> CorrelogramReport:
    r = acf(series, max_lag)
    return CorrelogramReport(np.arange(max_lag + 1), r, pacf_from_acf(r), 1.96 / math.sqrt(len(series)))


def write_correlogram(report: CorrelogramReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lag", "acf", "pacf", "conf_band"])
        for k in report.lags:
            w.writerow([int(k), repr(float(report.acf[k])), repr(float(report.pacf[k])), repr(report.conf_band)])


def bic(rss: float, n: int, k: int) -> float:
    """Gaussian BIC; ``rss == 0`` is a perfect fit and returns -inf."""
    if n <= 0 or rss < 0:
        raise ValueError("bic needs n > 0 and rss >= 0")
    if rss == 0.0:
        return -math.inf
    return n * math.log(rss / n) + k * math.log(n)


def _lagged_design(x: np.ndarray, p: int, start: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows t = start..n-1: [1, x_{t-1}, ..., x_{t-p}] (each x_{t-j} is a k-vector)."""
    n = len(x)
    cols = [np.ones((n - start, 1))]
    for j in range(1, p + 1):
        cols.append(x[start - j:n - j].reshape(n - start, -1))
    return np.hstack(cols), x[start:]


def _least_squares(Z: np.ndarray, Y: np.ndarray) -> np.ndarray:
    if Z.shape[0] < Z.shape[1]:
        raise DataError("more regressors than observations")
    beta, _, rank, _ = np.linalg.lstsq(Z, Y, rcond=None)
    if rank < Z.shape[1]:
        raise NumericalError("singular design matrix (constant or collinear series)")
    return beta


@dataclass(frozen=True)
class ArModel:
    order: int
    intercept: float
    coefficients: np.ndarray
    residual_variance: float
    n_obs: int
    bic: float
    differencing: int = 0

    def predict_next(self, history: np.ndarray) -> float:
        """One step ahead on the (differenced) scale given at least ``order`` past values."""
        lags = history[::-1][:self.order]
        return float(self.intercept + self.coefficients @ lags)


def fit_ar(series, p: int, *, d: int = 0, burn_in: int = 0) -> ArModel:
    """Conditional least squares AR(p) on ``d``-differenced data.

    Regression rows start at ``max(p, burn_in)``, letting several orders share
    one estimation sample.
    """
    x = difference(series, d)
    n = len(x)
    start = max(p, burn_in)
    if n <= start + 2 or n <= p + 2:
        raise DataError(f"AR({p}) needs more than {start + 2} observations, have {n}")
    Z, y = _lagged_design(x, p, start)
    beta = _least_squares(Z, y)
    resid = y - Z @ beta
    rss = float(resid @ resid)
    rows = len(y)
    return ArModel(
        order=p,
        intercept=float(beta[0]),
        coefficients=np.asarray(beta[1:], dtype=np.float64),
        residual_variance=rss / rows,
        n_obs=rows,
        bic=bic(rss, rows, p + 1),
        differencing=d,
    )


def select_ar_order(series, p_candidates: Sequence[int] = (1, 2, 3), *, d: int = 0) -> ArModel:
    """Lowest-BIC AR model; all candidates share the sample that starts at max(p)."""
    cands = sorted(set(int(p) for p in p_candidates))
    if not cands:
        raise ValueError("need at least one candidate order")
    burn = max(cands)
    best = None
    for p in cands:
        m = fit_ar(series, p, d=d, burn_in=burn)
        if best is None or m.bic < best.bic:  # strict: ties keep the smaller p
            best = m
    return best


@dataclass(frozen=True)
class VarModel:
    dimension: int
    order: int
    intercept: np.ndarray
    coefficients: np.ndarray  # p x k x k; coefficients[j-1] multiplies x_{t-j}
    residual_covariance: np.ndarray
    n_obs: int
    bic: float
    differencing: int = 0
    names: tuple[str, ...] = ()

    def predict_next(self, history: np.ndarray) -> np.ndarray:
        out = self.intercept.copy()
        for j in range(1, self.order + 1):
            out += self.coefficients[j - 1] @ history[-j]
        return out


def fit_var(matrix_series, p: int, *, d: int = 0, names: Sequence[str] = ()) -> VarModel:
    x = difference(np.asarray(matrix_series, dtype=np.float64).reshape(len(matrix_series), -1), d)
    n, k = x.shape
    if n <= k * p + 2 or n <= p:
        raise DataError(f"VAR({p}) in {k} dimensions needs more than {k * p + 2} observations, have {n}")
    Z, Y = _lagged_design(x, p, p)
    B = _least_squares(Z, Y)  # (1 + k p) x k
    E = Y - Z @ B
    rows = len(Y)
    sigma = (E.T @ E) / rows
    sigma = 0.5 * (sigma + sigma.T)
    sign, logdet = np.linalg.slogdet(sigma)
    n_coef = k * (k * p + 1)
    if sign > 0:
        crit = rows * logdet + n_coef * math.log(rows)
    elif np.allclose(sigma, 0.0):
        crit = -math.inf
    else:
        raise NumericalError("residual covariance is singular")
    coefs = np.stack([B[1 + (j - 1) * k:1 + j * k].T for j in range(1, p + 1)]) if p else np.zeros((0, k, k))
    return VarModel(
        dimension=k,
        order=p,
        intercept=B[0].copy(),
        coefficients=coefs,
        residual_covariance=sigma,
        n_obs=rows,
        bic=crit,
        differencing=d,
        names=tuple(names),
    )


def forecast_one_step_rolling(model: ArModel | VarModel, full_series, start: int, stop: int | None = None,
                              target_index: int = 0) -> np.ndarray:
    """Level-unit one-step forecasts for rows ``start..stop-1`` using true past values.

    With d=1 the forecast is ``x_{t-1} + predicted difference``.  For a VAR
    the ``target_index`` component is returned.
    """
    x = np.asarray(full_series, dtype=np.float64)
    is_var = isinstance(model, VarModel)
    if is_var:
        x = x.reshape(len(x), -1)
    stop = len(x) if stop is None else stop
    d = model.differencing
    if d not in (0, 1):
        raise ValueError("only d in {0, 1} is supported")
    need = model.order + d
    if start < need:
        raise DataError(f"row {start} lacks the {need} past values an order-{model.order}, d={d} forecast needs")
    if stop > len(x):
        raise DataError("forecast range runs past the end of the series")
    z = difference(x, d) if d else x
    out = np.empty(stop - start)
    for i, t in enumerate(range(start, stop)):
        hist = z[:t - d]  # values observed through row t-1 on the model scale
        step = model.predict_next(hist)
        if is_var:
            step = step[target_index]
        level = (x[t - 1] if not is_var else x[t - 1, target_index]) if d else 0.0
        out[i] = level + step
    return out


def model_summary_rows(models: dict[str, ArModel | VarModel]) -> list[list[str]]:
    rows = [["model", "order", "differencing", "n_obs", "residual_variance", "bic", "coefficients"]]
    for name, m in models.items():
        if isinstance(m, ArModel):
            coef = " ".join(repr(float(c)) for c in [m.intercept, *m.coefficients])
            var = repr(m.residual_variance)
        else:
            coef = " ".join(repr(float(c)) for c in np.concatenate([m.intercept, m.coefficients.ravel()]))
            var = " ".join(repr(float(v)) for v in m.residual_covariance.ravel())
        rows.append([name, str(m.order), str(m.differencing), str(m.n_obs), var, repr(float(m.bic)), coef])
    return rows


def write_model_summary(models: dict[str, ArModel | VarModel], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(model_summary_rows(models))
