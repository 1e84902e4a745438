"""Chronological split, RMSE, and the three-model comparison report."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import DataError
from .ingest import MonthlySeries
from .recurrent import TrainConfig, predict, train
from .timeseries import forecast_one_step_rolling, select_ar_order

MODEL_COLUMNS = {"LSTM(1)": "lstm1", "LSTM(2)": "lstm2", "AR": "ar"}


@dataclass(frozen=True)
class SplitSpec:
    train_month_count: int
    test_month_count: int
    ratio: float = 0.8


def chrono_split(n_months: int, ratio: float = 0.8, min_train: int = 1) -> SplitSpec:
    """First ``floor(n * ratio)`` months train, the rest test; never shuffled."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("split ratio must be in (0, 1)")
    n_train = math.floor(n_months * ratio)
    n_test = n_months - n_train
    if n_train < max(min_train, 1) or n_test < 1:
        raise DataError(
            f"split of {n_months} months at ratio {ratio} gives {n_train} train / {n_test} test "
            f"(need >= {max(min_train, 1)} train and >= 1 test)"
        )
    return SplitSpec(n_train, n_test, ratio)


def rmse(predicted, actual) -> float:
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape or p.ndim != 1:
        raise DataError(f"rmse needs equal-length vectors, got {p.shape} and {a.shape}")
    if p.size == 0:
        raise DataError("rmse of empty vectors")
    r = p - a
    return float(np.sqrt(np.mean(r * r)))


@dataclass
class ModelResult:
    train_rmse: float
    test_rmse: float
    predicted: np.ndarray
    detail: dict = field(default_factory=dict)


@dataclass
class ForecastReport:
    """Predictions for every model over the same months ``rows``; ``rows < split`` is training."""

    months: list[str]
    actual: np.ndarray
    split_index: int
    models: dict[str, ModelResult]
    metadata: dict = field(default_factory=dict)

    def recompute(self, name: str) -> tuple[float, float]:
        pred = self.models[name].predicted
        k = self.split_index
        return rmse(pred[:k], self.actual[:k]), rmse(pred[k:], self.actual[k:])


@dataclass(frozen=True)
class CompareConfig:
    train: TrainConfig = TrainConfig()
    ar_orders: tuple[int, ...] = (1, 2, 3)
    ar_differencing: int = 1
    split_ratio: float = 0.8


def compare_models(series: MonthlySeries, config: CompareConfig = CompareConfig(), seed: int | None = None,
                   keep_models: bool = False) -> ForecastReport:
    """Train LSTM(1) (no macro), LSTM(2) (with macro) and a BIC-selected AR on one split.

    Every model is scored on the same months: the first row all of them can
    forecast through the end of the series.
    """
    if series.macro is None:
        raise DataError("compare_models needs a series with the macro column merged")
    tcfg = config.train if seed is None else replace(config.train, seed=seed)
    n = len(series)
    split = chrono_split(n, config.split_ratio, min_train=tcfg.lookback + 1)
    k = split.train_month_count

    lstm1 = train(series, tcfg, use_macro=False, train_month_count=k)
    lstm2 = train(series, tcfg, use_macro=True, train_month_count=k)
    # the AR model sees only training-period levels when fitting
    ar = select_ar_order(series.default_rate[:k], config.ar_orders, d=config.ar_differencing)

    start = max(tcfg.lookback - 1, max(config.ar_orders) + config.ar_differencing)
    if start >= k:
        raise DataError("training window too short to score any month for all models")
    actual = series.default_rate[start:]
    preds = {
        "LSTM(1)": predict(lstm1, series, start, n),
        "LSTM(2)": predict(lstm2, series, start, n),
        "AR": forecast_one_step_rolling(ar, series.default_rate, start, n),
    }
    split_idx = k - start
    models = {}
    for name, p in preds.items():
        models[name] = ModelResult(rmse(p[:split_idx], actual[:split_idx]), rmse(p[split_idx:], actual[split_idx:]), p)
    models["AR"].detail = {"order": ar.order, "bic": ar.bic, "differencing": ar.differencing}
    if keep_models:
        models["LSTM(1)"].detail["model"] = lstm1
        models["LSTM(2)"].detail["model"] = lstm2
        models["AR"].detail["model"] = ar
    return ForecastReport(
        months=[str(m) for m in series.months[start:]],
        actual=actual,
        split_index=split_idx,
        models=models,
        metadata={
            "seed": tcfg.seed,
            "train_config": asdict(tcfg),
            "ar_orders": list(config.ar_orders),
            "ar_selected_order": ar.order,
            "split": asdict(split),
            "first_train_month": str(series.months[0]),
            "first_scored_month": str(series.months[start]),
            "first_test_month": str(series.months[k]),
        },
    )


def _fmt(v: float) -> str:
    return repr(float(v))


def write_rmse_table(report: ForecastReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "train_rmse", "test_rmse"])
        for name, res in report.models.items():
            label = f"AR({res.detail['order']})" if name == "AR" and "order" in res.detail else name
            w.writerow([label, _fmt(res.train_rmse), _fmt(res.test_rmse)])


def write_trend(report: ForecastReport, path) -> None:
    """Plot-ready monthly trend: month,actual,lstm1,lstm2,ar,split."""
    names = list(report.models)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "actual", *(MODEL_COLUMNS.get(n, n) for n in names), "split"])
        for i, m in enumerate(report.months):
            w.writerow([m, _fmt(report.actual[i]), *(_fmt(report.models[n].predicted[i]) for n in names),
                        "train" if i < report.split_index else "test"])


def read_trend(path) -> tuple[list[str], dict[str, np.ndarray], list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {h: np.array([float(r[i]) for r in body]) for i, h in enumerate(header) if h not in ("month", "split")}
    return [r[0] for r in body], cols, [r[-1] for r in body]
