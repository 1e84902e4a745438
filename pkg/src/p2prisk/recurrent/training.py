"""Supervised windows, RMSE loss, BPTT, minibatch training and prediction."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, NumericalError
from ..ingest import Month, MonthlySeries, ScalerParams, apply_scaler, fit_scaler
from ..numerics import AdamState, adam_step, make_rng
from . import kernel
from .cells import LstmParams

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    hidden_size: int = 70
    batch_size: int = 50
    epochs: int = 1000
    lookback: int = 12
    learning_rate: float = 0.001
    seed: int = 0

    def __post_init__(self):
        for name in ("hidden_size", "batch_size", "lookback"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class SupervisedWindows:
    """``X[n]`` holds the ``lookback`` months ending at row ``index[n]``; ``y[n]`` is that row's target."""

    X: np.ndarray
    y: np.ndarray
    index: np.ndarray

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, rows) -> "SupervisedWindows":
        return SupervisedWindows(self.X[rows], self.y[rows], self.index[rows])


def make_windows(inputs: np.ndarray, target: np.ndarray, lookback: int,
                 start: int | None = None, stop: int | None = None) -> SupervisedWindows:
    """Sliding windows whose final row lies in ``[start, stop)``.

    ``start`` defaults to ``lookback - 1``, the first row with a full window.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    n = len(inputs)
    start = lookback - 1 if start is None else start
    stop = n if stop is None else stop
    if start < lookback - 1:
        raise DataError(f"row {start} has fewer than {lookback - 1} predecessor months")
    ends = np.arange(start, stop)
    if len(ends) == 0:
        return SupervisedWindows(np.zeros((0, lookback, inputs.shape[1])), np.zeros(0), ends)
    X = np.stack([inputs[e - lookback + 1:e + 1] for e in ends])
    return SupervisedWindows(np.ascontiguousarray(X), np.asarray(target, dtype=np.float64)[ends], ends)


def loss_rmse(params: LstmParams, batch: SupervisedWindows) -> float:
    if len(batch) == 0:
        raise DataError("loss over an empty batch")
    pred = kernel.predict_batch(params, batch.X)
    return float(np.sqrt(np.mean((pred - batch.y) ** 2)))


def backward(params: LstmParams, batch: SupervisedWindows) -> LstmParams:
    """Exact BPTT gradient of :func:`loss_rmse`, shaped like ``params``."""
    if len(batch) == 0:
        raise DataError("gradient over an empty batch")
    return kernel.loss_and_grad(params, batch.X, batch.y)[1]


@dataclass
class FitResult:
    params: LstmParams
    train_loss: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)


def fit_windows(train: SupervisedWindows, config: TrainConfig, test: SupervisedWindows | None = None,
                params: LstmParams | None = None, on_epoch=None) -> FitResult:
    """Minibatch Adam on RMSE with a seeded shuffle each epoch.

    Loss history holds the full-window RMSE after each epoch, in the units of
    ``train.y``.
    """
    if len(train) == 0:
        raise DataError("no training windows")
    init_rng, shuffle_rng = make_rng(config.seed).spawn(2)
    if params is None:
        params = LstmParams.initialize(init_rng, config.hidden_size, train.X.shape[2])
    else:
        params = params.copy()
    state = AdamState.zeros_like(params.flat, learning_rate=config.learning_rate)
    result = FitResult(params)
    n = len(train)
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            rows = order[lo:lo + config.batch_size]
            _, grad = kernel.loss_and_grad(params, train.X[rows], train.y[rows])
            new_flat, state = adam_step(state, params.flat, grad.flat)
            if not np.all(np.isfinite(new_flat)):
                raise NumericalError(f"non-finite parameters at epoch {epoch + 1}")
            params.flat[:] = new_flat
        result.train_loss.append(loss_rmse(params, train))
        if test is not None and len(test):
            result.test_loss.append(loss_rmse(params, test))
        if on_epoch is not None:
            on_epoch(epoch, params)
    return result


@dataclass
class TrainedModel:
    params: LstmParams
    config: TrainConfig
    scaler: ScalerParams
    use_macro: bool
    input_names: tuple[str, ...]
    train_month_count: int
    history: list[dict] = field(default_factory=list)


def _scaled_inputs(series: MonthlySeries, scaler: ScalerParams, use_macro: bool):
    scaled = apply_scaler(series, scaler)
    return scaled.model_inputs(use_macro), scaled.default_rate


def train(series: MonthlySeries, config: TrainConfig, use_macro: bool, train_month_count: int | None = None) -> TrainedModel:
    """Fit on the first ``train_month_count`` months; the rest only feed the test-loss history.

    The scaler is fitted on the training months alone.  History rows carry
    RMSE in original default-rate units and in scaled units.
    """
    if series.scaled:
        raise DataError("train expects an unscaled series; scaling is fitted internally")
    n = len(series)
    train_month_count = n if train_month_count is None else train_month_count
    if train_month_count < config.lookback + 1:
        raise DataError(
            f"training series has {train_month_count} months; need at least lookback + 1 = {config.lookback + 1}"
        )
    if use_macro and series.macro is None:
        raise DataError("use_macro requested but the series has no macro column")
    scaler = fit_scaler(series, train_month_count)
    inputs, target = _scaled_inputs(series, scaler, use_macro)
    train_w = make_windows(inputs, target, config.lookback, stop=train_month_count)
    test_w = make_windows(inputs, target, config.lookback, start=max(train_month_count, config.lookback - 1))
    span = float(scaler.maximum[0] - scaler.minimum[0])
    res = fit_windows(train_w, config, test_w)
    history = []
    for e, tr in enumerate(res.train_loss):
        te = res.test_loss[e] if res.test_loss else float("nan")
        history.append({"epoch": e + 1, "train_rmse": tr * span, "test_rmse": te * span,
                        "train_rmse_scaled": tr, "test_rmse_scaled": te})
    return TrainedModel(
        params=res.params,
        config=config,
        scaler=scaler,
        use_macro=use_macro,
        input_names=series.input_names(use_macro),
        train_month_count=train_month_count,
        history=history,
    )


def predict(model: TrainedModel, series: MonthlySeries, start: int, stop: int) -> np.ndarray:
    """Predicted default rate (original units) for rows ``start..stop-1`` of ``series``."""
    L = model.config.lookback
    if start < L - 1:
        raise DataError(f"cannot predict {series.months[start]}: needs {L - 1} earlier months of inputs")
    if series.input_names(model.use_macro) != model.input_names:
        raise DataError("series columns do not match the model's training inputs")
    inputs, target = _scaled_inputs(series, model.scaler, model.use_macro)
    w = make_windows(inputs, target, L, start=start, stop=stop)
    if len(w) == 0:
        return np.zeros(0)
    return model.scaler.inverse_target(kernel.predict_batch(model.params, w.X))


def predict_months(model: TrainedModel, series: MonthlySeries, months: list[Month]) -> np.ndarray:
    pos = {m: i for i, m in enumerate(series.months)}
    rows = []
    for m in months:
        if m not in pos:
            raise DataError(f"month {m} not in series")
        rows.append(pos[m])
    return np.array([predict(model, series, r, r + 1)[0] for r in rows])
