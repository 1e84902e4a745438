"""From-scratch RNN/LSTM cells, BPTT and training."""
from .cells import GATES, GateTrace, LstmParams, RnnParams, forward, lstm_step, rnn_forward, rnn_step
from .kernel import BACKEND, loss_and_grad, predict_batch
from .training import (
    FitResult,
    SupervisedWindows,
    TrainConfig,
    TrainedModel,
    backward,
    fit_windows,
    loss_rmse,
    make_windows,
    predict,
    predict_months,
    train,
)
from .checkpoint import load_checkpoint, save_checkpoint, write_loss_history

__all__ = [
    "BACKEND", "GATES", "FitResult", "GateTrace", "LstmParams", "RnnParams", "SupervisedWindows",
    "TrainConfig", "TrainedModel", "backward", "fit_windows", "forward", "load_checkpoint",
    "loss_and_grad", "loss_rmse", "lstm_step", "make_windows", "predict", "predict_batch",
    "predict_months", "rnn_forward", "rnn_step", "save_checkpoint", "train", "write_loss_history",
]
