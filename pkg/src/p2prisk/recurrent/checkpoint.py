"""Model checkpoint (JSON) and loss-history CSV.

Floats are written with ``repr`` so a save/load round trip is bit-exact.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict

import numpy as np

from ..errors import DataError
from ..ingest import ScalerParams
from .cells import LstmParams
from .training import TrainConfig, TrainedModel

FORMAT = "p2prisk-lstm"
VERSION = 1


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "hidden_size": model.params.hidden_size,
        "input_size": model.params.input_size,
        "params": [float(v) for v in model.params.flat],
        "config": asdict(model.config),
        "scaler": model.scaler.to_dict(),
        "use_macro": model.use_macro,
        "input_names": list(model.input_names),
        "train_month_count": model.train_month_count,
        # NaN (no test windows) is stored as null to keep the file strict JSON
        "history": [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()}
                    for row in model.history],
    }


def model_from_dict(d: dict) -> TrainedModel:
    if d.get("format") != FORMAT:
        raise DataError("not a p2prisk LSTM checkpoint")
    if d.get("version") != VERSION:
        raise DataError(f"unsupported checkpoint version {d.get('version')!r}")
    params = LstmParams(d["hidden_size"], d["input_size"], np.array(d["params"], dtype=np.float64))
    return TrainedModel(
        params=params,
        config=TrainConfig(**d["config"]),
        scaler=ScalerParams.from_dict(d["scaler"]),
        use_macro=bool(d["use_macro"]),
        input_names=tuple(d["input_names"]),
        train_month_count=int(d["train_month_count"]),
        history=[{k: (math.nan if v is None else v) for k, v in row.items()} for row in d.get("history", [])],
    )


def save_checkpoint(model: TrainedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1, allow_nan=False)
        fh.write("\n")


def load_checkpoint(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


HISTORY_COLUMNS = ("epoch", "train_rmse", "test_rmse", "train_rmse_scaled", "test_rmse_scaled")


def write_loss_history(model: TrainedModel, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for row in model.history:
            w.writerow([row["epoch"], *(repr(float(row[k])) for k in HISTORY_COLUMNS[1:])])
