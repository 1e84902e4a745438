"""Small shared builders for the test modules."""
import numpy as np

from p2prisk.ingest import Month, MonthlySeries
from p2prisk.recurrent import TrainConfig, fit_windows, make_windows


def months_from(start: Month, n: int) -> tuple[Month, ...]:
    return tuple(Month((start.ordinal + k) // 12, (start.ordinal + k) % 12 + 1) for k in range(n))


def sine_task(n=72, lookback=12):
    t = np.arange(n, dtype=np.float64)
    x = ((t - t.mean()) / t.std())[:, None]
    y = np.sin(2 * np.pi * t / 24)
    return make_windows(x, y, lookback)


def fit_sine(seed=0, epochs=1000, hidden=8, lookback=12, lr=0.01):
    w = sine_task(lookback=lookback)
    cfg = TrainConfig(hidden_size=hidden, batch_size=len(w), epochs=epochs, lookback=lookback,
                      learning_rate=lr, seed=seed)
    return fit_windows(w, cfg)


def toy_series(n=40, seed=0, macro=True, constant=False):
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    rate = np.full(n, 0.12) if constant else 0.1 + 0.03 * np.sin(2 * np.pi * t / 12) + 0.005 * rng.standard_normal(n)
    feats = np.column_stack([np.sin(t / 5.0), rng.uniform(0, 1, n)])
    return MonthlySeries(
        months=months_from(Month(2010, 1), n),
        features=feats,
        feature_names=("f1", "f2"),
        default_rate=np.clip(rate, 0, 1),
        macro=(5 + np.cos(t / 7.0)) if macro else None,
    )
