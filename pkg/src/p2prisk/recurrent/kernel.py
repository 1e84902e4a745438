"""Backend selection for the batched LSTM kernels.

The compiled ``_kernel`` extension is used when it imports; otherwise the
NumPy fallback.  Set ``P2PRISK_BACKEND=python`` (or ``native``) to force one.
Both backends agree to rounding error, not bit-for-bit, so determinism
guarantees hold per backend.
"""
from __future__ import annotations

import os

import numpy as np

from ..errors import DataError, ShapeError
from . import _kernel_py
from .cells import LstmParams

try:
    from . import _kernel as _kernel_native
except ImportError:  # extension not built
    _kernel_native = None

BACKENDS = {"python": _kernel_py}
if _kernel_native is not None:
    BACKENDS["native"] = _kernel_native


def _select(name: str | None):
    if name is None:
        name = os.environ.get("P2PRISK_BACKEND") or ("native" if "native" in BACKENDS else "python")
    try:
        return name, BACKENDS[name]
    except KeyError:
        raise ImportError(f"LSTM backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


BACKEND, _impl = _select(None)


def get_backend(name: str | None = None):
    return _impl if name is None else _select(name)[1]


def _check(params: LstmParams, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[0] == 0 or X.shape[1] == 0:
        raise DataError(f"expected a nonempty N x L x D window batch, got shape {X.shape}")
    if X.shape[2] != params.input_size:
        raise ShapeError(f"windows have {X.shape[2]} features, params expect {params.input_size}")
    return X


def predict_batch(params: LstmParams, X, backend: str | None = None) -> np.ndarray:
    X = _check(params, X)
    p = params
    return get_backend(backend).predict(p.W, p.U, p.V_o, p.b, p.W_y, p._b_y, X)


def loss_and_grad(params: LstmParams, X, y, backend: str | None = None) -> tuple[float, LstmParams]:
    """RMSE over the batch and its exact gradient (zero at zero loss)."""
    X = _check(params, X)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise ShapeError(f"targets shape {y.shape} does not match {X.shape[0]} windows")
    p = params
    g = LstmParams(p.hidden_size, p.input_size)
    loss = get_backend(backend).loss_grad(
        p.W, p.U, p.V_o, p.b, p.W_y, p._b_y, X, y, g.W, g.U, g.V_o, g.b, g.W_y, g._b_y
    )
    return float(loss), g
