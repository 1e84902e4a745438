"""Deterministic numerical building blocks.

Random numbers come from NumPy's PCG64 bit generator seeded through
``SeedSequence``.  Both are stable across NumPy releases and platforms, and
``SeedSequence.spawn`` gives reproducible child streams for parallel work.
Reference draws for seed 42 (``Rng.raw(3)``)::

    [14276969152011380360, 8095878257575067585, 15838336090824644132]

Matrices and vectors are plain float64 ``numpy.ndarray`` objects; the helpers
here validate shapes and finiteness where the contracts require it.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import NumericalError, ShapeError

ADAM_LR = 0.001
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-7


class Rng:
    """Single-owner random stream. Do not share across threads; use ``spawn``."""

    def __init__(self, seed_seq: np.random.SeedSequence):
        self._seed_seq = seed_seq
        self._bitgen = np.random.PCG64(seed_seq)
        self._gen = np.random.Generator(self._bitgen)

    def raw(self, n: int) -> list[int]:
        return [int(v) for v in self._bitgen.random_raw(n)]

    def uniform(self, size=None, low: float = 0.0, high: float = 1.0):
        return self._gen.uniform(low, high, size)

    def normal(self, size=None, loc: float = 0.0, scale: float = 1.0):
        return self._gen.normal(loc, scale, size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size)

    def poisson(self, lam: float, size=None):
        return self._gen.poisson(lam, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, a, size=None, p=None):
        return self._gen.choice(a, size=size, p=p)

    def spawn(self, n: int) -> list["Rng"]:
        return [Rng(child) for child in self._seed_seq.spawn(n)]


def make_rng(seed: int) -> Rng:
    return Rng(np.random.SeedSequence(int(seed) & 0xFFFF_FFFF_FFFF_FFFF))


def as_matrix(data, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Coerce to a finite 2-D float64 array, optionally checking its shape."""
    m = np.array(data, dtype=np.float64, ndmin=2)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got {m.ndim} dimensions")
    if rows is not None and m.shape[0] != rows or cols is not None and m.shape[1] != cols:
        raise ShapeError(f"expected matrix {rows}x{cols}, got {m.shape[0]}x{m.shape[1]}")
    if not np.all(np.isfinite(m)):
        raise NumericalError("matrix contains NaN or Inf")
    return m


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ShapeError(f"cannot multiply {m.shape} matrix by vector of shape {v.shape}")
    return m @ v


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"elementwise product of mismatched shapes {a.shape} and {b.shape}")
    return a * b


def sigmoid(x):
    """Logistic function, evaluated without overflow for any finite input."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_ACTIVATIONS: dict[str, Callable] = {
    "sigmoid": sigmoid,
    "tanh": np.tanh,
    "linear": lambda x: np.array(x, dtype=np.float64),
}


def activation_apply(kind: str, v) -> np.ndarray:
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}; expected one of {sorted(_ACTIVATIONS)}") from None
    return fn(np.asarray(v, dtype=np.float64))


def glorot_init(rng: Rng, rows: int, cols: int) -> np.ndarray:
    """Glorot-uniform matrix: entries drawn from U[-L, L], L = sqrt(6 / (rows + cols))."""
    if rows < 1 or cols < 1:
        raise ShapeError(f"glorot_init needs positive dimensions, got {rows}x{cols}")
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform((rows, cols), -limit, limit)


@dataclass(frozen=True)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    learning_rate: float = ADAM_LR
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON

    @classmethod
    def zeros_like(cls, params: np.ndarray, **kwargs) -> "AdamState":
        return cls(np.zeros_like(params, dtype=np.float64), np.zeros_like(params, dtype=np.float64), **kwargs)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> tuple[np.ndarray, AdamState]:
    """Bias-corrected adaptive-moment update; returns new arrays, inputs untouched."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if not (params.shape == grads.shape == state.first_moment.shape == state.second_moment.shape):
        raise ShapeError(
            f"adam_step shape mismatch: params {params.shape}, grads {grads.shape}, "
            f"moments {state.first_moment.shape}"
        )
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return new_params, replace(state, first_moment=m, second_moment=v, step_count=t)


def finite_diff_gradient(loss_fn: Callable[[np.ndarray], float], params: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of ``loss_fn`` at ``params``."""
    if h <= 0:
        raise ValueError("step h must be positive")
    p = np.array(params, dtype=np.float64)
    grad = np.empty_like(p)
    flat = p.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss_fn(p)
        flat[i] = orig - h
        down = loss_fn(p)
        flat[i] = orig
        g[i] = (up - down) / (2.0 * h)
    return grad
