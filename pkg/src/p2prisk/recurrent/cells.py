"""RNN and LSTM cells, one timestep at a time.

These are the readable reference path.  Training goes through the batched
kernels in :mod:`p2prisk.recurrent.kernel`, which are tested against this
module.

LSTM step (W_* are H x D, U_* and V_o are H x H)::

    f   = sigmoid(W_f x + U_f s + b_f)
    i   = sigmoid(W_i x + U_i s + b_i)
    k   = tanh(W_k x + U_k s + b_k)          # candidate cell value
    c'  = f * c + i * k                      # elementwise
    o   = sigmoid(W_o x + U_o s + V_o c' + b_o)
    s'  = o

The output gate reads the *updated* cell state c'.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError, ShapeError
from ..numerics import Rng, glorot_init, hadamard, matvec, sigmoid

GATES = ("f", "i", "k", "o")


class LstmParams:
    """All LSTM weights, stored as views into one flat float64 vector.

    Gate blocks are stacked in ``GATES`` order: ``W`` is 4H x D, ``U`` is
    4H x H, ``b`` is 4H.  ``flat`` is what the optimizer updates in place.
    """

    __slots__ = ("hidden_size", "input_size", "flat", "W", "U", "V_o", "b", "W_y", "_b_y")

    def __init__(self, hidden_size: int, input_size: int, flat: np.ndarray | None = None):
        H, D = int(hidden_size), int(input_size)
        if H < 1 or D < 1:
            raise ShapeError(f"hidden and input sizes must be >= 1, got H={H}, D={D}")
        n = self.size_for(H, D)
        if flat is None:
            flat = np.zeros(n)
        else:
            flat = np.ascontiguousarray(flat, dtype=np.float64)
            if flat.shape != (n,):
                raise ShapeError(f"expected {n} parameters for H={H}, D={D}, got {flat.shape}")
        self.hidden_size, self.input_size, self.flat = H, D, flat
        o = 0
        self.W = flat[o:o + 4 * H * D].reshape(4 * H, D); o += 4 * H * D
        self.U = flat[o:o + 4 * H * H].reshape(4 * H, H); o += 4 * H * H
        self.V_o = flat[o:o + H * H].reshape(H, H); o += H * H
        self.b = flat[o:o + 4 * H]; o += 4 * H
        self.W_y = flat[o:o + H]; o += H
        self._b_y = flat[o:o + 1]

    @staticmethod
    def size_for(hidden_size: int, input_size: int) -> int:
        H, D = hidden_size, input_size
        return 4 * H * D + 4 * H * H + H * H + 4 * H + H + 1

    @property
    def b_y(self) -> float:
        return float(self._b_y[0])

    @b_y.setter
    def b_y(self, value: float) -> None:
        self._b_y[0] = value

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(W, U, b) views for gate ``name`` in f/i/k/o."""
        g = GATES.index(name)
        H = self.hidden_size
        rows = slice(g * H, (g + 1) * H)
        return self.W[rows], self.U[rows], self.b[rows]

    def __getattr__(self, attr):
        # W_f, U_i, b_k, ... as views into the stacked blocks
        prefix, _, g = attr.partition("_")
        if prefix in ("W", "U", "b") and g in GATES:
            return self.gate(g)[("W", "U", "b").index(prefix)]
        raise AttributeError(attr)

    def copy(self) -> "LstmParams":
        return LstmParams(self.hidden_size, self.input_size, self.flat.copy())

    def __eq__(self, other) -> bool:
        return (isinstance(other, LstmParams) and self.hidden_size == other.hidden_size
                and self.input_size == other.input_size and np.array_equal(self.flat, other.flat))

    def __repr__(self) -> str:
        return f"LstmParams(H={self.hidden_size}, D={self.input_size}, n={self.flat.size})"

    @classmethod
    def initialize(cls, rng: Rng, hidden_size: int, input_size: int) -> "LstmParams":
        """Glorot-uniform per weight matrix, zero biases."""
        p = cls(hidden_size, input_size)
        H, D = hidden_size, input_size
        for g in range(4):
            p.W[g * H:(g + 1) * H] = glorot_init(rng, H, D)
            p.U[g * H:(g + 1) * H] = glorot_init(rng, H, H)
        p.V_o[:] = glorot_init(rng, H, H)
        p.W_y[:] = glorot_init(rng, 1, H)[0]
        return p

    @classmethod
    def random(cls, rng: Rng, hidden_size: int, input_size: int, scale: float = 0.5) -> "LstmParams":
        """Every entry (biases included) uniform in [-scale, scale]; for tests."""
        n = cls.size_for(hidden_size, input_size)
        return cls(hidden_size, input_size, rng.uniform(n, -scale, scale))


@dataclass
class RnnParams:
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray
    W_y: np.ndarray
    b_y: float = 0.0

    def __post_init__(self):
        H = self.U.shape[0]
        if self.U.shape != (H, H) or self.W.shape[0] != H or self.b.shape != (H,) or self.W_y.shape != (H,):
            raise ShapeError("inconsistent RNN parameter shapes")


@dataclass
class GateTrace:
    x: np.ndarray
    s: np.ndarray
    c: np.ndarray
    f: np.ndarray
    i: np.ndarray
    k: np.ndarray
    c_next: np.ndarray
    o: np.ndarray


def rnn_step(params: RnnParams, x_t: np.ndarray, s_t: np.ndarray) -> np.ndarray:
    """One plain RNN step; the returned output is also the next state."""
    return np.tanh(matvec(params.W, x_t) + matvec(params.U, s_t) + params.b)


def _check_step(params: LstmParams, x_t, s_t, c_t):
    H, D = params.hidden_size, params.input_size
    if np.shape(x_t) != (D,) or np.shape(s_t) != (H,) or np.shape(c_t) != (H,):
        raise ShapeError(
            f"lstm_step expects x:({D},), s:({H},), c:({H},); "
            f"got {np.shape(x_t)}, {np.shape(s_t)}, {np.shape(c_t)}"
        )


def lstm_step(params: LstmParams, x_t, s_t, c_t):
    """Returns ``(o_t, s_next, c_next, trace)`` where ``s_next is o_t``."""
    _check_step(params, x_t, s_t, c_t)
    x_t = np.asarray(x_t, dtype=np.float64)
    s_t = np.asarray(s_t, dtype=np.float64)
    c_t = np.asarray(c_t, dtype=np.float64)

    def pre(g):
        W, U, b = params.gate(g)
        return matvec(W, x_t) + matvec(U, s_t) + b

    f = sigmoid(pre("f"))
    i = sigmoid(pre("i"))
    k = np.tanh(pre("k"))
    c_next = hadamard(f, c_t) + hadamard(i, k)
    o = sigmoid(pre("o") + matvec(params.V_o, c_next))
    trace = GateTrace(x=x_t, s=s_t, c=c_t, f=f, i=i, k=k, c_next=c_next, o=o)
    return o, o, c_next, trace


def forward(params: LstmParams, window) -> tuple[float, list[GateTrace]]:
    """Run the cell over an L x D window from zero state; project the last output."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[0] == 0:
        raise DataError("forward needs a nonempty L x D window")
    if window.shape[1] != params.input_size:
        raise ShapeError(f"window has {window.shape[1]} features, params expect {params.input_size}")
    H = params.hidden_size
    s = np.zeros(H)
    c = np.zeros(H)
    traces = []
    for x_t in window:
        o, s, c, tr = lstm_step(params, x_t, s, c)
        traces.append(tr)
    return float(params.W_y @ s + params.b_y), traces


def rnn_forward(params: RnnParams, window) -> float:
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[0] == 0:
        raise DataError("rnn_forward needs a nonempty L x D window")
    s = np.zeros(params.U.shape[0])
    for x_t in window:
        s = rnn_step(params, x_t, s)
    return float(params.W_y @ s + params.b_y)
