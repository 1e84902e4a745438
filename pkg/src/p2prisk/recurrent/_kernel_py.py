"""NumPy implementation of the batched LSTM forward pass and BPTT.

Array arguments follow :class:`~p2prisk.recurrent.cells.LstmParams` views;
``X`` is N x L x D (C-contiguous) and ``y`` has length N.  Gradients are
accumulated into the caller's zeroed output arrays.
"""
import numpy as np


def _sigmoid(a):
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _run(W, U, V, b, X, keep):
    N, L, _ = X.shape
    H = V.shape[0]
    s = np.zeros((N, H))
    c = np.zeros((N, H))
    tape = []
    for t in range(L):
        x = X[:, t, :]
        a = x @ W.T + s @ U.T + b
        f = _sigmoid(a[:, :H])
        i = _sigmoid(a[:, H:2 * H])
        k = np.tanh(a[:, 2 * H:3 * H])
        cn = f * c + i * k
        o = _sigmoid(a[:, 3 * H:] + cn @ V.T)
        if keep:
            tape.append((s, c, f, i, k, cn, o))
        s, c = o, cn
    return s, tape


def predict(W, U, V, b, Wy, by, X):
    s, _ = _run(W, U, V, b, X, keep=False)
    return s @ Wy + by[0]


def loss_grad(W, U, V, b, Wy, by, X, y, gW, gU, gV, gb, gWy, gby):
    N, L, _ = X.shape
    H = V.shape[0]
    s_last, tape = _run(W, U, V, b, X, keep=True)
    resid = s_last @ Wy + by[0] - y
    loss = float(np.sqrt(np.mean(resid * resid)))
    if loss == 0.0:
        return loss
    g = resid / (N * loss)
    gWy += s_last.T @ g
    gby[0] += g.sum()
    ds = np.outer(g, Wy)
    dc = np.zeros((N, H))
    da = np.empty((N, 4 * H))
    for t in range(L - 1, -1, -1):
        s, c, f, i, k, cn, o = tape[t]
        dao = ds * o * (1.0 - o)
        gV += dao.T @ cn
        dcn = dc + dao @ V
        da[:, :H] = dcn * c * f * (1.0 - f)
        da[:, H:2 * H] = dcn * k * i * (1.0 - i)
        da[:, 2 * H:3 * H] = dcn * i * (1.0 - k * k)
        da[:, 3 * H:] = dao
        dc = dcn * f
        gW += da.T @ X[:, t, :]
        gb += da.sum(axis=0)
        if t > 0:
            gU += da.T @ s
            ds = da @ U
    return loss
