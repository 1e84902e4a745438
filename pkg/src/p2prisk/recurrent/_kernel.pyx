# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched LSTM forward pass and BPTT.

Same contract as ``_kernel_py``.  Matrix products go through BLAS dgemm
(row-major operands are passed to the column-major routine transposed);
gate nonlinearities and the cell update are plain C loops.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, tanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline double _sig(double a) noexcept nogil:
    cdef double e
    if a >= 0:
        return 1.0 / (1.0 + exp(-a))
    e = exp(a)
    return e / (1.0 + e)


cdef inline void _gemm(char ta, char tb, int m, int n, int k, double alpha,
                       const double* A, int lda, const double* B, int ldb,
                       double beta, double* C, int ldc) noexcept nogil:
    # row-major C[m,n] = alpha * op(A)[m,k] @ op(B)[k,n] + beta * C
    dgemm(&tb, &ta, &n, &m, &k, &alpha, <double*>B, &ldb, <double*>A, &lda, &beta, C, &ldc)


cdef void _forward(const double[:, ::1] W, const double[:, ::1] U, const double[:, ::1] V,
                   const double[::1] b, const double[:, :, ::1] X,
                   double[:, ::1] A, double[:, :, ::1] F, double[:, :, ::1] I,
                   double[:, :, ::1] K, double[:, :, ::1] CN, double[:, :, ::1] O) noexcept nogil:
    cdef int N = X.shape[0], L = X.shape[1], D = X.shape[2], H = V.shape[0]
    cdef int H4 = 4 * H, t, n, h
    cdef double f, ig, kk, cprev, cn
    for t in range(L):
        for n in range(N):
            for h in range(H4):
                A[n, h] = b[h]
        _gemm(b'N', b'T', N, H4, D, 1.0, &X[0, t, 0], L * D, &W[0, 0], D, 1.0, &A[0, 0], H4)
        if t > 0:
            _gemm(b'N', b'T', N, H4, H, 1.0, &O[t - 1, 0, 0], H, &U[0, 0], H, 1.0, &A[0, 0], H4)
        for n in range(N):
            for h in range(H):
                f = _sig(A[n, h])
                ig = _sig(A[n, H + h])
                kk = tanh(A[n, 2 * H + h])
                cprev = CN[t - 1, n, h] if t > 0 else 0.0
                cn = f * cprev + ig * kk
                F[t, n, h] = f
                I[t, n, h] = ig
                K[t, n, h] = kk
                CN[t, n, h] = cn
        _gemm(b'N', b'T', N, H, H, 1.0, &CN[t, 0, 0], H, &V[0, 0], H, 1.0, &A[0, 3 * H], H4)
        for n in range(N):
            for h in range(H):
                O[t, n, h] = _sig(A[n, 3 * H + h])


def _buffers(int N, int L, int H):
    return (np.empty((N, 4 * H)), np.empty((L, N, H)), np.empty((L, N, H)),
            np.empty((L, N, H)), np.empty((L, N, H)), np.empty((L, N, H)))


def predict(const double[:, ::1] W, const double[:, ::1] U, const double[:, ::1] V,
            const double[::1] b, const double[::1] Wy, const double[::1] by,
            const double[:, :, ::1] X):
    cdef int N = X.shape[0], L = X.shape[1], H = V.shape[0], n, h
    A, F, I, K, CN, O = _buffers(N, L, H)
    cdef double[:, :, ::1] Ov = O
    out = np.empty(N)
    cdef double[::1] outv = out
    cdef double acc
    _forward(W, U, V, b, X, A, F, I, K, CN, O)
    for n in range(N):
        acc = 0.0
        for h in range(H):
            acc += Wy[h] * Ov[L - 1, n, h]
        outv[n] = acc + by[0]
    return out


def loss_grad(const double[:, ::1] W, const double[:, ::1] U, const double[:, ::1] V,
              const double[::1] b, const double[::1] Wy, const double[::1] by,
              const double[:, :, ::1] X, const double[::1] y,
              double[:, ::1] gW, double[:, ::1] gU, double[:, ::1] gV,
              double[::1] gb, double[::1] gWy, double[::1] gby):
    cdef int N = X.shape[0], L = X.shape[1], D = X.shape[2], H = V.shape[0]
    cdef int H4 = 4 * H, t, n, h
    A_, F_, I_, K_, CN_, O_ = _buffers(N, L, H)
    cdef double[:, ::1] A = A_
    cdef double[:, :, ::1] F = F_, I = I_, K = K_, CN = CN_, O = O_
    _forward(W, U, V, b, X, A, F, I, K, CN, O)

    g_ = np.empty(N)
    cdef double[::1] g = g_
    cdef double acc, sse = 0.0, loss
    for n in range(N):
        # same summation order as predict, so a perfect fit gives exactly zero
        acc = 0.0
        for h in range(H):
            acc += Wy[h] * O[L - 1, n, h]
        acc = (acc + by[0]) - y[n]
        g[n] = acc
        sse += acc * acc
    loss = sqrt(sse / N)
    if loss == 0.0:
        return loss
    for n in range(N):
        g[n] = g[n] / (N * loss)

    cdef double[:, ::1] dA = A  # forward scratch reused for gate gradients
    cdef double[:, ::1] dS = np.empty((N, H))
    cdef double[:, ::1] dC = np.zeros((N, H))
    cdef double[:, ::1] dCN = np.empty((N, H))
    cdef double o, f, ig, kk, cprev, dao, dcn
    with nogil:
        for n in range(N):
            gby[0] += g[n]
            for h in range(H):
                gWy[h] += O[L - 1, n, h] * g[n]
                dS[n, h] = g[n] * Wy[h]
        for t in range(L - 1, -1, -1):
            for n in range(N):
                for h in range(H):
                    o = O[t, n, h]
                    dA[n, 3 * H + h] = dS[n, h] * o * (1.0 - o)
                    dCN[n, h] = dC[n, h]
            _gemm(b'T', b'N', H, H, N, 1.0, &dA[0, 3 * H], H4, &CN[t, 0, 0], H, 1.0, &gV[0, 0], H)
            _gemm(b'N', b'N', N, H, H, 1.0, &dA[0, 3 * H], H4, &V[0, 0], H, 1.0, &dCN[0, 0], H)
            for n in range(N):
                for h in range(H):
                    f = F[t, n, h]
                    ig = I[t, n, h]
                    kk = K[t, n, h]
                    cprev = CN[t - 1, n, h] if t > 0 else 0.0
                    dcn = dCN[n, h]
                    dA[n, h] = dcn * cprev * f * (1.0 - f)
                    dA[n, H + h] = dcn * kk * ig * (1.0 - ig)
                    dA[n, 2 * H + h] = dcn * ig * (1.0 - kk * kk)
                    dC[n, h] = dcn * f
            _gemm(b'T', b'N', H4, D, N, 1.0, &dA[0, 0], H4, &X[0, t, 0], L * D, 1.0, &gW[0, 0], D)
            for n in range(N):
                for h in range(H4):
                    gb[h] += dA[n, h]
            if t > 0:
                _gemm(b'T', b'N', H4, H, N, 1.0, &dA[0, 0], H4, &O[t - 1, 0, 0], H, 1.0, &gU[0, 0], H)
                _gemm(b'N', b'N', N, H, H4, 1.0, &dA[0, 0], H4, &U[0, 0], H, 0.0, &dS[0, 0], H)
    return loss
