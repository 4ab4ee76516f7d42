# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled reservoir time-stepping kernel: BLAS matmuls + fused leaky update."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm

ACT_LOGISTIC = 0
ACT_TANH = 1


cdef inline double _logistic(double z) nogil:
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    cdef double e = exp(z)
    return e / (1.0 + e)


def layer_sequence(double[:, ::1] w_in, double[:, ::1] w_rec,
                   double[:, :, ::1] inputs, double alpha, int activation,
                   double[:, :, ::1] out_states, double[:, ::1] x0):
    """Same contract as the numpy fallback: see _forward_np.layer_sequence."""
    cdef int T = inputs.shape[0]
    cdef int S = inputs.shape[1]
    cdef int A = inputs.shape[2]
    cdef int N = w_in.shape[0]
    cdef double one = 1.0, zero = 0.0
    cdef double keep = 1.0 - alpha
    cdef char trans_t = b'T', trans_n = b'N'
    cdef int t, i, j
    cdef double z

    x_arr = np.array(x0, dtype=np.float64, copy=True)
    z_arr = np.empty((S, N), dtype=np.float64)
    cdef double[:, ::1] x = x_arr
    cdef double[:, ::1] zbuf = z_arr

    with nogil:
        for t in range(T):
            # zbuf (S,N) = inputs[t] (S,A) @ w_in^T; column-major view: (N,S) = w_in^T' @ inputs[t]'
            dgemm(&trans_t, &trans_n, &N, &S, &A, &one,
                  &w_in[0, 0], &A, &inputs[t, 0, 0], &A, &zero, &zbuf[0, 0], &N)
            # zbuf += x (S,N) @ w_rec^T
            dgemm(&trans_t, &trans_n, &N, &S, &N, &one,
                  &w_rec[0, 0], &N, &x[0, 0], &N, &one, &zbuf[0, 0], &N)
            if activation == 1:
                for i in range(S):
                    for j in range(N):
                        x[i, j] = keep * x[i, j] + alpha * tanh(zbuf[i, j])
                        out_states[t, i, j] = x[i, j]
            else:
                for i in range(S):
                    for j in range(N):
                        x[i, j] = keep * x[i, j] + alpha * _logistic(zbuf[i, j])
                        out_states[t, i, j] = x[i, j]
