# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled forward-backward over a compound chain.

Same contract as :func:`dpnlearn._kernels.fb_py.forward_backward`.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, INFINITY

cnp.import_array()


def forward_backward(init, trans, evidence, bint want_xi=True):
    cdef const double[::1] p0 = np.ascontiguousarray(init, dtype=np.float64)
    cdef const double[:, ::1] A = np.ascontiguousarray(trans, dtype=np.float64)
    cdef const double[:, ::1] ev = np.ascontiguousarray(evidence, dtype=np.float64)
    cdef Py_ssize_t L = ev.shape[0], S = ev.shape[1]
    alpha_arr = np.zeros((L, S))
    beta_arr = np.zeros((L, S))
    scale_arr = np.zeros(L)
    xi_arr = np.zeros((S, S))
    w_arr = np.zeros(S)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] beta = beta_arr
    cdef double[::1] scale = scale_arr
    cdef double[:, ::1] xi = xi_arr
    cdef double[::1] w = w_arr
    cdef Py_ssize_t t, i, j
    cdef double c, a, acc, loglik = 0.0

    c = 0.0
    for i in range(S):
        a = p0[i] * ev[0, i]
        alpha[0, i] = a
        c += a
    scale[0] = c
    if c <= 0.0:
        return -INFINITY, alpha_arr, beta_arr, scale_arr, xi_arr
    for i in range(S):
        alpha[0, i] /= c
    loglik += log(c)

    for t in range(1, L):
        for i in range(S):
            a = alpha[t - 1, i]
            if a == 0.0:
                continue
            for j in range(S):
                alpha[t, j] += a * A[i, j]
        c = 0.0
        for j in range(S):
            alpha[t, j] *= ev[t, j]
            c += alpha[t, j]
        scale[t] = c
        if c <= 0.0:
            return -INFINITY, alpha_arr, beta_arr, scale_arr, xi_arr
        for j in range(S):
            alpha[t, j] /= c
        loglik += log(c)

    for i in range(S):
        beta[L - 1, i] = 1.0
    for t in range(L - 2, -1, -1):
        c = scale[t + 1]
        for j in range(S):
            w[j] = ev[t + 1, j] * beta[t + 1, j] / c
        for i in range(S):
            acc = 0.0
            for j in range(S):
                acc += A[i, j] * w[j]
            beta[t, i] = acc
            if want_xi:
                a = alpha[t, i]
                if a != 0.0:
                    for j in range(S):
                        xi[i, j] += a * A[i, j] * w[j]
    return loglik, alpha_arr, beta_arr, scale_arr, xi_arr
