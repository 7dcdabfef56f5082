# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loops for the two Monte-Carlo-heavy problem families.

These mirror ``_kernels_py`` exactly: same keyed-noise derivation (see
``noise.py``), same fixed-order pairwise machine reduction, same floating
point expression order (the extension is compiled with -ffp-contract=off so
no FMA contraction changes results).  One call simulates a whole batch of
replications for one stepsize; batch entries are independent, so the loop
over them is OpenMP-parallel.
"""

import numpy as np

from cython.parallel cimport prange
from libc.math cimport exp
from libc.stdlib cimport free, malloc

ctypedef unsigned long long u64

cdef u64 _GOLDEN = 0x9E3779B97F4A7C15ULL
cdef u64 _MIX_A = 0xBF58476D1CE4E5B9ULL
cdef u64 _MIX_B = 0x94D049BB133111EBULL
cdef u64 _STEP_SALT = 0xA3EC647659359ACDULL
cdef u64 _MACHINE_MULT = 0xC2B2AE3D27D4EB4FULL


cdef inline u64 _mix64(u64 x) noexcept nogil:
    x = (x ^ (x >> 30)) * _MIX_A
    x = (x ^ (x >> 27)) * _MIX_B
    return x ^ (x >> 31)


cdef inline u64 _gradient_key(u64 seed, u64 t, u64 m) noexcept nogil:
    cdef u64 h = _mix64((seed ^ _STEP_SALT) + _GOLDEN * t)
    return _mix64(h + _MACHINE_MULT * m)


cdef inline double _sign_from(u64 u) noexcept nogil:
    return 1.0 - 2.0 * <double>(u >> 63)


cdef inline double _pairwise(double* buf, Py_ssize_t n) noexcept nogil:
    # adjacent-pairing tree, identical to algorithms.pairwise_sum
    cdef Py_ssize_t half, i
    while n > 1:
        half = n / 2
        for i in range(half):
            buf[i] = buf[2 * i] + buf[2 * i + 1]
        if n & 1:
            buf[half] = buf[n - 1]
            n = half + 1
        else:
            n = half
    return buf[0]


def gradient_key_batch(u64 seed, object t_arr, object m_arr):
    """Key derivation exposed for cross-implementation tests."""
    cdef Py_ssize_t i
    t_np = np.ascontiguousarray(t_arr, dtype=np.uint64)
    m_np = np.ascontiguousarray(m_arr, dtype=np.uint64)
    out_np = np.empty(t_np.shape[0], dtype=np.uint64)
    cdef u64[::1] t = t_np
    cdef u64[::1] m = m_np
    cdef u64[::1] out = out_np
    for i in range(t.shape[0]):
        out[i] = _gradient_key(seed, t[i], m[i])
    return out_np


def hinge_run(double L, double c, double sigma, double eta,
              Py_ssize_t K, Py_ssize_t R, Py_ssize_t M,
              object seeds_arr, double x0, bint minibatch):
    """Local or minibatch SGD on the noisy kinked coordinate.

    Returns (B, R): the machine-averaged coordinate after each round for
    every replication seed.
    """
    seeds_np = np.ascontiguousarray(seeds_arr, dtype=np.uint64)
    cdef u64[::1] seeds = seeds_np
    cdef Py_ssize_t B = seeds.shape[0]
    out_np = np.empty((B, R), dtype=np.float64)
    cdef double[:, ::1] out = out_np
    cdef Py_ssize_t b, r, k, m
    cdef u64 u, t, seed
    cdef double x, xs, xc, relu, g, z
    cdef double* bufm
    cdef double* bufk

    for b in prange(B, nogil=True, schedule="static"):
        bufm = <double*>malloc(M * sizeof(double))
        bufk = NULL
        if minibatch:
            bufk = <double*>malloc(K * sizeof(double))
        seed = seeds[b]
        xs = x0
        for r in range(R):
            if minibatch:
                for m in range(M):
                    xc = xs - c
                    relu = xc if xc > 0.0 else 0.0
                    for k in range(K):
                        t = r * K + k
                        u = _gradient_key(seed, t, m)
                        z = _sign_from(u) * sigma
                        bufk[k] = L * xc + L * relu + z
                    g = _pairwise(bufk, K) / K
                    bufm[m] = xs - eta * g
            else:
                for m in range(M):
                    x = xs
                    for k in range(K):
                        t = r * K + k
                        u = _gradient_key(seed, t, m)
                        z = _sign_from(u) * sigma
                        xc = x - c
                        relu = xc if xc > 0.0 else 0.0
                        g = L * xc + L * relu + z
                        x = x - eta * g
                    bufm[m] = x
            xs = _pairwise(bufm, M) / M
            out[b, r] = xs
        free(bufm)
        if minibatch:
            free(bufk)
    return out_np


def logistic_run(object X_arr, object y_arr, double eta,
                 Py_ssize_t K, Py_ssize_t R, Py_ssize_t M,
                 object seeds_arr, object w0_arr, bint minibatch):
    """Local or minibatch SGD on mean logistic loss (linear model with bias).

    X is (n, d) features, y is (n,) labels in {-1, +1}, w0 is the (d+1,)
    initial parameter (bias last).  Returns (B, R, d+1) round-averaged
    parameters.  The dot products and updates run in coordinate order so the
    numpy twin can reproduce them exactly.
    """
    X_np = np.ascontiguousarray(X_arr, dtype=np.float64)
    y_np = np.ascontiguousarray(y_arr, dtype=np.float64)
    seeds_np = np.ascontiguousarray(seeds_arr, dtype=np.uint64)
    w0_np = np.ascontiguousarray(w0_arr, dtype=np.float64)
    cdef double[:, ::1] X = X_np
    cdef double[::1] y = y_np
    cdef u64[::1] seeds = seeds_np
    cdef double[::1] w0 = w0_np
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t p = d + 1
    cdef Py_ssize_t B = seeds.shape[0]
    if w0.shape[0] != p:
        raise ValueError("w0 must have length d + 1")
    out_np = np.empty((B, R, p), dtype=np.float64)
    cdef double[:, :, ::1] out = out_np
    cdef Py_ssize_t b, r, k, m, j, idx
    cdef u64 u, t, seed
    cdef double s, coef, yv, g
    cdef double* wsh
    cdef double* wm        # (M, p) machine states / pseudo-iterates
    cdef double* gk        # (K, p) per-step gradients for the minibatch mean
    cdef double* red       # scratch for pairwise reductions

    for b in prange(B, nogil=True, schedule="static"):
        wsh = <double*>malloc(p * sizeof(double))
        wm = <double*>malloc(M * p * sizeof(double))
        red = <double*>malloc((M if M > K else K) * sizeof(double))
        gk = NULL
        if minibatch:
            gk = <double*>malloc(K * p * sizeof(double))
        seed = seeds[b]
        for j in range(p):
            wsh[j] = w0[j]
        for r in range(R):
            for m in range(M):
                for j in range(p):
                    wm[m * p + j] = wsh[j]
                if minibatch:
                    for k in range(K):
                        t = r * K + k
                        u = _gradient_key(seed, t, m)
                        idx = <Py_ssize_t>(u % <u64>n)
                        s = 0.0
                        for j in range(d):
                            s = s + wsh[j] * X[idx, j]
                        s = s + wsh[d]
                        yv = y[idx]
                        coef = -yv / (1.0 + exp(yv * s))
                        for j in range(d):
                            gk[k * p + j] = coef * X[idx, j]
                        gk[k * p + d] = coef
                    for j in range(p):
                        for k in range(K):
                            red[k] = gk[k * p + j]
                        g = _pairwise(red, K) / K
                        wm[m * p + j] = wm[m * p + j] - eta * g
                else:
                    for k in range(K):
                        t = r * K + k
                        u = _gradient_key(seed, t, m)
                        idx = <Py_ssize_t>(u % <u64>n)
                        s = 0.0
                        for j in range(d):
                            s = s + wm[m * p + j] * X[idx, j]
                        s = s + wm[m * p + d]
                        yv = y[idx]
                        coef = -yv / (1.0 + exp(yv * s))
                        for j in range(d):
                            wm[m * p + j] = wm[m * p + j] - eta * coef * X[idx, j]
                        wm[m * p + d] = wm[m * p + d] - eta * coef
            for j in range(p):
                for m in range(M):
                    red[m] = wm[m * p + j]
                wsh[j] = _pairwise(red, M) / M
                out[b, r, j] = wsh[j]
        free(wsh)
        free(wm)
        free(red)
        if minibatch:
            free(gk)
    return out_np
