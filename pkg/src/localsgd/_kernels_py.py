"""numpy fallback for the compiled kernels.

Same contract as ``_kernels.pyx``: identical keyed-noise derivation,
identical pairwise reduction tree, and matching floating-point expression
order, so switching backends does not change results.
"""

from __future__ import annotations

import numpy as np

from . import noise
from .algorithms import pairwise_sum


def gradient_key_batch(seed, t_arr, m_arr):
    return noise.gradient_key_np(np.uint64(seed), np.asarray(t_arr, dtype=np.uint64),
                                 np.asarray(m_arr, dtype=np.uint64))


def hinge_run(L, c, sigma, eta, K, R, M, seeds, x0, minibatch):
    """Local or minibatch SGD on the noisy kinked coordinate; returns (B, R)."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    B = seeds.shape[0]
    out = np.empty((B, R))
    m_idx = np.arange(M, dtype=np.uint64)[:, None]
    xs = np.full(B, float(x0))
    with np.errstate(all="ignore"):
        for r in range(R):
            if minibatch:
                xc = xs - c
                base = L * xc + L * np.maximum(xc, 0.0)
                grads = np.empty((K, M, B))
                for k in range(K):
                    u = noise.gradient_key_np(seeds[None, :], np.uint64(r * K + k), m_idx)
                    z = noise.rademacher_from_u64_np(u) * sigma
                    grads[k] = base[None, :] + z
                gbar = pairwise_sum(grads, 0) / K
                pseudo = xs[None, :] - eta * gbar
                xs = pairwise_sum(pseudo, 0) / M
            else:
                x = np.broadcast_to(xs, (M, B)).copy()
                for k in range(K):
                    u = noise.gradient_key_np(seeds[None, :], np.uint64(r * K + k), m_idx)
                    z = noise.rademacher_from_u64_np(u) * sigma
                    xc = x - c
                    g = L * xc + L * np.maximum(xc, 0.0) + z
                    x = x - eta * g
                xs = pairwise_sum(x, 0) / M
            out[:, r] = xs
    return out


def logistic_run(X, y, eta, K, R, M, seeds, w0, minibatch):
    """Local or minibatch SGD on mean logistic loss; returns (B, R, d+1)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    seeds = np.asarray(seeds, dtype=np.uint64)
    w0 = np.asarray(w0, dtype=np.float64)
    n, d = X.shape
    p = d + 1
    if w0.shape != (p,):
        raise ValueError("w0 must have length d + 1")
    B = seeds.shape[0]
    out = np.empty((B, R, p))
    m_idx = np.arange(M, dtype=np.uint64)[:, None]
    wsh = np.tile(w0, (B, 1))
    with np.errstate(all="ignore"):
        for r in range(R):
            if minibatch:
                gk = np.empty((K, M, B, p))
                for k in range(K):
                    u = noise.gradient_key_np(seeds[None, :], np.uint64(r * K + k), m_idx)
                    idx = noise.index_from_u64_np(u, n)
                    phi = X[idx]                       # (M, B, d)
                    s = np.zeros((M, B))
                    for j in range(d):
                        s = s + wsh[None, :, j] * phi[:, :, j]
                    s = s + wsh[None, :, d]
                    yv = y[idx]
                    coef = -yv / (1.0 + np.exp(yv * s))
                    gk[k, :, :, :d] = coef[..., None] * phi
                    gk[k, :, :, d] = coef
                gbar = pairwise_sum(gk, 0) / K          # (M, B, p)
                pseudo = wsh[None, :, :] - eta * gbar
                wsh = pairwise_sum(pseudo, 0) / M
            else:
                w = np.broadcast_to(wsh, (M, B, p)).copy()
                for k in range(K):
                    u = noise.gradient_key_np(seeds[None, :], np.uint64(r * K + k), m_idx)
                    idx = noise.index_from_u64_np(u, n)
                    phi = X[idx]
                    s = np.zeros((M, B))
                    for j in range(d):
                        s = s + w[:, :, j] * phi[:, :, j]
                    s = s + w[:, :, d]
                    yv = y[idx]
                    coef = -yv / (1.0 + np.exp(yv * s))
                    ec = eta * coef
                    for j in range(d):
                        w[:, :, j] = w[:, :, j] - ec * phi[:, :, j]
                    w[:, :, d] = w[:, :, d] - eta * coef
                wsh = pairwise_sum(w, 0) / M
            out[:, r, :] = wsh
    return out
