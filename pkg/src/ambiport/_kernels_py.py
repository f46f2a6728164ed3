"""Numpy implementation of the Gaussian-smoothing kernel.

Reference backend; ``_kernels.pyx`` mirrors it node for node.

For every centre ``y`` the kernel integrates, over ``x`` in
``[y - halfwidth, y + halfwidth]`` split at ``cuts`` and then into panels no
wider than ``panel``, the Gaussian weight ``phi_var(x - y)`` against

    col 0  X(c / F(T, x))                         (claim value)
    col 1  F(T, x) * u(g(X(c / F(T, x))))          (P-expected utility)
    col 2  d/dx of col 0 away from the jumps      (classical gradient)
    col 3  X(c / F(T, x)) * (x - y) / var          (Gaussian-score gradient)

``want`` is a bitmask selecting the columns.  ``c = exp(logc)``.
"""

from __future__ import annotations

import math

import numpy as np

CHUNK = 2048


def _integrand(x, y, var, thetas, logp, T, logc, alpha, delta, K, C, log_yhat, linear, want):
    expo = logp[:, None] + thetas[:, None] * x[None, :] - (0.5 * T) * (thetas * thetas)[:, None]
    mx = expo.max(axis=0)
    ex = np.exp(expo - mx)
    tot = ex.sum(axis=0)
    logF = mx + np.log(tot)
    ly = logc - logF
    inv = 1.0 / (alpha - 1.0)
    d = x - y
    quad = d * d / (2.0 * var)
    norm = 1.0 / math.sqrt(2.0 * math.pi * var)
    phi = np.exp(-quad) * norm

    if linear:
        ival = np.exp(ly * inv)
        X = ival
        interior = np.ones(x.shape, dtype=bool)
        lg = ly
    else:
        interior = ly < log_yhat
        lg = ly - math.log(delta)
        ival = np.where(interior, np.exp(np.where(interior, lg, 0.0) * inv), 0.0)
        X = np.where(interior, (ival - C) / delta + K, 0.0)

    cols = [None, None, None, None]
    if want & 1:
        cols[0] = X * phi
    if want & 2:
        if linear:
            ug = np.exp(alpha * inv * lg) / alpha
        else:
            ug = np.where(interior, np.exp(alpha * inv * np.where(interior, lg, 0.0)) / alpha,
                          C ** alpha / alpha)
        cols[1] = np.exp(logF - quad) * norm * ug
    if want & 4:
        that = (thetas[:, None] * ex).sum(axis=0) / tot
        cols[2] = np.where(interior, ival * that / (delta * (1.0 - alpha)), 0.0) * phi
    if want & 8:
        cols[3] = X * d / var * phi
    return cols


def integrate(centers, var, halfwidth, cuts, panel, gx, gw, thetas, logp, T, logc,
              alpha, delta, K, C, log_yhat, linear, want):
    centers = np.ascontiguousarray(centers, dtype=float).ravel()
    cuts = np.sort(np.asarray(cuts, dtype=float).ravel())
    gx = np.asarray(gx, dtype=float)
    gw = np.asarray(gw, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    logp = np.asarray(logp, dtype=float)
    tk = 0.5 * (gx + 1.0)
    n = centers.size
    out = np.zeros((n, 4))
    for start in range(0, n, CHUNK):
        y = centers[start:start + CHUNK]
        lo = y - halfwidth
        hi = y + halfwidth
        inner = np.clip(cuts[None, :], lo[:, None], hi[:, None])
        bounds = np.concatenate([lo[:, None], inner, hi[:, None]], axis=1)
        a = bounds[:, :-1]
        length = bounds[:, 1:] - a
        npan = np.maximum(1.0, np.ceil(length / panel))
        h = length / npan
        M = int(npan.max())
        j = np.arange(M, dtype=float)
        x = a[:, :, None, None] + (j[None, None, :, None] + tk[None, None, None, :]) * h[:, :, None, None]
        live = (j[None, None, :, None] < npan[:, :, None, None]) & (length[:, :, None, None] > 0)
        w = np.where(live, (0.5 * gw)[None, None, None, :] * h[:, :, None, None], 0.0)
        shape = x.shape
        yy = np.broadcast_to(y[:, None, None, None], shape).ravel()
        xs = np.where(live, x, y[:, None, None, None]).ravel()
        cols = _integrand(xs, yy, var, thetas, logp, T, logc, alpha, delta, K, C,
                          log_yhat, linear, want)
        wf = w.ravel()
        for k, col in enumerate(cols):
            if col is not None:
                out[start:start + y.size, k] = (col * wf).reshape(shape).sum(axis=(1, 2, 3))
    return out
