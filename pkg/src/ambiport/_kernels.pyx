# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Gaussian-smoothing kernel; same contract as ``_kernels_py.integrate``."""

import numpy as np

from libc.math cimport exp, log, sqrt, ceil, M_PI


def integrate(centers, double var, double halfwidth, cuts, double panel, gx, gw,
              thetas, logp, double T, double logc, double alpha, double delta,
              double K, double C, double log_yhat, bint linear, int want):
    cdef const double[::1] yv = np.ascontiguousarray(centers, dtype=np.float64).ravel()
    cdef const double[::1] cv = np.ascontiguousarray(np.sort(np.asarray(cuts, dtype=np.float64).ravel()))
    cdef const double[::1] gxv = np.ascontiguousarray(gx, dtype=np.float64)
    cdef const double[::1] gwv = np.ascontiguousarray(gw, dtype=np.float64)
    cdef const double[::1] th = np.ascontiguousarray(thetas, dtype=np.float64)
    cdef const double[::1] lp = np.ascontiguousarray(logp, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0], ncut = cv.shape[0], nn = gxv.shape[0], na = th.shape[0]
    out_arr = np.zeros((n, 4), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef const double[::1] tk = np.ascontiguousarray(0.5 * (np.asarray(gx, dtype=np.float64) + 1.0))
    cdef const double[::1] half_w = np.ascontiguousarray(0.5 * np.asarray(gw, dtype=np.float64))
    cdef double[::1] bounds = np.empty(ncut + 2, dtype=np.float64)
    cdef double[::1] expo = np.empty(max(na, 1), dtype=np.float64)

    cdef Py_ssize_t i, k, j, q, a_i, nb
    cdef double y, lo, hi, a, b, length, npan, h, x, wt
    cdef double mx, tot, tsum, logF, ly, lg, ival, X, d, quad, phi, ug
    cdef double inv = 1.0 / (alpha - 1.0)
    cdef double norm = 1.0 / sqrt(2.0 * M_PI * var)
    cdef double logdelta = log(delta)
    cdef double uC = 0.0
    cdef double s0, s1, s2, s3
    cdef bint interior
    if not linear:
        uC = exp(alpha * log(C)) / alpha

    with nogil:
        for i in range(n):
            y = yv[i]
            lo = y - halfwidth
            hi = y + halfwidth
            bounds[0] = lo
            nb = 1
            for k in range(ncut):
                if cv[k] < lo:
                    bounds[nb] = lo
                elif cv[k] > hi:
                    bounds[nb] = hi
                else:
                    bounds[nb] = cv[k]
                nb += 1
            bounds[nb] = hi
            nb += 1
            s0 = 0.0
            s1 = 0.0
            s2 = 0.0
            s3 = 0.0
            for k in range(nb - 1):
                a = bounds[k]
                b = bounds[k + 1]
                length = b - a
                if length <= 0.0:
                    continue
                npan = ceil(length / panel)
                if npan < 1.0:
                    npan = 1.0
                h = length / npan
                for j in range(<Py_ssize_t>npan):
                    for q in range(nn):
                        x = a + (j + tk[q]) * h
                        wt = half_w[q] * h
                        mx = -1e308
                        for a_i in range(na):
                            expo[a_i] = lp[a_i] + th[a_i] * x - (0.5 * T) * (th[a_i] * th[a_i])
                            if expo[a_i] > mx:
                                mx = expo[a_i]
                        tot = 0.0
                        tsum = 0.0
                        for a_i in range(na):
                            expo[a_i] = exp(expo[a_i] - mx)
                            tot = tot + expo[a_i]
                            tsum = tsum + th[a_i] * expo[a_i]
                        logF = mx + log(tot)
                        ly = logc - logF
                        d = x - y
                        quad = d * d / (2.0 * var)
                        phi = exp(-quad) * norm
                        if linear:
                            interior = True
                            lg = ly
                            ival = exp(ly * inv)
                            X = ival
                        else:
                            interior = ly < log_yhat
                            lg = ly - logdelta
                            if interior:
                                ival = exp(lg * inv)
                                X = (ival - C) / delta + K
                            else:
                                ival = 0.0
                                X = 0.0
                        if want & 1:
                            s0 = s0 + X * phi * wt
                        if want & 2:
                            if interior:
                                ug = exp(alpha * inv * lg) / alpha
                            else:
                                ug = uC
                            s1 = s1 + exp(logF - quad) * norm * ug * wt
                        if want & 4:
                            if interior:
                                s2 = s2 + ival * (tsum / tot) / (delta * (1.0 - alpha)) * phi * wt
                        if want & 8:
                            s3 = s3 + X * d / var * phi * wt
            out[i, 0] = s0
            out[i, 1] = s1
            out[i, 2] = s2
            out[i, 3] = s3
    return out_arr
