# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled coordinate kernels. Mirrors ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, log1p, fabs

cnp.import_array()

cdef enum:
    MAX_BACKTRACK = 30

cdef double ACCEPT_SLACK = 1e-12


cdef inline double _softplus(double a) nogil:
    if a > 0:
        return a + log1p(exp(-a))
    return log1p(exp(a))


def w_pass(const double[:, ::1] XT, const double[::1] y, const cnp.int64_t[::1] offsets,
           const int[::1] kinds, const double[:, ::1] sqnorm, const double[:, ::1] curv,
           double[:, ::1] W, const double[:, ::1] U, const double[::1] lam, double[::1] Z,
           double step_scale, bint literal):
    cdef Py_ssize_t d = W.shape[0]
    cdef Py_ssize_t m = W.shape[1]
    cdef Py_ssize_t N = U.shape[0]
    cdef Py_ssize_t t, j, g, i, tt, k, i0, i1, n
    cdef double w, gL, q, qlit, gsq, lbar, grad, denom, eta, v, c, thr, cand
    cdef double delta, dL, dsm, dphi, s_new, s_old, lg, u, acc, ag, wo, yi, zi
    cdef bint logistic
    cdef double max_change = 0.0

    cdef double[:, ::1] S = np.empty((N, d))
    cdef double[:, ::1] R = np.empty((N, d))
    cdef double[::1] T = np.empty(N)
    cdef double[::1] kap = np.empty(N)
    cdef double[::1] a = np.empty(N)

    with nogil:
        for g in range(N):
            for j in range(d):
                acc = 0.0
                for tt in range(m):
                    acc = acc + U[g, tt] * W[j, tt] * W[j, tt]
                S[g, j] = acc
                R[g, j] = sqrt(acc)

        for t in range(m):
            i0 = offsets[t]
            i1 = offsets[t + 1]
            n = i1 - i0
            logistic = kinds[t] == 1
            for g in range(N):
                acc = 0.0
                for j in range(d):
                    acc = acc + R[g, j]
                T[g] = acc

            for j in range(d):
                w = W[j, t]
                gL = 0.0
                if logistic:
                    for i in range(i0, i1):
                        yi = y[i]
                        gL = gL - yi * XT[j, i] * exp(-_softplus(yi * Z[i]))
                else:
                    for i in range(i0, i1):
                        gL = gL + XT[j, i] * (Z[i] - y[i])
                gL = gL / n

                for g in range(N):
                    acc = 0.0
                    for tt in range(m):
                        if tt != t:
                            wo = W[j, tt]
                            acc = acc + U[g, tt] * (wo * wo)
                    kap[g] = acc
                    ag = T[g] - R[g, j]
                    a[g] = ag if ag > 0.0 else 0.0

                q = 0.0
                qlit = 0.0
                gsq = 0.0
                lbar = 0.0
                for g in range(N):
                    lg = lam[g]
                    if lg == 0.0:
                        continue
                    u = U[g, t]
                    q = q + lg * u
                    qlit = qlit + lg
                    if kap[g] > 0.0:
                        gsq = gsq + 2.0 * lg * a[g] * u * w / sqrt(kap[g] + u * w * w)
                    else:
                        lbar = lbar + 2.0 * lg * a[g] * sqrt(u)
                if literal:
                    grad = gL + 2.0 * qlit * w + gsq
                else:
                    grad = gL + 2.0 * q * w + gsq

                denom = curv[t, j] + 2.0 * q
                if denom > 0.0:
                    eta = step_scale / denom
                else:
                    eta = step_scale
                v = w
                for k in range(MAX_BACKTRACK + 1):
                    c = w - eta * grad
                    thr = eta * lbar
                    if c > thr:
                        cand = c - thr
                    elif c < -thr:
                        cand = c + thr
                    else:
                        cand = 0.0
                    delta = cand - w
                    if delta == 0.0:
                        break
                    if logistic:
                        dL = 0.0
                        for i in range(i0, i1):
                            yi = y[i]
                            zi = Z[i]
                            dL = dL + (_softplus(-yi * (zi + delta * XT[j, i])) - _softplus(-yi * zi))
                        dL = dL / n
                    else:
                        dL = gL * delta + 0.5 * sqnorm[t, j] * delta * delta
                    dsm = dL + q * (cand * cand - w * w)
                    for g in range(N):
                        lg = lam[g]
                        if lg == 0.0 or kap[g] <= 0.0:
                            continue
                        u = U[g, t]
                        s_new = sqrt(kap[g] + u * cand * cand)
                        s_old = sqrt(kap[g] + u * w * w)
                        if s_new + s_old > 0.0:
                            dsm = dsm + 2.0 * lg * a[g] * u * (cand * cand - w * w) / (s_new + s_old)
                    dphi = dsm + lbar * (fabs(cand) - fabs(w))
                    if dphi <= 0.0 and dsm <= grad * delta + delta * delta / (2.0 * eta) + ACCEPT_SLACK:
                        v = cand
                        break
                    eta = eta * 0.5

                if v != w:
                    delta = v - w
                    W[j, t] = v
                    for i in range(i0, i1):
                        Z[i] = Z[i] + delta * XT[j, i]
                    for g in range(N):
                        s_new = kap[g] + U[g, t] * v * v
                        s_old = sqrt(s_new)
                        T[g] = T[g] + (s_old - R[g, j])
                        S[g, j] = s_new
                        R[g, j] = s_old
                    if fabs(delta) > max_change:
                        max_change = fabs(delta)
    return max_change


def enet_pass(const double[:, ::1] XT, const double[::1] y, double[::1] w, double[::1] z,
              const double[::1] sqnorm, const double[::1] curv, double l1, double l2, bint logistic):
    cdef Py_ssize_t d = XT.shape[0]
    cdef Py_ssize_t n = XT.shape[1]
    cdef Py_ssize_t i, j
    cdef double g, c, denom, b, new, delta, yi
    cdef double max_change = 0.0
    with nogil:
        for j in range(d):
            g = 0.0
            if logistic:
                for i in range(n):
                    yi = y[i]
                    g = g - yi * XT[j, i] * exp(-_softplus(yi * z[i]))
            else:
                for i in range(n):
                    g = g + XT[j, i] * (z[i] - y[i])
            g = g / n
            c = curv[j]
            denom = c + l2
            if denom <= 0.0:
                continue
            b = c * w[j] - g
            if b > l1:
                new = (b - l1) / denom
            elif b < -l1:
                new = (b + l1) / denom
            else:
                new = 0.0
            delta = new - w[j]
            if delta != 0.0:
                w[j] = new
                for i in range(n):
                    z[i] = z[i] + delta * XT[j, i]
                if fabs(delta) > max_change:
                    max_change = fabs(delta)
    return max_change
