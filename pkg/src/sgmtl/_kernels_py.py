"""Pure-Python coordinate kernels (fallback for the compiled extension).

Must stay algorithmically identical to ``_kernels.pyx``.
"""

import math

import numpy as np

MAX_BACKTRACK = 30
ACCEPT_SLACK = 1e-12


def _softplus(a):
    return np.maximum(a, 0.0) + np.log1p(np.exp(-np.abs(a)))


def w_pass(XT, y, offsets, kinds, sqnorm, curv, W, U, lam, Z, step_scale, literal):
    """One sweep ``t = 0..m-1``, ``j = 0..d-1``; updates ``W`` and ``Z`` in place.

    ``Z`` holds the margins ``X_t @ W[:, t]`` concatenated over tasks.
    Returns the largest absolute coordinate change.
    """
    d, m = W.shape
    N = U.shape[0]
    S = U @ (W * W).T            # S[g, j] = sum_t u[g, t] w[j, t]^2
    R = np.sqrt(S)
    max_change = 0.0
    kap = np.empty(N)
    a = np.empty(N)
    others = np.ones(m, dtype=bool)

    for t in range(m):
        i0, i1 = offsets[t], offsets[t + 1]
        n = i1 - i0
        yt = y[i0:i1]
        zt = Z[i0:i1]
        logistic = kinds[t] == 1
        T = R.sum(axis=1)
        u_t = U[:, t]
        others[t] = False
        Uo = U[:, others]
        for j in range(d):
            w = W[j, t]
            x = XT[j, i0:i1]
            if logistic:
                gL = -float(np.dot(yt * x, np.exp(-_softplus(yt * zt)))) / n
            else:
                gL = float(np.dot(x, zt - yt)) / n

            wo = W[j, others]
            for g in range(N):
                kap[g] = float(np.dot(Uo[g], wo * wo))
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
                u = u_t[g]
                q += lg * u
                qlit += lg
                if kap[g] > 0.0:
                    gsq += 2.0 * lg * a[g] * u * w / math.sqrt(kap[g] + u * w * w)
                else:
                    lbar += 2.0 * lg * a[g] * math.sqrt(u)
            grad = gL + 2.0 * (qlit if literal else q) * w + gsq

            denom = curv[t, j] + 2.0 * q
            eta = step_scale / denom if denom > 0.0 else step_scale
            v = w
            for _ in range(MAX_BACKTRACK + 1):
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
                    dL = float(np.sum(_softplus(-yt * (zt + delta * x)) - _softplus(-yt * zt))) / n
                else:
                    dL = gL * delta + 0.5 * sqnorm[t, j] * delta * delta
                dsm = dL + q * (cand * cand - w * w)
                for g in range(N):
                    lg = lam[g]
                    if lg == 0.0 or kap[g] <= 0.0:
                        continue
                    u = u_t[g]
                    s_new = math.sqrt(kap[g] + u * cand * cand)
                    s_old = math.sqrt(kap[g] + u * w * w)
                    if s_new + s_old > 0.0:
                        dsm += 2.0 * lg * a[g] * u * (cand * cand - w * w) / (s_new + s_old)
                dphi = dsm + lbar * (abs(cand) - abs(w))
                if dphi <= 0.0 and dsm <= grad * delta + delta * delta / (2.0 * eta) + ACCEPT_SLACK:
                    v = cand
                    break
                eta *= 0.5

            if v != w:
                delta = v - w
                W[j, t] = v
                zt += delta * x
                for g in range(N):
                    s_new = kap[g] + u_t[g] * v * v
                    r_new = math.sqrt(s_new)
                    T[g] += r_new - R[g, j]
                    S[g, j] = s_new
                    R[g, j] = r_new
                if abs(delta) > max_change:
                    max_change = abs(delta)
        others[t] = True
    return max_change


def enet_pass(XT, y, w, z, sqnorm, curv, l1, l2, logistic):
    """One elastic-net coordinate sweep; updates ``w`` and margins ``z`` in place.

    Each coordinate minimizes the quadratic majorizer of the loss with
    curvature ``curv[j]`` plus ``l1 |w_j| + l2 w_j**2 / 2``. For squared loss
    ``curv = sqnorm`` and the update is exact.
    """
    d, n = XT.shape
    max_change = 0.0
    for j in range(d):
        x = XT[j]
        if logistic:
            g = -float(np.dot(y * x, np.exp(-_softplus(y * z)))) / n
        else:
            g = float(np.dot(x, z - y)) / n
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
            z += delta * x
            if abs(delta) > max_change:
                max_change = abs(delta)
    return max_change
