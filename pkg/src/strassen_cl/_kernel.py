"""Compiled inner loop for online training.

Same arithmetic as :func:`strassen_cl.cl_update.conservative_update`, applied
in place to a batch of items.  Keep the two in sync; tests compare them.
"""

import numba
import numpy as np

MODE_CG1 = 0
MODE_DIAG = 1


@numba.njit(cache=True, fastmath=False)
def train_batch(W_a, W_b, W_c, a_batch, b_batch, c_batch, mode, delta_floor, curv_floor):
    """Apply one update per row of the item batches.  Returns the skip count."""
    k, m = a_batch.shape
    r = W_a.shape[0]
    a_star = np.empty(r)
    b_star = np.empty(r)
    c_star = np.empty(r)
    g = np.empty(r)
    delta = np.empty(m)
    skips = 0
    for t in range(k):
        a = a_batch[t]
        b = b_batch[t]
        c = c_batch[t]
        cc = 0.0
        for j in range(r):
            sa = 0.0
            sb = 0.0
            for i in range(m):
                sa += W_a[j, i] * a[i]
                sb += W_b[j, i] * b[i]
            a_star[j] = sa
            b_star[j] = sb
            c_star[j] = sa * sb
            cc += c_star[j] * c_star[j]
        dd = 0.0
        for i in range(m):
            s = 0.0
            for j in range(r):
                s += W_c[i, j] * c_star[j]
            delta[i] = c[i] - s
            dd += delta[i] * delta[i]
        if dd <= delta_floor:
            skips += 1
            continue
        # g = W_c^T delta; gamma = lam * delta, so W_c^T gamma = lam * g
        for j in range(r):
            s = 0.0
            for i in range(m):
                s += W_c[i, j] * delta[i]
            g[j] = s
        if mode == MODE_CG1:
            curv = 0.0
            for j in range(r):
                curv += (a_star[j] * a_star[j] + b_star[j] * b_star[j]) * g[j] * g[j]
            dGd = cc * dd + curv
            if dGd <= curv_floor * dd:
                skips += 1
                continue
            lam = dd / dGd
        else:
            if cc <= curv_floor:
                skips += 1
                continue
            lam = 1.0 / cc
        for j in range(r):
            gj = lam * g[j]
            alpha = b_star[j] * gj
            beta = a_star[j] * gj
            for i in range(m):
                W_a[j, i] += alpha * a[i]
                W_b[j, i] += beta * b[i]
        for i in range(m):
            gamma_i = lam * delta[i]
            for j in range(r):
                W_c[i, j] += gamma_i * c_star[j]
    return skips
