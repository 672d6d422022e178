"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np
from scipy.special import logsumexp


def _quantile_pieces(ma, mb):
    """Split [0, 1] into the q-intervals on which both quantile maps are linear.

    Returns ``(length, qa_mid, qb_mid, slope_a, slope_b)`` per piece, where
    ``qa_mid`` is the a-quantile at the piece midpoint and ``slope_a`` its
    derivative in q.
    """
    ga, gb = len(ma), len(mb)
    ha, hb = 1.0 / (ga - 1), 1.0 / (gb - 1)
    wa = ma / ma.sum()
    wb = mb / mb.sum()
    ca = np.concatenate(([0.0], np.cumsum(wa)))
    cb = np.concatenate(([0.0], np.cumsum(wb)))
    top = min(ca[-1], cb[-1])
    q = np.unique(np.concatenate((ca, cb)))
    q = q[q <= top]
    q0, q1 = q[:-1], q[1:]
    qm = 0.5 * (q0 + q1)
    ia = np.clip(np.searchsorted(ca, qm, side="right") - 1, 0, ga - 1)
    ib = np.clip(np.searchsorted(cb, qm, side="right") - 1, 0, gb - 1)
    sa = ha / wa[ia]
    sb = hb / wb[ib]
    qa = (ia - 0.5) * ha + (qm - ca[ia]) * sa
    qb = (ib - 0.5) * hb + (qm - cb[ib]) * sb
    return q1 - q0, qa, qb, sa, sb


def w2_cells(ma, mb):
    ma = np.asarray(ma, dtype=np.float64)
    mb = np.asarray(mb, dtype=np.float64)
    length, qa, qb, sa, sb = _quantile_pieces(ma, mb)
    d = qa - qb
    s = sa - sb
    return float(np.sum(length * (d * d + s * s * length * length / 12.0)))


def pairwise_w2(a, b, weights, row_start=0, row_stop=-1):
    n, m = a.shape[0], b.shape[0]
    if row_stop < 0:
        row_stop = n
    out = np.zeros((row_stop - row_start, m))
    for i in range(row_start, row_stop):
        for j in range(m):
            acc = 0.0
            for lead in range(a.shape[1]):
                acc += weights[lead] * w2_cells(a[i, lead], b[j, lead])
            out[i - row_start, j] = acc
    return out


def sinkhorn_log(cost, a, b, eps, tol, max_iter, check_every):
    cost = np.asarray(cost, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    loga, logb = np.log(a), np.log(b)
    f = np.zeros(len(a))
    g = np.zeros(len(b))
    checkpoints = []
    it = 0
    while it < max_iter:
        f_new = eps * (loga - logsumexp((g[None, :] - cost) / eps, axis=1))
        viol = np.sum(np.abs(a * np.exp((f - f_new) / eps) - a)) if it > 0 else np.inf
        f = f_new
        g = eps * (logb - logsumexp((f[:, None] - cost) / eps, axis=0))
        it += 1
        if it > 1 and (it - 1) % check_every == 0:
            checkpoints.append(float(viol))
        if it > 1 and viol < tol:
            break
    rows = np.exp(f / eps + logsumexp((g[None, :] - cost) / eps, axis=1))
    return f, g, it, float(np.sum(np.abs(rows - a))), checkpoints
