"""Pure-numpy implementations of the hot kernels.

Behaviourally identical to the compiled ``_ckernels`` module; used when the
extension is not built or when ``SDESAMPLE_PURE_PYTHON=1`` is set.
"""
import numpy as np


def sde_scan(xs, ys, order, target, alpha, beta):
    """Phase-1 elimination scan over candidates visited in ``order``.

    A candidate is accepted iff ``|dx| >= alpha and |dy| >= beta`` against every
    previously accepted point.  The scan stops once ``target`` points are
    accepted.

    Returns
    -------
    accepted, rejected : ndarray of int64
        Pool positions in acceptance order and in rejection order.
    """
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    order = np.asarray(order, dtype=np.int64)
    target = int(target)
    n = order.shape[0]

    acc_x = np.empty(n, dtype=np.int64)
    acc_y = np.empty(n, dtype=np.int64)
    accepted = np.empty(n, dtype=np.int64)
    rejected = np.empty(n, dtype=np.int64)
    n_acc = 0
    n_rej = 0
    if target <= 0:
        return accepted[:0], rejected[:0]

    for pos in order:
        cx = xs[pos]
        cy = ys[pos]
        if n_acc:
            close = (np.abs(acc_x[:n_acc] - cx) < alpha) | (np.abs(acc_y[:n_acc] - cy) < beta)
            if close.any():
                rejected[n_rej] = pos
                n_rej += 1
                continue
        acc_x[n_acc] = cx
        acc_y[n_acc] = cy
        accepted[n_acc] = pos
        n_acc += 1
        if n_acc >= target:
            break
    return accepted[:n_acc].copy(), rejected[:n_rej].copy()


def rbf_cross(a, b, length_scale, signal_variance):
    """RBF covariance between the rows of ``a`` (n, 2) and ``b`` (m, 2)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    dx = a[:, 0:1] - b[None, :, 0]
    dy = a[:, 1:2] - b[None, :, 1]
    sq = dx * dx + dy * dy
    return signal_variance * np.exp(sq * (-0.5 / (length_scale * length_scale)))


def sq_dists(a, b):
    """Squared Euclidean distances between the rows of ``a`` and ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    dx = a[:, 0:1] - b[None, :, 0]
    dy = a[:, 1:2] - b[None, :, 1]
    return dx * dx + dy * dy
