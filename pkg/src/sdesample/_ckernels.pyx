# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; see ``_pykernels`` for the contract."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def sde_scan(xs, ys, order, target, alpha, beta):
    cdef const cnp.int64_t[:] cx = np.ascontiguousarray(xs, dtype=np.int64)
    cdef const cnp.int64_t[:] cy = np.ascontiguousarray(ys, dtype=np.int64)
    cdef const cnp.int64_t[:] co = np.ascontiguousarray(order, dtype=np.int64)
    cdef Py_ssize_t n = co.shape[0]
    cdef long long tgt = target
    cdef long long a = alpha
    cdef long long b = beta

    acc = np.empty(n, dtype=np.int64)
    rej = np.empty(n, dtype=np.int64)
    acc_xy = np.empty((n, 2), dtype=np.int64)
    cdef cnp.int64_t[:] vacc = acc
    cdef cnp.int64_t[:] vrej = rej
    cdef cnp.int64_t[:, :] vxy = acc_xy
    cdef Py_ssize_t n_acc = 0, n_rej = 0, i, j
    cdef long long px, py, dx, dy
    cdef cnp.int64_t pos
    cdef bint ok

    if tgt <= 0:
        return acc[:0], rej[:0]

    for i in range(n):
        pos = co[i]
        px = cx[pos]
        py = cy[pos]
        ok = True
        for j in range(n_acc):
            dx = vxy[j, 0] - px
            dy = vxy[j, 1] - py
            if dx < 0:
                dx = -dx
            if dy < 0:
                dy = -dy
            if dx < a or dy < b:
                ok = False
                break
        if ok:
            vxy[n_acc, 0] = px
            vxy[n_acc, 1] = py
            vacc[n_acc] = pos
            n_acc += 1
            if n_acc >= tgt:
                break
        else:
            vrej[n_rej] = pos
            n_rej += 1
    return acc[:n_acc].copy(), rej[:n_rej].copy()


def rbf_cross(a, b, double length_scale, double signal_variance):
    cdef const double[:, :] va = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, :] vb = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = va.shape[0], m = vb.shape[0], i, j
    cdef double scale = -0.5 / (length_scale * length_scale)
    cdef double dx, dy
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, :] vo = out
    for i in range(n):
        for j in range(m):
            dx = va[i, 0] - vb[j, 0]
            dy = va[i, 1] - vb[j, 1]
            vo[i, j] = signal_variance * exp((dx * dx + dy * dy) * scale)
    return out


def sq_dists(a, b):
    cdef const double[:, :] va = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, :] vb = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = va.shape[0], m = vb.shape[0], i, j
    cdef double dx, dy
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, :] vo = out
    for i in range(n):
        for j in range(m):
            dx = va[i, 0] - vb[j, 0]
            dy = va[i, 1] - vb[j, 1]
            vo[i, j] = dx * dx + dy * dy
    return out
