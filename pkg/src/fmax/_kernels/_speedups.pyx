# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of fmax._kernels.pure.

Semantics and accumulation orders are documented there; the loops here
replay them term by term so both backends return bit-identical float64
results (the build disables fused multiply-adds for the same reason).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "cython"


def w_matrix(Py_ssize_t m):
    out_arr = np.empty((m, m), dtype=np.float64)
    cdef double[:, ::1] w = out_arr
    cdef Py_ssize_t s, k
    for s in range(m):
        for k in range(m):
            w[s, k] = 2.0 / <double>(s + k + 2)
    return out_arr


def delta_batch(p_in):
    p_arr = np.ascontiguousarray(p_in, dtype=np.float64)
    cdef double[:, :, ::1] p = p_arr
    cdef Py_ssize_t b = p.shape[0]
    cdef Py_ssize_t m = p.shape[1]
    out_arr = np.zeros((b, m, m), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] w = w_matrix(m)
    cdef Py_ssize_t t, i, k, s
    cdef double acc
    for t in range(b):
        for i in range(m):
            for k in range(m):
                acc = 0.0
                for s in range(m):
                    acc += p[t, i, s] * w[s, k]
                out[t, i, k] = acc
    return out_arr


def gfm_batch(p_in, p_zero_in):
    p_arr = np.ascontiguousarray(p_in, dtype=np.float64)
    pz_arr = np.ascontiguousarray(p_zero_in, dtype=np.float64)
    cdef double[:, :, ::1] p = p_arr
    cdef double[::1] pz = pz_arr
    cdef Py_ssize_t b = p.shape[0]
    cdef Py_ssize_t m = p.shape[1]
    cdef double[:, :, ::1] delta = delta_batch(p_arr)
    h_arr = np.zeros((b, m), dtype=np.uint8)
    val_arr = np.empty(b, dtype=np.float64)
    cdef unsigned char[:, ::1] h = h_arr
    cdef double[::1] val = val_arr
    cdef Py_ssize_t[::1] order = np.empty(max(m, 1), dtype=np.intp)
    cdef Py_ssize_t t, i, j, k, r
    cdef double v, acc, best
    for t in range(b):
        best = pz[t]
        for k in range(m):
            # Stable insertion sort of labels by descending gain: ties
            # stay in ascending label order, matching the fallback's
            # stable argsort.
            for i in range(m):
                v = delta[t, i, k]
                j = i
                while j > 0 and delta[t, order[j - 1], k] < v:
                    order[j] = order[j - 1]
                    j -= 1
                order[j] = i
            acc = 0.0
            for r in range(k + 1):
                acc += delta[t, order[r], k]
            # Strict improvement keeps the smaller prediction size on
            # ties, with the empty prediction considered first.
            if acc > best:
                best = acc
                for i in range(m):
                    h[t, i] = 0
                for r in range(k + 1):
                    h[t, order[r]] = 1
        val[t] = best
    return h_arr, val_arr


def recover_d_batch(p_in):
    p_arr = np.ascontiguousarray(p_in, dtype=np.float64)
    cdef double[:, :, ::1] p = p_arr
    cdef Py_ssize_t b = p.shape[0]
    cdef Py_ssize_t m = p.shape[1]
    d_arr = np.zeros((b, m + 1), dtype=np.float64)
    cdef double[:, ::1] d = d_arr
    cdef Py_ssize_t t, i, s
    cdef double acc, total
    for t in range(b):
        if m == 0:
            d[t, 0] = 1.0
            continue
        for s in range(1, m + 1):
            acc = p[t, 0, s - 1]
            for i in range(1, m):
                acc = acc + p[t, i, s - 1]
            d[t, s] = acc / <double>s
        total = d[t, 1]
        for s in range(2, m + 1):
            total = total + d[t, s]
        d[t, 0] = 1.0 - total
    return d_arr


def merge_batch(p1_in, d1_in, p2_in, d2_in):
    p1_arr = np.ascontiguousarray(p1_in, dtype=np.float64)
    p2_arr = np.ascontiguousarray(p2_in, dtype=np.float64)
    d1_arr = np.ascontiguousarray(d1_in, dtype=np.float64)
    d2_arr = np.ascontiguousarray(d2_in, dtype=np.float64)
    cdef double[:, :, ::1] p1 = p1_arr
    cdef double[:, :, ::1] p2 = p2_arr
    cdef double[:, ::1] d1 = d1_arr
    cdef double[:, ::1] d2 = d2_arr
    cdef Py_ssize_t b = d1.shape[0]
    cdef Py_ssize_t m1 = d1.shape[1] - 1
    cdef Py_ssize_t m2 = d2.shape[1] - 1
    cdef Py_ssize_t m = m1 + m2
    out_arr = np.zeros((b, m, m), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t t, s1, s2, c, i
    cdef double f
    for t in range(b):
        for s1 in range(1, m1 + 1):
            for s2 in range(m2 + 1):
                c = s1 + s2 - 1
                f = d2[t, s2]
                for i in range(m1):
                    out[t, i, c] += p1[t, i, s1 - 1] * f
        for s1 in range(1, m2 + 1):
            for s2 in range(m1 + 1):
                c = s1 + s2 - 1
                f = d1[t, s2]
                for i in range(m2):
                    out[t, m1 + i, c] += p2[t, i, s1 - 1] * f
    return out_arr
