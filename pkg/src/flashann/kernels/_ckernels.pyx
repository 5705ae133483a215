# cython: boundscheck=False, wraparound=False, cdivision=True
"""Hot inner loops: pairwise distances and PQ lookup-table scans.

Arithmetic contract shared with the NumPy fallback: float32 inputs, float64
accumulation in ascending index order (float32 accumulation for the table
scan), one rounding to float32 at the end.  Built with -ffp-contract=off so
the bits match the fallback exactly.
"""

import numpy as np

cimport numpy as cnp


def pairwise_sqeuclidean(const float[:, ::1] a, const float[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], d = a.shape[1]
    if b.shape[1] != d:
        raise ValueError("dimension mismatch")
    out = np.empty((n, m), dtype=np.float32)
    cdef float[:, ::1] ov = out
    cdef Py_ssize_t i, k, j
    cdef double acc, diff
    with nogil:
        for i in range(n):
            for k in range(m):
                acc = 0.0
                for j in range(d):
                    diff = <double> a[i, j] - <double> b[k, j]
                    acc = acc + diff * diff
                ov[i, k] = <float> acc
    return out


def pairwise_neg_inner(const float[:, ::1] a, const float[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], d = a.shape[1]
    if b.shape[1] != d:
        raise ValueError("dimension mismatch")
    out = np.empty((n, m), dtype=np.float32)
    cdef float[:, ::1] ov = out
    cdef Py_ssize_t i, k, j
    cdef double acc
    with nogil:
        for i in range(n):
            for k in range(m):
                acc = 0.0
                for j in range(d):
                    acc = acc + (<double> a[i, j]) * (<double> b[k, j])
                ov[i, k] = <float> (-acc)
    return out


def adc_table_sqeuclidean(const float[:, ::1] targets, const float[:, :, ::1] tables):
    cdef Py_ssize_t m = tables.shape[0], c = tables.shape[1], s = tables.shape[2]
    if targets.shape[0] != m or targets.shape[1] != s:
        raise ValueError("subspace shape mismatch")
    out = np.empty((m, c), dtype=np.float32)
    cdef float[:, ::1] ov = out
    cdef Py_ssize_t j, k, t
    cdef double acc, diff
    with nogil:
        for j in range(m):
            for k in range(c):
                acc = 0.0
                for t in range(s):
                    diff = <double> targets[j, t] - <double> tables[j, k, t]
                    acc = acc + diff * diff
                ov[j, k] = <float> acc
    return out


def adc_table_neg_inner(const float[:, ::1] targets, const float[:, :, ::1] tables):
    cdef Py_ssize_t m = tables.shape[0], c = tables.shape[1], s = tables.shape[2]
    if targets.shape[0] != m or targets.shape[1] != s:
        raise ValueError("subspace shape mismatch")
    out = np.empty((m, c), dtype=np.float32)
    cdef float[:, ::1] ov = out
    cdef Py_ssize_t j, k, t
    cdef double acc
    with nogil:
        for j in range(m):
            for k in range(c):
                acc = 0.0
                for t in range(s):
                    acc = acc + (<double> targets[j, t]) * (<double> tables[j, k, t])
                ov[j, k] = <float> (-acc)
    return out


def adc_accumulate(const float[:, ::1] table, const unsigned char[:, ::1] codes, float init):
    cdef Py_ssize_t n = codes.shape[0], m = codes.shape[1]
    if table.shape[0] != m:
        raise ValueError("table/code width mismatch")
    out = np.empty(n, dtype=np.float32)
    cdef float[::1] ov = out
    cdef Py_ssize_t i, j
    cdef float acc
    with nogil:
        for i in range(n):
            acc = init
            for j in range(m):
                acc = acc + table[j, codes[i, j]]
            ov[i] = acc
    return out
