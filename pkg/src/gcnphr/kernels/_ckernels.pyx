# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scatter/gather kernels for graph message passing."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

ctypedef cnp.float64_t f64
ctypedef cnp.int64_t i64


def scatter_rows(const f64[:, ::1] table, const i64[::1] idx, const f64[::1] weight,
                 const i64[::1] seg, Py_ssize_t n_out):
    cdef Py_ssize_t p, d, s, r
    cdef Py_ssize_t n = idx.shape[0], dim = table.shape[1]
    cdef f64 w
    out_arr = np.zeros((n_out, dim), dtype=np.float64)
    cdef f64[:, ::1] out = out_arr
    for p in range(n):
        s = seg[p]
        r = idx[p]
        w = weight[p]
        for d in range(dim):
            out[s, d] += w * table[r, d]
    return out_arr


def gather_dot(const f64[:, ::1] a, const i64[::1] ia, const f64[:, ::1] b, const i64[::1] ib):
    cdef Py_ssize_t p, d
    cdef Py_ssize_t n = ia.shape[0], dim = a.shape[1]
    cdef f64 acc
    out_arr = np.empty(n, dtype=np.float64)
    cdef f64[::1] out = out_arr
    for p in range(n):
        acc = 0.0
        for d in range(dim):
            acc += a[ia[p], d] * b[ib[p], d]
        out[p] = acc
    return out_arr


def segment_sum(const f64[::1] values, const i64[::1] seg, Py_ssize_t n_out):
    cdef Py_ssize_t p, n = values.shape[0]
    out_arr = np.zeros(n_out, dtype=np.float64)
    cdef f64[::1] out = out_arr
    for p in range(n):
        out[seg[p]] += values[p]
    return out_arr


def segment_softmax(const f64[::1] scores, const i64[::1] seg, Py_ssize_t n_out):
    cdef Py_ssize_t p, n = scores.shape[0]
    mx_arr = np.full(n_out, -np.inf, dtype=np.float64)
    tot_arr = np.zeros(n_out, dtype=np.float64)
    out_arr = np.empty(n, dtype=np.float64)
    cdef f64[::1] mx = mx_arr
    cdef f64[::1] tot = tot_arr
    cdef f64[::1] out = out_arr
    for p in range(n):
        if scores[p] > mx[seg[p]]:
            mx[seg[p]] = scores[p]
    for p in range(n):
        out[p] = exp(scores[p] - mx[seg[p]])
        tot[seg[p]] += out[p]
    for p in range(n):
        out[p] = out[p] / tot[seg[p]]
    return out_arr


def segment_softmax_backward(const f64[::1] weights, const f64[::1] grad,
                             const i64[::1] seg, Py_ssize_t n_out):
    cdef Py_ssize_t p, n = weights.shape[0]
    inner_arr = np.zeros(n_out, dtype=np.float64)
    out_arr = np.empty(n, dtype=np.float64)
    cdef f64[::1] inner = inner_arr
    cdef f64[::1] out = out_arr
    for p in range(n):
        inner[seg[p]] += weights[p] * grad[p]
    for p in range(n):
        out[p] = weights[p] * (grad[p] - inner[seg[p]])
    return out_arr
