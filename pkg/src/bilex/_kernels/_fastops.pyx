# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: row-wise top-k means (the CSLS neighborhood
penalties) and fused leaky-ReLU forward/backward.

Semantics match bilex._kernels._numpyops exactly; the test suite compares
the two backends on random inputs.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def topk_mean(double[:, ::1] scores, int k):
    """Row-wise mean of the k largest entries of a 2-d score matrix."""
    cdef Py_ssize_t n = scores.shape[0]
    cdef Py_ssize_t m = scores.shape[1]
    if k < 1 or k > m:
        raise ValueError(f"k={k} out of range for {m} columns")
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    buf_arr = np.empty(k, dtype=np.float64)
    cdef double[::1] buf = buf_arr
    cdef Py_ssize_t i, j, t, min_pos
    cdef double v, min_val, total
    for i in range(n):
        # fill the buffer with the first k values, tracking its minimum
        min_val = scores[i, 0]
        min_pos = 0
        for j in range(k):
            v = scores[i, j]
            buf[j] = v
            if v < min_val:
                min_val = v
                min_pos = j
        # sweep the rest, replacing the buffer minimum when beaten
        for j in range(k, m):
            v = scores[i, j]
            if v > min_val:
                buf[min_pos] = v
                min_val = buf[0]
                min_pos = 0
                for t in range(1, k):
                    if buf[t] < min_val:
                        min_val = buf[t]
                        min_pos = t
        total = 0.0
        for j in range(k):
            total += buf[j]
        out[i] = total / k
    return out_arr


def leaky_relu(double[::1] x, double slope):
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = x[i] if x[i] >= 0.0 else slope * x[i]
    return out_arr


def leaky_relu_grad(double[::1] x, double slope):
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = 1.0 if x[i] >= 0.0 else slope
    return out_arr
