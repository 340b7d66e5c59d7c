# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Semantics match ``_fallback.py`` exactly."""

import numpy as np


def block_products(sur, ref, Py_ssize_t max_delay, Py_ssize_t block):
    cdef double[::1] s = np.ascontiguousarray(sur, dtype=np.complex128).view(np.float64)
    cdef double[::1] r = np.ascontiguousarray(ref, dtype=np.complex128).view(np.float64)
    cdef Py_ssize_t n = s.shape[0] // 2
    cdef Py_ssize_t nb = (n + block - 1) // block
    out = np.zeros((max_delay + 1, nb), dtype=np.complex128)
    cdef double[:, ::1] o = out.view(np.float64)
    cdef Py_ssize_t tau, b, i, j, start, stop
    cdef double sr, si, rr, ri, acc_re, acc_im
    if block < 1:
        raise ValueError("block must be >= 1")
    with nogil:
        for tau in range(max_delay + 1):
            for b in range(nb):
                start = b * block
                stop = start + block
                if stop > n:
                    stop = n
                if start < tau:
                    start = tau
                acc_re = 0.0
                acc_im = 0.0
                for i in range(start, stop):
                    j = i - tau
                    sr = s[2 * i]
                    si = s[2 * i + 1]
                    rr = r[2 * j]
                    ri = r[2 * j + 1]
                    acc_re = acc_re + sr * rr + si * ri
                    acc_im = acc_im + si * rr - sr * ri
                o[tau, 2 * b] = acc_re
                o[tau, 2 * b + 1] = acc_im
    return out
