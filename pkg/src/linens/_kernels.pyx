# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled per-step simulation kernels.

Semantically identical to ``_kernels_py``; selected in ``linens.backend``
when the extension was built.
"""

import numpy as np

IS_COMPILED = True


def rank1_update(double[:, ::1] gram, double[:, ::1] gram_inv, double[::1] x):
    """In-place rank-1 update of a Gram matrix and its inverse."""
    cdef Py_ssize_t d = gram.shape[0]
    cdef Py_ssize_t i, j
    cdef double denom = 1.0
    cdef double[::1] u = np.empty(d, dtype=np.float64)
    for i in range(d):
        u[i] = 0.0
        for j in range(d):
            u[i] += gram_inv[i, j] * x[j]
    for i in range(d):
        denom += x[i] * u[i]
    for i in range(d):
        for j in range(d):
            gram[i, j] += x[i] * x[j]
            gram_inv[i, j] -= u[i] * u[j] / denom


def quad_form(double[:, ::1] mat, double[::1] v):
    """Return ``v^T mat v``."""
    cdef Py_ssize_t d = mat.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc = 0.0, row
    for i in range(d):
        row = 0.0
        for j in range(d):
            row += mat[i, j] * v[j]
        acc += v[i] * row
    return acc


def accumulate_perturbed(double[:, ::1] s, double[::1] x, double[::1] yz):
    """Add ``x * yz[j]`` to row ``j`` of ``s``, for every row."""
    cdef Py_ssize_t m = s.shape[0]
    cdef Py_ssize_t d = s.shape[1]
    cdef Py_ssize_t i, j
    for j in range(m):
        for i in range(d):
            s[j, i] += x[i] * yz[j]
