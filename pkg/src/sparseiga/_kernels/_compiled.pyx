# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled element assembly kernel.

Same contract as the NumPy fallback module: accumulates local stiffness
matrices and load vectors for a chunk of tensor-product elements.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

__all__ = ["local_poisson_systems"]


def local_poisson_systems(
    double[:, :, :, ::1] values,
    double[:, :, :, ::1] derivs,
    long long[:, ::1] elem_index,
    int[:, ::1] qp_index,
    int[:, ::1] fn_index,
    double[:, :, :, ::1] metric,
    double[:, ::1] load,
    double[:, :, ::1] out_a,
    double[:, ::1] out_b,
):
    """See sparseiga._kernels._fallback.local_poisson_systems."""
    cdef Py_ssize_t n_chunk = elem_index.shape[0]
    cdef Py_ssize_t d = elem_index.shape[1]
    cdef Py_ssize_t n_qp = qp_index.shape[0]
    cdef Py_ssize_t n_loc = fn_index.shape[0]
    cdef Py_ssize_t c, q, a, b, l, m, n, e_l, q_l
    cdef double v, g, s, w
    cdef double va[8]
    cdef double da[8]

    if d > 8:
        raise ValueError("kernel supports at most 8 directions")

    val_buf = np.empty(n_loc, dtype=np.float64)
    grad_buf = np.empty((n_loc, d), dtype=np.float64)
    half_buf = np.empty((n_loc, d), dtype=np.float64)
    cdef double[::1] val = val_buf
    cdef double[:, ::1] grad = grad_buf
    cdef double[:, ::1] half = half_buf

    with nogil:
        for c in range(n_chunk):
            for q in range(n_qp):
                # tensor-product value and gradient of each local function
                for a in range(n_loc):
                    for l in range(d):
                        e_l = elem_index[c, l]
                        q_l = qp_index[q, l]
                        va[l] = values[l, e_l, q_l, fn_index[a, l]]
                        da[l] = derivs[l, e_l, q_l, fn_index[a, l]]
                    v = 1.0
                    for l in range(d):
                        v *= va[l]
                    val[a] = v
                    for m in range(d):
                        g = da[m]
                        for l in range(d):
                            if l != m:
                                g *= va[l]
                        grad[a, m] = g

                w = load[c, q]
                for a in range(n_loc):
                    out_b[c, a] += val[a] * w

                for a in range(n_loc):
                    for n in range(d):
                        s = 0.0
                        for m in range(d):
                            s += grad[a, m] * metric[c, q, m, n]
                        half[a, n] = s

                for a in range(n_loc):
                    for b in range(a, n_loc):
                        s = 0.0
                        for n in range(d):
                            s += half[a, n] * grad[b, n]
                        out_a[c, a, b] += s

            # mirror the upper triangle accumulated over all quad points
            for a in range(n_loc):
                for b in range(a + 1, n_loc):
                    out_a[c, b, a] = out_a[c, a, b]
