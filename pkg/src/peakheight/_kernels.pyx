# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: Hessian weights and lattice local maxima.

Mirrors ``_pykernels`` operation for operation, looping per sample with
one LDL^T pass that yields both the definiteness verdict and |det|.
"""

import numpy as np
cimport numpy as cnp

from ._pykernels import neighbour_offsets

cnp.import_array()

cdef enum:
    MAXD = 32


cdef inline double _weight(double* a, int d) noexcept nogil:
    # a holds -H (lower triangle, row-major d x d); returns prod of pivots or 0
    cdef int i, j, k
    cdef double s, t, prod = 1.0
    for j in range(d):
        s = a[j * d + j]
        for k in range(j):
            s -= a[j * d + k] * a[j * d + k] * a[k * d + k]
        if not (s > 0.0):
            return 0.0
        a[j * d + j] = s
        prod *= s
        for i in range(j + 1, d):
            t = a[i * d + j]
            for k in range(j):
                t -= a[i * d + k] * a[j * d + k] * a[k * d + k]
            a[i * d + j] = t / s
    return prod


def hessian_weights(hv, int d, beta=None, x=None):
    """``|det H_i| * 1{H_i < 0}`` per row; see ``_pykernels.hessian_weights``."""
    cdef double[:, ::1] h = np.ascontiguousarray(hv, dtype=np.float64)
    cdef Py_ssize_t n = h.shape[0]
    cdef int q = d * (d + 1) // 2
    if d < 1 or d > MAXD or h.shape[1] != q:
        raise ValueError("bad Hessian dimension")
    cdef bint shifted = beta is not None
    cdef double[::1] b
    cdef double[::1] xv
    if shifted:
        b = np.ascontiguousarray(beta, dtype=np.float64)
        xv = np.ascontiguousarray(x, dtype=np.float64)
        if b.shape[0] != q or xv.shape[0] != n:
            raise ValueError("shift shapes disagree")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] w = out
    cdef double buf[MAXD * MAXD]
    cdef Py_ssize_t r
    cdef int i, j, pos
    with nogil:
        for r in range(n):
            pos = 0
            for j in range(d):
                for i in range(j, d):
                    if shifted:
                        buf[i * d + j] = -(h[r, pos] + b[pos] * xv[r])
                    else:
                        buf[i * d + j] = -h[r, pos]
                    pos += 1
            w[r] = _weight(buf, d)
    return out


def local_maxima_mask(values, shape, full=False):
    """Strict interior local maxima; see ``_pykernels.local_maxima_mask``."""
    cdef double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    cdef int ndim = len(shape)
    strides_py = np.cumprod((1,) + shape[::-1])[:-1][::-1].astype(np.intp)
    grid = np.indices(shape).reshape(ndim, -1)
    inner = np.all((grid > 0) & (grid < np.array(shape)[:, None] - 1), axis=0)
    cdef Py_ssize_t[::1] interior = np.flatnonzero(inner).astype(np.intp)
    cdef Py_ssize_t[::1] offs = np.ascontiguousarray(
        neighbour_offsets(ndim, full) @ strides_py, dtype=np.intp)
    out = np.zeros((v.shape[0], v.shape[1]), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] o = out
    cdef Py_ssize_t r, ii, p, j
    cdef double c
    cdef bint ok
    with nogil:
        for r in range(v.shape[0]):
            for ii in range(interior.shape[0]):
                p = interior[ii]
                c = v[r, p]
                ok = True
                for j in range(offs.shape[0]):
                    if not c > v[r, p + offs[j]]:
                        ok = False
                        break
                o[r, p] = ok
    return out.view(bool)
