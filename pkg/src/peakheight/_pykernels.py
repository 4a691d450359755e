"""Pure numpy implementations of the hot loops.

Same algorithms and floating-point operation order as the compiled
``_kernels`` extension, vectorized over samples instead of looped.
"""

from __future__ import annotations

import numpy as np


def _unpack_neg(hv, d, beta=None, x=None):
    # lower triangle of -(H + beta x), shape (n, d, d), column-major vech input
    n = hv.shape[0]
    a = np.zeros((n, d, d))
    pos = 0
    for j in range(d):
        for i in range(j, d):
            col = hv[:, pos]
            if beta is not None:
                col = col + beta[pos] * x
            a[:, i, j] = -col
            pos += 1
    return a


def hessian_weights(hv, d, beta=None, x=None):
    """``|det H_i| * 1{H_i < 0}`` for each row of vech-Hessian draws.

    Parameters
    ----------
    hv : ndarray, shape (n, d(d+1)/2)
        Half-vectorized Hessians, column-major lower order.
    d : int
    beta, x : ndarray, optional
        When given, the Hessian of row ``i`` is ``hv[i] + beta * x[i]``.
    """
    hv = np.ascontiguousarray(hv, dtype=float)
    if beta is not None:
        beta = np.asarray(beta, dtype=float)
        x = np.asarray(x, dtype=float)
    a = _unpack_neg(hv, d, beta, x)
    n = hv.shape[0]
    prod = np.ones(n)
    alive = np.ones(n, dtype=bool)
    for j in range(d):
        s = a[:, j, j].copy()
        for k in range(j):
            s -= a[:, j, k] * a[:, j, k] * a[:, k, k]
        alive &= s > 0.0
        s = np.where(alive, s, 1.0)
        a[:, j, j] = s
        prod *= s
        for i in range(j + 1, d):
            t = a[:, i, j].copy()
            for k in range(j):
                t -= a[:, i, k] * a[:, j, k] * a[:, k, k]
            a[:, i, j] = t / s
    return np.where(alive, prod, 0.0)


def neighbour_offsets(ndim, full=False):
    """Lattice offsets compared against: ``2 ndim`` axis steps, or all ``3^ndim - 1``."""
    if full:
        grid = np.indices((3,) * ndim).reshape(ndim, -1).T - 1
        return grid[np.any(grid != 0, axis=1)]
    eye = np.eye(ndim, dtype=int)
    return np.concatenate([eye, -eye])


def local_maxima_mask(values, shape, full=False):
    """Strict interior local maxima of each row of ``values``.

    Parameters
    ----------
    values : ndarray, shape (m, prod(shape))
        Realizations flattened in C order.
    shape : tuple of int
        Grid shape, every axis of length >= 3.
    full : bool
        Compare with all ``3^ndim - 1`` surrounding points instead of the
        ``2 ndim`` axis neighbours.

    Returns
    -------
    ndarray of bool, shape (m, prod(shape))
    """
    m = values.shape[0]
    v = np.asarray(values, dtype=float).reshape((m,) + tuple(shape))
    core = (slice(None),) + tuple(slice(1, -1) for _ in shape)
    centre = v[core]
    ok = np.ones(centre.shape, dtype=bool)
    for off in neighbour_offsets(len(shape), full):
        nb = (slice(None),) + tuple(slice(1 + o, n - 1 + o) for o, n in zip(off, shape))
        ok &= centre > v[nb]
    out = np.zeros(v.shape, dtype=bool)
    out[core] = ok
    return out.reshape(m, -1)
