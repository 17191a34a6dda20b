# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled periodic stencil sums."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def stencil_sums(double[:, :, ::1] values, long long[::1] ptr,
                 long long[::1] ody, long long[::1] odx):
    """Sum each slice over its own list of periodic offsets.

    ``out[k, r, c] = sum(values[k, (r + ody[i]) % R, (c + odx[i]) % C])`` for
    ``i`` in ``ptr[k]:ptr[k + 1]``. Offsets are visited in storage order so the
    result matches the numpy fallback bit for bit.
    """
    cdef Py_ssize_t K = values.shape[0]
    cdef Py_ssize_t R = values.shape[1]
    cdef Py_ssize_t C = values.shape[2]
    if ptr.shape[0] != K + 1:
        raise ValueError("ptr must have one entry per slice plus one")
    out = np.zeros((K, R, C), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t k, r, c, i, rr, cc
    cdef long long dy, dx
    with nogil:
        for k in range(K):
            for i in range(ptr[k], ptr[k + 1]):
                dy = ody[i] % R
                if dy < 0:
                    dy += R
                dx = odx[i] % C
                if dx < 0:
                    dx += C
                for r in range(R):
                    rr = r + dy
                    if rr >= R:
                        rr -= R
                    for c in range(C):
                        cc = c + dx
                        if cc >= C:
                            cc -= C
                        o[k, r, c] += values[k, rr, cc]
    return out
