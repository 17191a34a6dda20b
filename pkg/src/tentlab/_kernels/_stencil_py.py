"""Numpy fallback for the periodic stencil sums."""
import numpy as np


def stencil_sums(values, ptr, ody, odx):
    """Sum each slice over its own list of periodic offsets.

    Same contract as the compiled kernel: ``out[k, r, c]`` is the sum of
    ``values[k, (r + ody[i]) % R, (c + odx[i]) % C]`` over ``i`` in
    ``ptr[k]:ptr[k + 1]``, accumulated in storage order.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    K = values.shape[0]
    if len(ptr) != K + 1:
        raise ValueError("ptr must have one entry per slice plus one")
    out = np.zeros_like(values)
    for k in range(K):
        v = values[k]
        acc = out[k]
        for i in range(ptr[k], ptr[k + 1]):
            acc += np.roll(v, (-int(ody[i]), -int(odx[i])), axis=(0, 1))
    return out
