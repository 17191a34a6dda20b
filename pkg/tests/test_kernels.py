import numpy as np
import pytest

from tentlab import _kernels
from tentlab.geometry import build_grid
from tentlab.tentspaces import _stencil

BACKENDS = _kernels.available_backends()


def brute(values, ptr, ody, odx):
    K, R, C = values.shape
    out = np.zeros_like(values)
    for k in range(K):
        for i in range(ptr[k], ptr[k + 1]):
            for r in range(R):
                for c in range(C):
                    out[k, r, c] += values[k, (r + ody[i]) % R, (c + odx[i]) % C]
    return out


@pytest.mark.parametrize("name", sorted(BACKENDS))
@pytest.mark.parametrize("dim,N", [(1, 16), (2, 8)])
def test_against_loops(name, dim, N, rng):
    radii = (0.0, 0.1, 0.3, 0.7)
    ptr, ody, odx, _ = _stencil(dim, N, 1.0, radii)
    shape = (len(radii), 1, N) if dim == 1 else (len(radii), N, N)
    v = rng.standard_normal(shape)
    assert np.allclose(BACKENDS[name](v, ptr, ody, odx), brute(v, ptr, ody, odx), atol=1e-12)


def test_backends_bitwise_equal(rng):
    if len(BACKENDS) < 2:
        pytest.skip("compiled kernel not built")
    ptr, ody, odx, _ = _stencil(1, 256, 1.0, tuple(np.linspace(0.01, 0.3, 12)))
    v = rng.standard_normal((12, 1, 256))
    a = BACKENDS["python"](v, ptr, ody, odx)
    b = BACKENDS["cython"](v, ptr, ody, odx)
    assert np.array_equal(np.asarray(a), np.asarray(b))


def test_backend_flag():
    assert _kernels.BACKEND in BACKENDS


def test_ptr_length_checked():
    with pytest.raises(ValueError):
        BACKENDS["python"](np.zeros((2, 1, 8)), np.array([0, 1]), np.zeros(1, dtype=np.int64),
                           np.zeros(1, dtype=np.int64))
