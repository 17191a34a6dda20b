import numpy as np
import pytest

from tentlab.coefficients import (CoefficientField, ellipticity_constants, field_from_descriptor,
                                  make_coefficient_field)
from tentlab.geometry import build_grid


def test_identity():
    c = make_coefficient_field(build_grid(2, 8), "identity")
    assert np.array_equal(c.matrices, np.broadcast_to(np.eye(2), (8, 8, 2, 2)))
    assert (c.lambda0, c.lambda1) == (1, 1) and c.is_real


def test_checkerboard_constants_and_pattern():
    c = make_coefficient_field(build_grid(1, 16), "scalar_checkerboard", {"lo": 1, "hi": 10}, seed=1)
    assert (c.lambda0, c.lambda1) == (1, 10)
    a = c.matrices[:, 0, 0]
    assert list(a[:8]) == [1, 1, 10, 10, 1, 1, 10, 10]


def test_checkerboard_period_must_be_even():
    with pytest.raises(ValueError):
        make_coefficient_field(build_grid(1, 16), "scalar_checkerboard", {"period": 3})


@pytest.mark.parametrize("dim", [1, 2])
def test_complex_perturbation(dim):
    eps = 0.3
    c = make_coefficient_field(build_grid(dim, 16), "complex_perturbation", {"eps": eps}, seed=5)
    assert not c.is_real and c.lambda0 >= 1 - eps - 1e-12
    # sampled coercivity never beats the closed-form constant
    rng = np.random.default_rng(0)
    xi = rng.standard_normal((500, dim)) + 1j * rng.standard_normal((500, dim))
    xi /= np.linalg.norm(xi, axis=1, keepdims=True)
    A = c.matrices.reshape(-1, dim, dim)
    form = np.einsum("ci,xij,cj->xc", xi.conj(), A, xi).real
    assert form.min() >= c.lambda0 - 1e-12
    B = (A - np.eye(dim)) / eps
    assert np.all(np.linalg.norm(B, 2, axis=(1, 2)) <= 1 + 1e-12)


def test_complex_eps_bound():
    with pytest.raises(ValueError):
        make_coefficient_field(build_grid(1, 16), "complex_perturbation", {"eps": 0.5})


def test_ellipticity_examples():
    assert ellipticity_constants(np.broadcast_to(np.diag([2.0, 5.0]), (4, 4, 2, 2))) == pytest.approx((2, 5))
    lam0, lam1 = ellipticity_constants(np.full((8, 1, 1), 1 + 0.4j))
    assert lam0 == pytest.approx(1) and lam1 == pytest.approx(abs(1 + 0.4j))


def test_random_symmetric_is_symmetric():
    c = make_coefficient_field(build_grid(2, 8), "random_real_symmetric", {"lo": 1, "hi": 3}, seed=2)
    A = c.matrices
    assert np.allclose(A, np.swapaxes(A, -1, -2)) and 1 - 1e-12 <= c.lambda0 <= c.lambda1 <= 3 + 1e-12


def test_seeded_reproducible():
    g = build_grid(1, 32)
    a = make_coefficient_field(g, "complex_perturbation", None, seed=9)
    b = make_coefficient_field(g, "complex_perturbation", None, seed=9)
    assert np.array_equal(a.matrices, b.matrices)


def test_refine_and_descriptor_roundtrip():
    g = build_grid(1, 32)
    c = make_coefficient_field(g, "random_real_symmetric", None, seed=4).refined(4)
    assert c.grid.N == 128 and np.array_equal(c.matrices[::4], make_coefficient_field(g, "random_real_symmetric", None, seed=4).matrices)
    again = field_from_descriptor(c.descriptor())
    assert np.array_equal(again.matrices, c.matrices)


def test_unknown_kind():
    with pytest.raises(ValueError):
        make_coefficient_field(build_grid(1, 16), "nope")
