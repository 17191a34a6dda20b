import math

import numpy as np
import pytest
import scipy.linalg as sla
from dataclasses import replace

from tentlab.coefficients import make_coefficient_field
from tentlab.geometry import build_grid, build_time_grid
from tentlab.operator import assemble_operator
from tentlab.propagator import (UnresolvableGapError, build_propagator, decay_pair, fit_decay_order,
                                generator_semigroup_apply, gradient_semigroup_apply, offdiagonal_norm,
                                pade_expm_neg, propagator_for, semigroup_apply, set_distance)


def phi_oracle(A, t):
    """``t phi_1(tA)`` and ``t^2 phi_2(tA)`` for ``e^{-tA}`` via an augmented exponential."""
    n = A.shape[0]
    Z = np.zeros((3 * n, 3 * n), dtype=complex)
    Z[:n, :n] = -A
    Z[:n, n:2 * n] = np.eye(n)
    Z[n:2 * n, 2 * n:] = np.eye(n)
    E = sla.expm(t * Z)
    return E[:n, :n], E[:n, n:2 * n], E[:n, 2 * n:]


@pytest.fixture(scope="module")
def small():
    g = build_grid(1, 32)
    op = assemble_operator(make_coefficient_field(g, "complex_perturbation", {"eps": 0.4}, seed=11))
    return op, build_propagator(op, 1e-5, 10)


def test_pade_matches_scipy(rng):
    Z = 0.4 * rng.standard_normal((12, 12)) / 12
    assert np.allclose(pade_expm_neg(Z), sla.expm(-Z), rtol=0, atol=1e-15)


def test_zero_operator():
    g = build_grid(1, 16)
    op = assemble_operator(make_coefficient_field(g, "identity"))
    zero = replace(op, matrix=np.zeros_like(op.matrix))
    c = build_propagator(zero, 0.1, 3)
    x = np.arange(16.0)
    assert np.allclose(c.exp[0], np.eye(16)) and np.allclose(c.apply_phi1(0.3, x), x)
    assert np.allclose(c.apply_int2(0.3, x), 0.045 * x)


@pytest.mark.parametrize("n", [1, 3, 7, 100, 1023])
def test_levels_against_oracle(small, n):
    op, c = small
    t = n * c.base_gap
    E, P, Q = phi_oracle(op.matrix, t)
    I = np.eye(op.size)
    scale = max(1.0, np.abs(E).max())
    assert np.abs(c.apply_exp(t, I) - E).max() <= 1e-11 * scale
    assert np.abs(c.apply_int1(t, I) - P).max() <= 1e-11 * np.abs(P).max()
    assert np.abs(c.apply_int2(t, I) - Q).max() <= 1e-11 * np.abs(Q).max()


def test_spectral_oracle():
    g = build_grid(1, 64)
    op = assemble_operator(make_coefficient_field(g, "identity"))
    c = build_propagator(op, 1e-6, 16)
    k = np.arange(64)
    lam = (2 - 2 * np.cos(2 * np.pi * k / 64)) / g.h ** 2
    for n in (1, 17, 1000, 65535):
        t = n * c.base_gap
        ev = np.sort(np.linalg.eigvalsh(c.expm(t)))
        ref = np.sort(np.exp(-t * lam))
        big = ref > 1e-6
        assert np.max(np.abs(ev[big] - ref[big]) / ref[big]) < 1e-8


def test_phi1_identity(small):
    op, c = small
    t = 37 * c.base_gap
    X = np.eye(op.size)
    lhs = t * op.matrix @ c.apply_phi1(t, X) + c.apply_exp(t, X)
    assert np.allclose(lhs, X, atol=1e-12)


def test_semigroup_on_constants(heat128):
    op, c, tg = heat128
    g = np.ones(op.grid.shape)
    for t in tg.nodes[::5]:
        assert np.allclose(semigroup_apply(c, t, g), g)


def test_short_time_slope(heat128):
    op, c, _ = heat128
    x = np.arange(128) * op.grid.h
    g = np.sin(2 * np.pi * x)
    errs, ts = [], []
    for j in range(2, 7):
        t = c.base_gap * 2 ** j
        errs.append(np.linalg.norm(semigroup_apply(c, t, g) - g + t * op.apply(g)))
        ts.append(t)
    # the first-order remainder is O(t^2)
    slope = np.polyfit(np.log(ts), np.log(errs), 1)[0]
    assert slope == pytest.approx(2, abs=0.05)


def test_heat_contraction(heat128):
    op, c, tg = heat128
    for t in tg.nodes[::7]:
        assert np.linalg.norm(c.expm(t), 2) == pytest.approx(1.0, abs=1e-10)


def test_family_shapes(heat128, rng):
    op, c, tg = heat128
    g = rng.standard_normal(128)
    t = tg.nodes[3]
    assert gradient_semigroup_apply(c, t, g).shape == (1, 128)
    assert np.allclose(generator_semigroup_apply(c, t, g), op.apply(semigroup_apply(c, t, g)))


def test_unresolvable_gap_lists_neighbours(small):
    _, c = small
    with pytest.raises(UnresolvableGapError, match="nearest resolvable gaps"):
        c.apply_exp(2.5e-5, np.ones(32))
    assert not c.resolvable(1e9) and c.resolvable(3e-5)


def test_adjoint_cache_is_conjugate(small):
    op, c = small
    t = 5 * c.base_gap
    assert np.allclose(c.adjoint().expm(t), c.expm(t).conj().T, atol=1e-13)


def test_propagator_for_alignment():
    g = build_grid(1, 64)
    op = assemble_operator(make_coefficient_field(g, "identity"))
    c, tg = propagator_for(op, build_time_grid(1e-3, 0.1))
    assert c.base_gap == pytest.approx(1e-3 / 128)
    for gap in np.concatenate([tg.weights, tg.nodes / 2]):
        assert c.resolvable(gap)


def test_offdiagonal_full_torus(heat128):
    op, c, tg = heat128
    allc = np.arange(128)
    val, exact = offdiagonal_norm(c, "semigroup", tg.nodes[4], allc, allc)
    assert exact and val == pytest.approx(1.0, abs=1e-10)


def test_offdiagonal_gaussian_decay():
    g = build_grid(1, 256)
    op = assemble_operator(make_coefficient_field(g, "identity"))
    c = build_propagator(op, 1e-3 / 64, 8)
    E, F, d = decay_pair(g, 0.4, 0.05)
    # strict ball membership drops the boundary cells, so the gap is within two cells of 0.4
    assert d == pytest.approx(0.4, abs=2 * g.h)
    val, _ = offdiagonal_norm(c, "semigroup", 1e-3, E, F)
    assert val < 1e-6
    full, _ = offdiagonal_norm(c, "semigroup", 1e-3, np.arange(256), np.arange(256))
    assert val <= full


def test_lower_bound_never_exceeds_exact(heat128):
    _, c, tg = heat128
    E, F, _ = decay_pair(c.grid, 0.1, 0.05)
    exact, _ = offdiagonal_norm(c, "semigroup", tg.nodes[10], E, F)
    sampled, flag = offdiagonal_norm(c, "semigroup", tg.nodes[10], E, F, q=2.0, r=2.0001)
    assert not flag and sampled <= exact * (1 + 1e-3)


def test_set_distance_wraps():
    g = build_grid(1, 16)
    assert set_distance(g, np.array([0]), np.array([15])) == pytest.approx(g.h)


def test_decay_fit_heat():
    g = build_grid(1, 256)
    op = assemble_operator(make_coefficient_field(g, "identity"))
    c = build_propagator(op, 1e-3 / 64, 14)
    fwd = fit_decay_order(c, "semigroup", [1e-3, 1e-2, 1e-1], [0.1, 0.2, 0.3, 0.4])
    adj = fit_decay_order(c, "adjoint_semigroup", [1e-3, 1e-2, 1e-1], [0.1, 0.2, 0.3, 0.4])
    assert fwd.M_hat >= 5 and abs(adj.M_hat - fwd.M_hat) <= 0.15 * fwd.M_hat
    assert fwd.used >= 3


def test_decay_fit_checkerboard():
    g = build_grid(1, 256)
    op = assemble_operator(make_coefficient_field(g, "scalar_checkerboard", {"lo": 1, "hi": 10}))
    c = build_propagator(op, 1e-3 / 64, 14)
    fit = fit_decay_order(c, "semigroup", [1e-3, 1e-2, 1e-1], [0.1, 0.2, 0.3, 0.4])
    assert fit.M_hat >= 2
