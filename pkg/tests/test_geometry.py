import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tentlab.geometry import (ball_indices, ball_offsets, build_grid, build_time_grid, cone_region,
                              distance_to_complement, geometric_radii, tent_region, torus_distance, whitney_cube)


def test_grid_spacing_and_volume():
    assert build_grid(1, 16, 1.0).h == 0.0625
    assert build_grid(2, 8, 2.0).cell_volume == 0.0625
    g = build_grid(1, 512, 1.0)
    assert torus_distance(g, g.coordinate(0), g.coordinate(256)) == pytest.approx(0.5)


@pytest.mark.parametrize("dim,N", [(1, 4), (1, 513), (2, 33), (3, 8)])
def test_grid_limits(dim, N):
    with pytest.raises(ValueError):
        build_grid(dim, N)


def test_torus_distance_examples():
    g1 = build_grid(1, 16)
    assert torus_distance(g1, 0.3, 0.3) == 0
    assert torus_distance(g1, 0.1, 0.9) == pytest.approx(0.2)
    g2 = build_grid(2, 8)
    assert torus_distance(g2, (0, 0), (0.5, 0.5)) == pytest.approx(math.sqrt(0.5))


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_torus_distance_metric(x, y, z):
    g = build_grid(1, 16, 1.5)
    d = lambda a, b: float(torus_distance(g, a, b))
    assert d(x, y) == pytest.approx(d(y, x))
    assert 0 <= d(x, y) <= 0.75 + 1e-12
    assert d(x, z) <= d(x, y) + d(y, z) + 1e-12


def test_ball_examples():
    g = build_grid(1, 16)
    cells, wraps = ball_indices(g, 0, 0.13)
    assert sorted(cells) == sorted(np.arange(-2, 3) % 16) and not wraps
    assert list(ball_indices(g, 5, 0.01)[0]) == [5]
    cells, wraps = ball_indices(g, 3, 1.0)
    assert cells.size == 16 and wraps


@pytest.mark.parametrize("dim,N,r", [(1, 32, 0.11), (2, 16, 0.2), (2, 16, 0.07), (1, 64, 0.3)])
def test_ball_matches_brute_force(dim, N, r):
    g = build_grid(dim, N)
    center = (3,) * dim
    cells, _ = ball_indices(g, center, r)
    coords = np.stack(np.unravel_index(np.arange(g.size), g.shape), axis=1) * g.h
    c = np.array(center) * g.h
    d = torus_distance(g, coords if dim > 1 else coords[:, 0], c if dim > 1 else c[0])
    assert np.array_equal(cells, np.nonzero(d < r)[0])


def test_ball_offsets_read_only():
    offs = ball_offsets(build_grid(1, 32), 0.1)
    with pytest.raises(ValueError):
        offs[0] = 1


def test_time_grid_examples():
    assert np.allclose(build_time_grid(1, 8, 2).nodes, [1, 2, 4, 8])
    tg = build_time_grid(0.01, 1, math.sqrt(2))
    # ceil(log_{sqrt 2} 100) = 14 cells, so 15 nodes with the last at or beyond t_max
    assert tg.size == 15 and tg.t_max >= 1
    assert tg.cell_widths.sum() == pytest.approx(tg.t_max - tg.t_min)
    assert tg.weights.sum() == pytest.approx(tg.t_max)


def test_time_grid_cap():
    with pytest.raises(ValueError):
        build_time_grid(1e-300, 1, 1.0001)


def test_aligned_nodes_are_multiples():
    tg = build_time_grid(1e-3, 0.25).aligned(1e-3 / 64)
    q = np.rint(tg.nodes / (1e-3 / 64))
    assert np.allclose(tg.nodes, q * 1e-3 / 64, rtol=0, atol=1e-18)


@pytest.mark.parametrize("ratio,count", [(2.0, 1), (math.sqrt(2), 2)])
def test_whitney_node_counts(ratio, count):
    g = build_grid(1, 32)
    tg = build_time_grid(1e-3, 1, ratio)
    w = whitney_cube(g, tg, 2, 0)
    assert w.time_indices.size == count


def test_whitney_volume_scaling():
    g = build_grid(1, 512)
    tg = build_time_grid(1e-4, 0.1, 2.0)
    v1 = whitney_cube(g, tg, 2, 0).measure(g, tg)
    v2 = whitney_cube(g, tg, 6, 0).measure(g, tg)
    t1, t2 = tg.nodes[2], tg.nodes[6]
    assert v2 / v1 == pytest.approx((t2 / t1) ** 1.5, rel=0.1)


def test_whitney_needs_room():
    g = build_grid(1, 32)
    tg = build_time_grid(1e-3, 1e-2)
    with pytest.raises(ValueError):
        whitney_cube(g, tg, tg.size - 1, 0)


def test_cone_properties():
    g = build_grid(1, 64)
    tg = build_time_grid(g.h ** 2, 0.05)
    thin = cone_region(g, tg, 7, alpha=0.0)
    assert all(list(s) == [7] for s in thin.space_indices)
    c1 = cone_region(g, tg, 7, 1.0)
    c2 = cone_region(g, tg, 7, 2.0)
    assert all(set(a) <= set(b) for a, b in zip(c1.space_indices, c2.space_indices))
    # at t = h^2 the radius is h, so only the center cell is strictly inside
    assert list(c1.space_indices[0]) == [7]


def test_tent_region_examples():
    g = build_grid(1, 64)
    tg = build_time_grid(1e-4, 0.01)
    full = tent_region(g, tg, 0, 1.0)
    assert len(full.time_indices) == tg.size and all(s.size == g.size for s in full.space_indices)
    assert len(tent_region(g, tg, 0, 0.1, alpha=1e6)) == 0


def test_box_inside_tent_over_double_ball():
    g = build_grid(1, 64)
    tg = build_time_grid(1e-4, 0.01)
    r, T = 0.1, 0.004
    B, _ = ball_indices(g, 32, r)
    tent = tent_region(g, tg, 32, 2 * r, alpha=r / math.sqrt(T))
    for k in np.nonzero(tg.nodes < T)[0]:
        assert tent.contains(k, B[0]) and all(tent.contains(k, int(c)) for c in B)


def test_distance_to_complement():
    g = build_grid(1, 16)
    cells, _ = ball_indices(g, 8, 0.2)
    d = distance_to_complement(g, cells)
    assert d[8] == pytest.approx(4 * g.h) and d[0] == 0


def test_geometric_radii():
    g = build_grid(1, 64)
    r = geometric_radii(g)
    assert r[0] == g.h and r[-1] <= 0.25 and np.allclose(r[1:] / r[:-1], math.sqrt(2))
