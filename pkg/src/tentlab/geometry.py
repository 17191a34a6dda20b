"""Periodic space grids, geometric time meshes and the regions built on them.

Cells of a grid are indexed by integer tuples; cell ``i`` has center ``i * h``.
Ball membership is decided by the torus distance between cell centers, so a
ball always contains its center cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

MAX_N = {1: 512, 2: 32}
MAX_NODES = 10_000
DEFAULT_RATIO = 2.0 ** 0.25
_NODE_RTOL = 1e-9


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid of ``N**dim`` cells on a torus of side ``period``."""

    dim: int
    N: int
    period: float

    def __post_init__(self):
        if self.dim not in MAX_N:
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not 8 <= self.N <= MAX_N[self.dim]:
            raise ValueError(f"N must lie in [8, {MAX_N[self.dim]}] for dim={self.dim}, got {self.N}")
        if not self.period > 0:
            raise ValueError("period must be positive")

    @property
    def h(self) -> float:
        return self.period / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def size(self) -> int:
        return self.N ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def coordinate(self, index) -> np.ndarray:
        """Center of the cell with integer ``index``."""
        return np.asarray(index, dtype=float) * self.h

    def flat_index(self, index) -> int:
        idx = np.atleast_1d(np.asarray(index, dtype=np.int64)) % self.N
        if idx.size != self.dim:
            raise ValueError(f"index must have {self.dim} components")
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    def refine(self, factor: int) -> "Grid":
        return Grid(self.dim, self.N * factor, self.period)

    def descriptor(self) -> dict:
        return {"dim": self.dim, "N": self.N, "period": self.period}


def build_grid(dim: int, N: int, period: float = 1.0) -> Grid:
    """Validated constructor for :class:`Grid`."""
    return Grid(int(dim), int(N), float(period))


def torus_distance(grid: Grid, x, y) -> np.ndarray:
    """Euclidean distance on the torus between coordinates ``x`` and ``y``.

    Both arguments broadcast; the trailing axis holds the components when
    ``dim > 1``.
    """
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) % grid.period
    d = np.minimum(d, grid.period - d)
    if grid.dim == 1:
        return d
    return np.sqrt(np.sum(d * d, axis=-1))


def ball_wraps(grid: Grid, radius: float) -> bool:
    """True when a ball of this radius covers the whole torus along an axis."""
    return radius >= grid.period / 2


@lru_cache(maxsize=4096)
def _ball_offsets(dim: int, N: int, period: float, radius: float) -> np.ndarray:
    h = period / N
    if radius >= period / 2:
        rng = np.arange(-(N // 2), N - N // 2)
        grids = np.meshgrid(*([rng] * dim), indexing="ij")
        out = np.stack([g.ravel() for g in grids], axis=1)
        out.setflags(write=False)
        return out
    a = int(math.floor(radius / h))
    rng = np.arange(-a, a + 1)
    grids = np.meshgrid(*([rng] * dim), indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=1)
    keep = np.sqrt(np.sum((offs * h) ** 2, axis=1)) < radius
    out = offs[keep]
    out.setflags(write=False)
    return out


def ball_offsets(grid: Grid, radius: float) -> np.ndarray:
    """Integer offsets ``o`` with ``|o| h < radius``, one row per cell.

    Radii of at least half the period cover the torus once.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    return _ball_offsets(grid.dim, grid.N, grid.period, float(radius))


def ball_indices(grid: Grid, center, radius: float) -> tuple[np.ndarray, bool]:
    """Sorted flat indices of the cells in ``B(center, radius)``.

    ``center`` is an integer cell index (int or tuple). The flag reports
    whether the ball wraps around the torus.
    """
    offs = ball_offsets(grid, radius)
    c = np.atleast_1d(np.asarray(center, dtype=np.int64))
    if c.size != grid.dim:
        raise ValueError(f"center must have {grid.dim} components")
    cells = (offs + c) % grid.N
    flat = np.ravel_multi_index(tuple(cells.T), grid.shape)
    return np.unique(flat), ball_wraps(grid, radius)


def ball_volume(grid: Grid, radius: float) -> float:
    """Lebesgue measure of a Euclidean ball, ``c_n r^n``."""
    return unit_ball_volume(grid.dim) * radius ** grid.dim


def unit_ball_volume(dim: int) -> float:
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


def geometric_radii(grid: Grid, r_max: float | None = None) -> np.ndarray:
    """Radii ``h 2^(j/2)`` up to ``r_max`` (default a quarter period)."""
    if r_max is None:
        r_max = grid.period / 4
    out = []
    j = 0
    while grid.h * 2 ** (j / 2) <= r_max * (1 + 1e-12):
        out.append(grid.h * 2 ** (j / 2))
        j += 1
    return np.array(out)


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing time nodes with their quadrature weights.

    Node ``k`` carries the cell ``(t_{k-1}, t_k]`` with ``t_{-1} = 0``, so the
    weights are ``w_0 = t_0`` and ``w_k = t_k - t_{k-1}``; they sum to the last
    node.
    """

    nodes: np.ndarray
    ratio: float = DEFAULT_RATIO
    quantum: float | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 1:
            raise ValueError("time grid needs at least one node")
        if nodes[0] <= 0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("time nodes must be positive and strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def t_min(self) -> float:
        return float(self.nodes[0])

    @property
    def t_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def K(self) -> int:
        """Number of cells between the first and last node."""
        return self.nodes.size - 1

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def cell_widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def weights(self) -> np.ndarray:
        return np.diff(self.nodes, prepend=0.0)

    def index_of(self, t: float) -> int:
        """Index of the node equal to ``t`` up to a relative 1e-9."""
        k = int(np.argmin(np.abs(self.nodes - t)))
        if abs(self.nodes[k] - t) > _NODE_RTOL * max(t, self.nodes[k]):
            raise ValueError(f"{t} is not a node of the time grid")
        return k

    def nodes_in(self, lo: float, hi: float) -> np.ndarray:
        """Indices of nodes in the half-open interval ``(lo, hi]``."""
        tol = _NODE_RTOL * hi
        return np.nonzero((self.nodes > lo + _NODE_RTOL * lo) & (self.nodes <= hi + tol))[0]

    def aligned(self, quantum: float) -> "TimeGrid":
        """Snap nodes to positive integer multiples of ``quantum``."""
        q = np.maximum(np.rint(self.nodes / quantum), 1.0)
        nodes = q * quantum
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("quantum too coarse: aligned nodes collide")
        return TimeGrid(nodes, self.ratio, quantum)

    def descriptor(self) -> dict:
        return {
            "t_min": self.t_min,
            "t_max": self.t_max,
            "ratio": self.ratio,
            "nodes": int(self.size),
            "quantum": self.quantum,
        }


def build_time_grid(t_min: float, t_max: float, ratio: float = DEFAULT_RATIO) -> TimeGrid:
    """Geometric mesh ``t_k = t_min ratio^k`` for ``k = 0..K``.

    ``K`` is the smallest integer with ``t_min ratio^K >= t_max``.
    """
    if not 0 < t_min < t_max:
        raise ValueError("need 0 < t_min < t_max")
    if not ratio > 1:
        raise ValueError("ratio must exceed 1")
    x = math.log(t_max / t_min) / math.log(ratio)
    K = max(1, math.ceil(x - 1e-9))
    if K > MAX_NODES:
        raise ValueError(f"mesh too fine: {K} cells exceed the cap of {MAX_NODES}")
    nodes = t_min * ratio ** np.arange(K + 1)
    return TimeGrid(nodes, float(ratio))


@dataclass
class Region:
    """A space-time set stored as a list of (time index, flat cell indices)."""

    kind: str
    time_indices: np.ndarray
    space_indices: list[np.ndarray]
    params: dict = field(default_factory=dict)
    wraps: bool = False

    def __len__(self):
        return int(sum(s.size for s in self.space_indices))

    def contains(self, k: int, flat: int) -> bool:
        pos = np.nonzero(self.time_indices == k)[0]
        return bool(pos.size) and bool(np.isin(flat, self.space_indices[pos[0]]))

    def measure(self, grid: Grid, tgrid: TimeGrid) -> float:
        w = tgrid.weights
        return float(sum(w[k] * s.size for k, s in zip(self.time_indices, self.space_indices)) * grid.cell_volume)


def cone_region(grid: Grid, tgrid: TimeGrid, x, alpha: float = 1.0, m: int = 2) -> Region:
    """Cone ``{(t, y): |y - x| < alpha t^(1/m)}`` with vertex at cell ``x``.

    A nonpositive aperture degenerates to the single-cell column.
    """
    idx, wraps = [], False
    for k, t in enumerate(tgrid.nodes):
        r = alpha * t ** (1.0 / m)
        if r <= 0:
            idx.append(np.array([grid.flat_index(x)]))
            continue
        cells, w = ball_indices(grid, x, r)
        wraps |= w
        idx.append(cells)
    return Region("cone", np.arange(tgrid.size), idx, {"x": x, "alpha": alpha, "m": m}, wraps)


def whitney_cube(grid: Grid, tgrid: TimeGrid, k: int, x) -> Region:
    """Nodes in ``(t_k, 2 t_k]`` times the ball ``B(x, t_k^(1/2))``."""
    t = float(tgrid.nodes[k])
    if 2 * t > tgrid.t_max * (1 + _NODE_RTOL):
        raise ValueError(f"Whitney cube at t={t:g} needs 2t <= t_max={tgrid.t_max:g}")
    ks = tgrid.nodes_in(t, 2 * t)
    if ks.size == 0:
        raise ValueError("no time node in (t, 2t]; mesh ratio too coarse")
    cells, wraps = ball_indices(grid, x, math.sqrt(t))
    return Region("whitney", ks, [cells] * ks.size, {"t": t, "x": x}, wraps)


def distance_to_complement(grid: Grid, cells: np.ndarray) -> np.ndarray:
    """For every cell, the torus distance to the nearest cell outside ``cells``."""
    mask = np.zeros(grid.size, dtype=bool)
    mask[cells] = True
    out = np.full(grid.size, np.inf)
    if mask.all():
        return out
    coords = np.stack(np.unravel_index(np.arange(grid.size), grid.shape), axis=1) * grid.h
    outside = coords[~mask]
    for i in np.nonzero(mask)[0]:
        out[i] = np.min(torus_distance(grid, coords[i], outside))
    out[~mask] = 0.0
    return out


def tent_region(grid: Grid, tgrid: TimeGrid, center, radius: float, alpha: float = 1.0, m: int = 2) -> Region:
    """Tent over ``B(center, radius)``: points with ``alpha t^(1/m) <= dist(y, B^c)``."""
    ball, wraps = ball_indices(grid, center, radius)
    dist = distance_to_complement(grid, ball)
    ks, idx = [], []
    for k, t in enumerate(tgrid.nodes):
        cells = np.nonzero(alpha * t ** (1.0 / m) <= dist)[0]
        cells = cells[dist[cells] > 0]
        if cells.size:
            ks.append(k)
            idx.append(cells)
    return Region("tent", np.array(ks, dtype=int), idx,
                  {"center": center, "radius": radius, "alpha": alpha, "m": m}, wraps)
