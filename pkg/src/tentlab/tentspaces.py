"""Discrete tent-space functionals on space-time fields.

Every functional samples the field at the time nodes and integrates in time
with the mesh weights. Space integrals are cell sums times ``h^n``; averages
over balls divide by the discrete cell count. The convention for the weight
index is uniform: index ``beta`` means the integrand carries ``t^(-beta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .geometry import (Grid, TimeGrid, ball_indices, ball_offsets, ball_volume, build_grid, geometric_radii,
                       unit_ball_volume)


@dataclass
class SpaceTimeField:
    """Samples ``values[k]`` at the time nodes; shape ``(T,) + grid.shape``.

    Vector fields carry an extra component axis right after time.
    """

    grid: Grid
    tgrid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        g = self.grid.shape
        if v.shape[0] != self.tgrid.size or v.shape[-len(g):] != g or v.ndim not in (1 + len(g), 2 + len(g)):
            raise ValueError(f"values of shape {v.shape} do not match time grid {self.tgrid.size} and grid {g}")
        self.values = v

    @property
    def components(self) -> int:
        return 1 if self.values.ndim == 1 + self.grid.dim else self.values.shape[1]

    def magnitude2(self) -> np.ndarray:
        """Pointwise ``|f|^2`` summed over components, shape ``(T,) + grid.shape``."""
        sq = np.abs(self.values) ** 2
        if self.components > 1 or sq.ndim == 2 + self.grid.dim:
            sq = np.sum(sq, axis=1)
        return sq

    def refined(self, factor: int) -> "SpaceTimeField":
        """Transport to a grid ``factor`` times finer by cell-block replication."""
        v = self.values
        for ax in range(v.ndim - self.grid.dim, v.ndim):
            v = np.repeat(v, factor, axis=ax)
        return SpaceTimeField(self.grid.refine(factor), self.tgrid, v)

    def scaled(self, c) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.tgrid, c * self.values)


@dataclass
class NormReport:
    norm_kind: str
    params: dict
    value: float
    quadrature: dict
    flags: list = field(default_factory=list)

    def to_record(self) -> dict:
        return {"norm_kind": self.norm_kind, "params": self.params, "value": self.value,
                "quadrature": self.quadrature, "flags": list(self.flags)}


def _quadrature(f: SpaceTimeField) -> dict:
    return {"grid": f.grid.descriptor(), "time": f.tgrid.descriptor()}


@lru_cache(maxsize=256)
def _stencil(dim: int, N: int, period: float, radii: tuple) -> tuple:
    grid = Grid(dim, N, period)
    blocks = [np.zeros((1, dim), dtype=np.int64) if r <= 0 else ball_offsets(grid, r) for r in radii]
    ptr = np.zeros(len(blocks) + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([b.shape[0] for b in blocks])
    offs = np.concatenate(blocks, axis=0).astype(np.int64)
    if dim == 1:
        ody = np.zeros(offs.shape[0], dtype=np.int64)
        odx = np.ascontiguousarray(offs[:, 0])
    else:
        ody = np.ascontiguousarray(offs[:, 0])
        odx = np.ascontiguousarray(offs[:, 1])
    counts = np.diff(ptr)
    return ptr, ody, odx, counts


def ball_sums(grid: Grid, values: np.ndarray, radii) -> tuple[np.ndarray, np.ndarray]:
    """Sum ``values[k]`` over ``B(x, radii[k])`` for every cell ``x``.

    A nonpositive radius means the single center cell. Returns the sums and
    the cell count of each ball.
    """
    radii = tuple(float(r) for r in np.broadcast_to(radii, (values.shape[0],)))
    ptr, ody, odx, counts = _stencil(grid.dim, grid.N, grid.period, radii)
    K = values.shape[0]
    v = np.ascontiguousarray(np.reshape(values, (K, 1, grid.N) if grid.dim == 1 else (K, grid.N, grid.N)),
                             dtype=np.float64)
    out = _kernels.stencil_sums(v, ptr, ody, odx)
    return np.asarray(out).reshape((K,) + grid.shape), counts


def _time_weights(tgrid: TimeGrid, beta: float) -> np.ndarray:
    t = tgrid.nodes
    return tgrid.weights * t ** (-2.0 * beta)


def lp_norm(grid: Grid, v: np.ndarray, p: float) -> float:
    """Discrete ``L^p`` (quasi-)norm of a nonnegative spatial array."""
    if math.isinf(p):
        return float(np.max(v))
    if not p > 0:
        raise ValueError("p must be positive")
    return float(np.sum(v ** p) * grid.cell_volume) ** (1.0 / p)


def conical_square_function(f: SpaceTimeField, beta: float, m: float = 2, alpha: float = 1.0) -> np.ndarray:
    """``A(x) = (sum_k w_k t_k^(-2 beta - n/m) sum_{|y-x| < alpha t_k^(1/m)} |f|^2 h^n)^(1/2)``."""
    grid, tg = f.grid, f.tgrid
    radii = alpha * tg.nodes ** (1.0 / m)
    sums, _ = ball_sums(grid, f.magnitude2(), radii)
    w = _time_weights(tg, beta) * tg.nodes ** (-grid.dim / m) * grid.cell_volume
    return np.sqrt(np.tensordot(w, sums, axes=(0, 0)))


def tent_norm(f: SpaceTimeField, p: float, beta: float, m: float = 2, alpha: float = 1.0) -> NormReport:
    """``T^p_beta`` norm: the ``L^p`` norm of the conical square function."""
    if not p > 0:
        raise ValueError("p must be positive")
    A = conical_square_function(f, beta, m, alpha)
    flags = []
    if alpha * f.tgrid.t_max ** (1.0 / m) >= f.grid.period / 2:
        flags.append("cone wraps the torus at late times")
    return NormReport("tent", {"p": p, "beta": beta, "m": m, "alpha": alpha},
                      lp_norm(f.grid, A, p), _quadrature(f), flags)


def weighted_l2(f: SpaceTimeField, beta: float) -> float:
    """``(sum_k w_k t_k^(-2 beta) sum_y |f|^2 h^n)^(1/2)``."""
    sq = f.magnitude2().reshape(f.tgrid.size, -1).sum(axis=1)
    return math.sqrt(float(np.dot(_time_weights(f.tgrid, beta), sq)) * f.grid.cell_volume)


def vertical_square_function(f: SpaceTimeField, beta: float) -> np.ndarray:
    """``V(x) = (sum_k w_k |t_k^(-beta) f(t_k, x)|^2)^(1/2)``."""
    return np.sqrt(np.tensordot(_time_weights(f.tgrid, beta), f.magnitude2(), axes=(0, 0)))


def tinfty_norm(f: SpaceTimeField, beta: float, m: float = 2, sigma: float = 0.0) -> NormReport:
    """Carleson-type norm with a power of the ball measure.

    ``sup_B |B|^(-sigma) (int_0^{r^m} avg_B |t^(-beta) f|^2 dt)^(1/2)`` over
    balls centered at every cell with radii ``h 2^(j/2) <= P/4``. ``|B|`` is
    the discrete measure of the ball. The dual of ``T^p_beta`` for ``p <= 1``
    is reached with index ``-beta`` and ``sigma = 1/p - 1``.
    """
    grid, tg = f.grid, f.tgrid
    radii = geometric_radii(grid)
    wsq = _time_weights(tg, beta)[:, None] * f.magnitude2().reshape(tg.size, -1)
    csum = np.cumsum(wsq, axis=0)
    stack = np.zeros((radii.size, grid.size))
    for i, r in enumerate(radii):
        ks = np.nonzero(tg.nodes <= r ** m * (1 + 1e-12))[0]
        if ks.size:
            stack[i] = csum[ks[-1]]
    sums, counts = ball_sums(grid, stack.reshape((radii.size,) + grid.shape), radii)
    meas = counts * grid.cell_volume
    vals = np.sqrt(np.maximum(sums.reshape(radii.size, -1), 0) / counts[:, None]) * meas[:, None] ** (-sigma)
    i, x = np.unravel_index(int(np.argmax(vals)), vals.shape)
    return NormReport("tinfty", {"beta": beta, "m": m, "sigma": sigma}, float(vals[i, x]), _quadrature(f),
                      [f"attained at radius {radii[i]:.6g}, cell {int(x)}"])


def mq_maximal(grid: Grid, values: np.ndarray, q: float, radii=None) -> np.ndarray:
    """``sup_r (avg_{B(x, r)} |g|^q)^(1/q)`` for each slice of ``values``.

    ``values`` has shape ``(K,) + grid.shape`` (or just ``grid.shape``). The
    radii default to ``h 2^(j/2)`` up to a quarter period, starting with the
    single cell.
    """
    v = np.asarray(values)
    single = v.shape == grid.shape
    if single:
        v = v[None]
    if radii is None:
        radii = geometric_radii(grid)
    g = np.abs(v) ** q
    best = np.zeros(v.shape)
    for r in radii:
        sums, counts = ball_sums(grid, g, np.full(v.shape[0], r))
        best = np.maximum(best, sums / counts[0])
    out = best ** (1.0 / q)
    return out[0] if single else out


def mq_maximal_field(f: SpaceTimeField, q: float, radii=None) -> SpaceTimeField:
    if f.components > 1:
        raise ValueError("maximal function expects a scalar field")
    return SpaceTimeField(f.grid, f.tgrid, mq_maximal(f.grid, f.values, q, radii))


def slice_norm(grid: Grid, g: np.ndarray, p: float, delta: float) -> float:
    """``E^p_delta`` norm: ``L^p`` norm of ``(avg_{B(x, delta^(1/2))} |g|^2)^(1/2)``."""
    g = np.asarray(g)
    sq = np.abs(g) ** 2
    if sq.shape != grid.shape:
        sq = np.sum(sq, axis=0)
    sums, counts = ball_sums(grid, sq[None], [math.sqrt(delta)])
    return lp_norm(grid, np.sqrt(sums[0] / counts[0]), p)


def whitney_averages(u: SpaceTimeField, k: int) -> np.ndarray:
    """``(avg_{W(t_k, x)} |u|^2)^(1/2)`` at every cell ``x``.

    The Whitney region is the nodes in ``(t_k, 2 t_k]`` times the ball of
    radius ``t_k^(1/2)``.
    """
    tg, grid = u.tgrid, u.grid
    t = float(tg.nodes[k])
    if 2 * t > tg.t_max * (1 + 1e-9):
        raise ValueError(f"Whitney region at t={t:g} needs 2t <= t_max={tg.t_max:g}")
    ks = tg.nodes_in(t, 2 * t)
    if ks.size == 0:
        raise ValueError("no node in (t, 2t]")
    sq = u.magnitude2()[ks]
    sums, counts = ball_sums(grid, sq, np.full(ks.size, math.sqrt(t)))
    w = tg.weights[ks]
    return np.sqrt(np.tensordot(w, sums, axes=(0, 0)) / (w.sum() * counts[0]))


def kenig_pipher_norm(u: SpaceTimeField, p: float, beta: float, T: float = math.inf) -> NormReport:
    """``L^p`` norm of ``x -> sup_{t < T} (avg_{(t/2, t] x B(x, t^(1/2))} |s^(-beta) u|^2)^(1/2)``.

    The sup runs over mesh nodes ``t < T``; the time average uses the mesh
    weights of the nodes in ``(t/2, t]``.
    """
    tg, grid = u.tgrid, u.grid
    tops = np.nonzero(tg.nodes < T)[0]
    if tops.size == 0:
        raise ValueError(f"no mesh node below T={T}")
    wsq = _time_weights(tg, beta)[:, None] * u.magnitude2().reshape(tg.size, -1)
    pairs, radii = [], []
    for k in tops:
        t = tg.nodes[k]
        js = tg.nodes_in(t / 2, t)
        for j in js:
            pairs.append((k, j))
            radii.append(math.sqrt(t))
    stack = np.stack([wsq[j] for _, j in pairs]).reshape((len(pairs),) + grid.shape)
    sums, counts = ball_sums(grid, stack, radii)
    sums = sums.reshape(len(pairs), -1)
    acc = np.zeros((tops.size, grid.size))
    wsum = np.zeros(tops.size)
    pos = {k: i for i, k in enumerate(tops)}
    for (k, j), s, c in zip(pairs, sums, counts):
        acc[pos[k]] += s / c
        wsum[pos[k]] += tg.weights[j]
    inner = np.sqrt(acc / wsum[:, None])
    N = np.max(inner, axis=0).reshape(grid.shape)
    return NormReport("kenig_pipher", {"p": p, "beta": beta, "T": T}, lp_norm(grid, N, p), _quadrature(u))


def atom_target_norm(volume: float, p: float) -> float:
    """Weighted ``L^2`` size of an atom over a ball of this measure: ``|B|^(1/2 - 1/p)``."""
    return volume ** (0.5 - 1.0 / p)


def make_atom(grid: Grid, tgrid: TimeGrid, center, radius: float, p: float, beta: float, m: float = 2,
              seed: int | None = None, profile: str = "noise") -> tuple[SpaceTimeField, dict]:
    """Random atom supported in ``[t_min, radius^m] x B(center, radius)``.

    It is rescaled so that its ``L^2_beta`` norm equals ``|B|^(1/2 - 1/p)``
    with ``|B| = c_n radius^n``. ``profile`` is ``"noise"`` (complex Gaussian
    samples) or ``"smooth"`` (a separable product of a positive time profile
    and a bump in space with a few random low modes).
    """
    if radius ** m > tgrid.t_max * (1 + 1e-9):
        raise ValueError("atom support reaches beyond the last time node")
    ks = np.nonzero(tgrid.nodes <= radius ** m * (1 + 1e-12))[0]
    cells, wraps = ball_indices(grid, center, radius)
    if ks.size == 0 or cells.size == 0:
        raise ValueError("atom support contains no mesh point")
    rng = np.random.default_rng(seed)
    vals = np.zeros((tgrid.size, grid.size), dtype=complex)
    if profile == "noise":
        blk = rng.standard_normal((ks.size, cells.size)) + 1j * rng.standard_normal((ks.size, cells.size))
        vals[np.ix_(ks, cells)] = blk
    elif profile == "smooth":
        coords = np.stack(np.unravel_index(cells, grid.shape), axis=1) * grid.h
        c = np.atleast_1d(np.asarray(center)) * grid.h
        d = (coords - c + grid.period / 2) % grid.period - grid.period / 2
        s2 = np.sum(d * d, axis=1) / radius ** 2
        space = (1 - s2) ** 2 * (1 + 0.5 * np.cos(np.pi * (d @ rng.uniform(-1, 1, grid.dim)) / radius
                                                    + rng.uniform(0, 2 * np.pi)))
        tt = tgrid.nodes[ks] / radius ** m
        time = 1 + 0.5 * np.cos(2 * np.pi * rng.uniform(0, 1) * tt + rng.uniform(0, 2 * np.pi))
        vals[np.ix_(ks, cells)] = np.outer(time, space)
    else:
        raise ValueError(f"unknown atom profile {profile!r}")
    f = SpaceTimeField(grid, tgrid, vals.reshape((tgrid.size,) + grid.shape))
    target = atom_target_norm(ball_volume(grid, radius), p)
    f = f.scaled(target / weighted_l2(f, beta))
    report = {"center": center, "radius": radius, "p": p, "beta": beta, "m": m, "time_nodes": int(ks.size),
              "cells": int(cells.size), "target": target, "wraps": wraps}
    return f, report


@dataclass
class ApertureReport:
    p: float
    beta: float
    alphas: list
    norms: list
    ratios: list
    lower: list
    upper: list
    slack: float
    slope: float
    monotone: bool

    def to_record(self) -> dict:
        return dict(self.__dict__)


def change_aperture_report(f: SpaceTimeField, p: float, beta: float, m: float = 2, alphas=(1, 2, 4, 8)) -> ApertureReport:
    """Tent norms across apertures against the bounds ``alpha^(n/2)``, ``alpha^(n/p)``.

    Ratios are taken against the first aperture. ``slack`` is the largest
    factor by which a ratio leaves the band between the two powers (1 when
    all ratios are inside); ``slope`` is the least-squares slope of log norm
    against log aperture.
    """
    n = f.grid.dim
    alphas = [float(a) for a in alphas]
    norms = [tent_norm(f, p, beta, m, a).value for a in alphas]
    a0 = alphas[0]
    ratios, lower, upper = [], [], []
    slack = 1.0
    for a, v in zip(alphas, norms):
        rel = a / a0
        lo, hi = sorted((rel ** (n / 2), rel ** (n / p)))
        r = v / norms[0] if norms[0] > 0 else float("nan")
        ratios.append(r)
        lower.append(lo)
        upper.append(hi)
        slack = max(slack, r / hi, lo / r)
    slope = float(np.polyfit(np.log(alphas), np.log(norms), 1)[0]) if min(norms) > 0 else float("nan")
    monotone = all(b >= a * (1 - 1e-12) for a, b in zip(norms, norms[1:]))
    return ApertureReport(p, beta, alphas, norms, ratios, lower, upper, float(slack), slope, monotone)


def fubini_constant(dim: int) -> float:
    """Constant in ``|f|_{T^2_beta}^2 = c_n |f|_{L^2_beta}^2``: the unit-ball volume."""
    return unit_ball_volume(dim)


def save_field(path, f: SpaceTimeField) -> None:
    """Write a field to ``.npz``: values, time nodes and the grid description."""
    np.savez(path, values=f.values, nodes=f.tgrid.nodes, ratio=f.tgrid.ratio,
             quantum=np.nan if f.tgrid.quantum is None else f.tgrid.quantum,
             dim=f.grid.dim, N=f.grid.N, period=f.grid.period)


def load_field(path) -> SpaceTimeField:
    """Inverse of :func:`save_field`."""
    with np.load(path) as z:
        missing = {"values", "nodes", "dim", "N", "period"} - set(z.files)
        if missing:
            raise ValueError(f"{path}: field file lacks {sorted(missing)}")
        grid = build_grid(int(z["dim"]), int(z["N"]), float(z["period"]))
        q = float(z["quantum"]) if "quantum" in z.files else math.nan
        ratio = float(z["ratio"]) if "ratio" in z.files else math.nan
        tg = TimeGrid(np.array(z["nodes"], dtype=float), ratio, None if math.isnan(q) else q)
        return SpaceTimeField(grid, tg, np.array(z["values"]))
