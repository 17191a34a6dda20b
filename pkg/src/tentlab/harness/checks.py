"""Numerical probes of the inequalities behind the boundedness results.

Each check returns a plain dict of finite numbers (or raises on invalid
geometry) so that it can be written straight into a record.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..coefficients import CoefficientField
from ..geometry import Grid, ball_indices, ball_volume
from ..propagator import PropagatorCache, set_distance
from ..tentspaces import (SpaceTimeField, kenig_pipher_norm, lp_norm, slice_norm, tent_norm,
                          vertical_square_function, conical_square_function, mq_maximal_field,
                          whitney_averages)


def _ball_l2sq(grid: Grid, v: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """``|v|_{L^2(B)}^2`` for each time slice of ``v`` (shape ``(T,) + grid.shape``)."""
    flat = np.abs(v.reshape(v.shape[0], -1)[:, cells]) ** 2
    return flat.sum(axis=1) * grid.cell_volume


def caccioppoli_check(coeffs: CoefficientField, u: SpaceTimeField, f: SpaceTimeField, center, radius: float,
                      a_index: int, b_index: int) -> dict:
    """Ratio of ``|u(b)|^2_{L^2(B)}`` to the local energy bound.

    The denominator is ``(lambda1^2 / (lambda0 r^2) + 1/(b-a)) int_a^b |u|^2_{L^2(2B)}
    + (b-a) int_a^b |f|^2_{L^2(2B)}`` with time integrals over the nodes in
    ``(a, b]``.
    """
    grid, tg = u.grid, u.tgrid
    if 2 * radius >= grid.period / 4:
        raise ValueError("doubled ball must stay below a quarter period")
    if not 0 <= a_index < b_index < tg.size:
        raise ValueError("need a < b inside the time grid")
    B, _ = ball_indices(grid, center, radius)
    B2, _ = ball_indices(grid, center, 2 * radius)
    a, b = tg.nodes[a_index], tg.nodes[b_index]
    ks = np.arange(a_index + 1, b_index + 1)
    w = tg.weights[ks]
    lhs = float(_ball_l2sq(grid, u.values[[b_index]], B)[0])
    ue = float(np.dot(w, _ball_l2sq(grid, u.values[ks], B2)))
    fe = float(np.dot(w, _ball_l2sq(grid, f.values[ks], B2)))
    coef = coeffs.lambda1 ** 2 / (coeffs.lambda0 * radius ** 2) + 1.0 / (b - a)
    rhs = coef * ue + (b - a) * fe
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)}


def cesaro_check(u: SpaceTimeField, p: float, beta: float, center, radius: float, T: float) -> dict:
    """Ratio of ``avg_{(0,T)} |u(t)|_{L^2(B)}`` to ``T^(beta+1/2) |B|^(1/2-1/p) |u|_{T^p_{beta+1}}``.

    ``T`` is replaced by the last node not exceeding it.
    """
    if p < 2:
        raise ValueError("the Cesaro bound needs p >= 2")
    if not T < radius ** 2:
        raise ValueError("need T < r(B)^2")
    grid, tg = u.grid, u.tgrid
    ks = np.nonzero(tg.nodes <= T * (1 + 1e-12))[0]
    if ks.size == 0:
        raise ValueError("no node below T")
    B, _ = ball_indices(grid, center, radius)
    T = float(tg.nodes[ks[-1]])
    norms = np.sqrt(_ball_l2sq(grid, u.values[ks], B))
    mean = float(np.dot(tg.weights[ks], norms)) / T
    tn = tent_norm(u, p, beta + 1).value
    bound = T ** (beta + 0.5) * ball_volume(grid, radius) ** (0.5 - 1.0 / p) * tn
    ratio = mean / bound if bound > 0 else (0.0 if mean == 0 else math.inf)
    return {"mean": mean, "bound": bound, "ratio": ratio}


def _snap(x: np.ndarray, quantum: float) -> np.ndarray:
    return np.rint(np.asarray(x) / quantum) * quantum


def schur_check(cache: PropagatorCache, family: str, interval0, interval1, E: np.ndarray, F: np.ndarray,
                points: int = 8) -> dict:
    """Schur row and column integrals of ``omega(t, s) = |1_E K(t, s) 1_F|_{2->2}``.

    ``K(t, s)`` is ``e^{-(t-s)L}`` composed with the family map for ``t > s``
    and zero otherwise. Both intervals are sampled at ``points`` midpoints,
    snapped to multiples of the base gap. The rectangles must be separated
    in time or in space.
    """
    (a0, b0), (a1, b1) = interval0, interval1
    gap_t = max(0.0, a0 - b1, a1 - b0)
    E, F = np.asarray(E), np.asarray(F)
    eps = max(gap_t, set_distance(cache.grid, E, F))
    if not eps > 0:
        raise ValueError("rectangles not separated")
    ts = _snap(a0 + (np.arange(points) + 0.5) * (b0 - a0) / points, cache.base_gap)
    ss = _snap(a1 + (np.arange(points) + 0.5) * (b1 - a1) / points, cache.base_gap)
    dt, ds = (b0 - a0) / points, (b1 - a1) / points
    M = cache.grid.size
    X = np.zeros((M, F.size))
    X[F, np.arange(F.size)] = 1.0
    omega = np.zeros((points, points))
    for j, s in enumerate(ss):
        Y = None
        last = None
        for i, t in enumerate(ts):
            if t <= s:
                continue
            Y = cache.apply_exp(t - s, X) if Y is None else cache.apply_exp(t - last, Y)
            last = t
            if family == "semigroup":
                Z = Y[None]
            elif family == "generator_semigroup":
                Z = (cache.op.matrix @ Y)[None]
            elif family == "gradient_semigroup":
                Z = (cache.op.gradient @ Y).reshape(cache.grid.dim, M, F.size)
            else:
                raise ValueError(f"unknown family {family!r}")
            omega[i, j] = np.linalg.norm(Z[:, E, :].reshape(-1, F.size), 2)
    row = float(np.max(omega.sum(axis=1) * ds))
    col = float(np.max(omega.sum(axis=0) * dt))
    return {"row": row, "col": col, "max_kernel": float(omega.max()), "points": points, "separation": eps}


@dataclass
class TraceFit:
    mode: str
    beta: float
    target: float
    slope: float | None
    residual: float | None
    times: list
    values: list
    tag: str = ""

    def to_record(self) -> dict:
        return asdict(self)


def dyadic_nodes(tgrid, count: int, need_double: bool = False) -> list[int]:
    """Indices of the nodes closest (in log) to ``t_min 2^j``, ``j < count``."""
    out = []
    for j in range(count):
        t = tgrid.t_min * 2 ** j
        if need_double and 2 * t > tgrid.t_max * (1 + 1e-9):
            break
        if t > tgrid.t_max * (1 + 1e-9):
            break
        out.append(int(np.argmin(np.abs(np.log(tgrid.nodes / t)))))
    if len(out) < count:
        raise ValueError(f"time grid covers only {len(out)} of the {count} requested dyadic scales")
    return out


def trace_slope_fit(u: SpaceTimeField, beta: float, mode: str = "whitney_sup", scales: int = 6,
                    p: float = 2.0) -> TraceFit:
    """Log-log slope of a trace functional over the smallest dyadic scales.

    Modes: ``whitney_sup`` (largest Whitney average), ``slice_inf`` (the
    ``E^inf_{t/16}`` norm of ``u(t)``) and ``Lp`` (``|u(t)|_p``). The
    reference rate is ``beta + 1/2``.
    """
    grid, tg = u.grid, u.tgrid
    ks = dyadic_nodes(tg, scales, need_double=(mode == "whitney_sup"))
    vals = []
    for k in ks:
        if mode == "whitney_sup":
            vals.append(float(np.max(whitney_averages(u, k))))
        elif mode == "slice_inf":
            vals.append(slice_norm(grid, u.values[k], math.inf, tg.nodes[k] / 16))
        elif mode == "Lp":
            vals.append(lp_norm(grid, np.sqrt(u.magnitude2()[k]), p))
        else:
            raise ValueError(f"unknown trace mode {mode!r}")
    times = [float(tg.nodes[k]) for k in ks]
    if all(v == 0 for v in vals):
        return TraceFit(mode, beta, beta + 0.5, None, None, times, vals, "exact-zero")
    keep = [i for i, v in enumerate(vals) if v > 0]
    x = np.log(np.array(times)[keep])
    y = np.log(np.array(vals)[keep])
    coef = np.polyfit(x, y, 1)
    res = float(np.sqrt(np.mean((y - np.polyval(coef, x)) ** 2)))
    return TraceFit(mode, beta, beta + 0.5, float(coef[0]), res, times, vals)


@dataclass
class SemigroupRange:
    p_list: list
    growth: list
    cap: float
    passing: list
    p_minus: float | None
    p_plus: float | None
    flags: list = field(default_factory=list)
    gradient_growth: list = field(default_factory=list)
    q_minus: float | None = None
    q_plus: float | None = None

    def to_record(self) -> dict:
        return asdict(self)


def estimate_semigroup_range(cache: PropagatorCache, p_list, t_list, samples: int = 128, cap: float = 2.0,
                             seed: int = 0) -> SemigroupRange:
    """Sampled lower bounds for ``sup_t |e^{-tL}|_{p->p}`` and the range where they stay below ``cap``.

    This is a heuristic: the inputs are seeded complex Gaussians, all point
    masses and the constant, so the growth values are lower bounds only. The same
    inputs give sampled bounds for ``t^(1/2) grad e^{-tL}`` and a bracket
    ``(q_minus, q_plus)`` for the gradient family.
    """
    grid = cache.grid
    M = grid.size
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((M, samples)) + 1j * rng.standard_normal((M, samples))
    G = np.concatenate([G, np.eye(M), np.ones((M, 1))], axis=1)
    vol = grid.cell_volume
    Ys = [cache.apply_exp(t, G) for t in t_list]
    outs = [np.abs(Y) for Y in Ys]
    grads = []
    for t, Y in zip(t_list, Ys):
        D = (cache.op.gradient @ Y).reshape(grid.dim, M, -1)
        grads.append(math.sqrt(t) * np.sqrt(np.sum(np.abs(D) ** 2, axis=0)))
    den = {p: _col_norms(np.abs(G), p, vol) for p in p_list}
    growth = [max(float(np.max(_col_norms(Y, p, vol) / den[p])) for Y in outs) for p in p_list]
    gradient_growth = [max(float(np.max(_col_norms(Y, p, vol) / den[p])) for Y in grads) for p in p_list]
    passing = [p for p, g in zip(p_list, growth) if g <= cap]
    p_minus, p_plus = _bracket(p_list, growth, cap)
    q_minus, q_plus = _bracket(p_list, gradient_growth, cap)
    flags = ["HEURISTIC: sampled lower bounds; the gradient bracket (q) is not separated from the semigroup "
             "bracket (p) by this probe"]
    if len(t_list) == 1:
        flags.append("single time only; supremum over t not probed")
    return SemigroupRange(list(p_list), growth, cap, passing, p_minus, p_plus, flags, gradient_growth,
                          q_minus, q_plus)


def _bracket(p_list, growth, cap: float) -> tuple[float | None, float | None]:
    """Largest interval around 2 of consecutive tested exponents with growth at most ``cap``."""
    ok = {p for p, g in zip(p_list, growth) if g <= cap}
    if 2 not in ok:
        return None, None
    order = sorted(p_list)
    lo = 2.0
    for p in reversed([p for p in order if p <= 2]):
        if p not in ok:
            break
        lo = p
    hi = 2.0
    for p in [p for p in order if p >= 2]:
        if p not in ok:
            break
        hi = p
    return lo, hi


def _col_norms(Y: np.ndarray, p: float, vol: float) -> np.ndarray:
    if math.isinf(p):
        return np.max(Y, axis=0)
    return (np.sum(Y ** p, axis=0) * vol) ** (1.0 / p)


def slice_change_ratio(grid: Grid, g: np.ndarray, p: float, delta: float, delta2: float) -> float:
    """``|g|_{E^p_delta} / (max(1, (delta2/delta)^((n/2)(1/2-1/p))) |g|_{E^p_delta2})``."""
    n = grid.dim
    factor = max(1.0, (delta2 / delta) ** (n / 2 * (0.5 - 1.0 / p)))
    den = factor * slice_norm(grid, g, p, delta2)
    return slice_norm(grid, g, p, delta) / den


def kp_embedding_ratio(u: SpaceTimeField, p: float, beta: float) -> float:
    """``N_beta(u)`` in ``L^p`` over ``|u|_{T^p_{beta+1/2}}``."""
    return kenig_pipher_norm(u, p, beta).value / tent_norm(u, p, beta + 0.5).value


def domination_constant(Tz_out: SpaceTimeField, f: SpaceTimeField, beta: float, kappa: float, q: float,
                        m: float = 2) -> float:
    """``max_x A_{beta+kappa}(T_z f)(x) / V_beta(M_q f)(x)``."""
    lhs = conical_square_function(Tz_out, beta + kappa, m)
    rhs = vertical_square_function(mq_maximal_field(f, q), beta)
    mask = rhs > 0
    if np.any(lhs[~mask] > 0):
        return math.inf
    return float(np.max(lhs[mask] / rhs[mask]))
