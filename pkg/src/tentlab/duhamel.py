"""Duhamel-type operators for sources that are piecewise constant in time.

The source value at node ``k`` is held on the cell ``(t_{k-1}, t_k]`` (with
``t_{-1} = 0``). Within a cell the solution has a closed form, so with
``w = t_k - t_{k-1}`` the recursions

* ``u_k = e^{-wL} u_{k-1} + w phi_1(wL) f_k``
* ``z_k = e^{-wL} z_{k-1} + (I - e^{-wL}) f_k``

give the exact values of the integral operators at the nodes. The first is
the solution operator itself; the second is the same operator composed with
``L`` and is computed without ever forming ``L u``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operator import DiscreteOperator, inner
from .propagator import PropagatorCache
from .tentspaces import SpaceTimeField

OPERATOR_FAMILIES = {"semigroup": "L1", "gradient_semigroup": "Lhalf", "generator_semigroup": "L0"}


@dataclass
class DuhamelSolution:
    """Node values of an operator output and, for ``L1``, its cell averages."""

    kind: str
    u: SpaceTimeField
    mean: SpaceTimeField | None = None
    flags: list = field(default_factory=list)


def _flat_source(cache: PropagatorCache, f: SpaceTimeField) -> np.ndarray:
    if f.grid != cache.grid:
        raise ValueError("source grid does not match the propagator grid")
    if f.components != 1 or f.values.ndim != 1 + f.grid.dim:
        raise ValueError("source must be a scalar field")
    return f.values.reshape(f.tgrid.size, -1)


def _check_weights(cache: PropagatorCache, f: SpaceTimeField):
    for w in f.tgrid.weights:
        cache.multiple(w)


def duhamel_L1(cache: PropagatorCache, f: SpaceTimeField) -> DuhamelSolution:
    """``u(t) = int_0^t e^{-(t-s)L} f(s) ds`` at the nodes, with cell averages."""
    F = _flat_source(cache, f)
    _check_weights(cache, f)
    tg = f.tgrid
    M = cache.grid.size
    dtype = np.result_type(F, cache.exp[0])
    U = np.zeros((tg.size, M), dtype=dtype)
    mean = np.zeros((tg.size, M), dtype=dtype)
    prev = np.zeros(M, dtype=dtype)
    for k, w in enumerate(tg.weights):
        U[k] = cache.apply_exp(w, prev) + cache.apply_int1(w, F[k])
        mean[k] = (cache.apply_int1(w, prev) + cache.apply_int2(w, F[k])) / w
        prev = U[k]
    shape = (tg.size,) + cache.grid.shape
    return DuhamelSolution("L1", SpaceTimeField(f.grid, tg, U.reshape(shape)),
                           SpaceTimeField(f.grid, tg, mean.reshape(shape)))


def duhamel_Lhalf(cache: PropagatorCache, f: SpaceTimeField) -> DuhamelSolution:
    """Gradient of the solution operator.

    The gradient is applied to each term of the recursion, so the output
    never goes through the node values of ``L1``.
    """
    F = _flat_source(cache, f)
    _check_weights(cache, f)
    tg = f.tgrid
    D = cache.op.gradient
    n = cache.grid.dim
    M = cache.grid.size
    dtype = np.result_type(F, cache.exp[0])
    V = np.zeros((tg.size, n * M), dtype=dtype)
    prev = np.zeros(M, dtype=dtype)
    for k, w in enumerate(tg.weights):
        a = cache.apply_exp(w, prev)
        b = cache.apply_int1(w, F[k])
        V[k] = D @ a + D @ b
        prev = a + b
    shape = (tg.size, n) + cache.grid.shape
    return DuhamelSolution("Lhalf", SpaceTimeField(f.grid, tg, V.reshape(shape)))


def duhamel_L0(cache: PropagatorCache, f: SpaceTimeField) -> DuhamelSolution:
    """``int_0^t L e^{-(t-s)L} f(s) ds`` by the telescoping recursion."""
    F = _flat_source(cache, f)
    _check_weights(cache, f)
    tg = f.tgrid
    M = cache.grid.size
    dtype = np.result_type(F, cache.exp[0])
    Z = np.zeros((tg.size, M), dtype=dtype)
    prev = np.zeros(M, dtype=dtype)
    for k, w in enumerate(tg.weights):
        Z[k] = cache.apply_exp(w, prev) + F[k] - cache.apply_exp(w, F[k])
        prev = Z[k]
    return DuhamelSolution("L0", SpaceTimeField(f.grid, tg, Z.reshape((tg.size,) + cache.grid.shape)))


def apply_operator(cache: PropagatorCache, kind: str, f: SpaceTimeField) -> DuhamelSolution:
    """Dispatch on ``"L1"``, ``"Lhalf"`` or ``"L0"``."""
    fn = {"L1": duhamel_L1, "Lhalf": duhamel_Lhalf, "L0": duhamel_L0}.get(kind)
    if fn is None:
        raise ValueError(f"unknown operator {kind!r}")
    return fn(cache, f)


def _family_map(cache: PropagatorCache, family: str, X: np.ndarray) -> np.ndarray:
    if family == "semigroup":
        return X
    if family == "generator_semigroup":
        return cache.op.matrix @ X
    if family == "gradient_semigroup":
        return cache.op.gradient @ X
    raise ValueError(f"unknown family {family!r}")


def _half_split(nodes: np.ndarray, k: int) -> tuple[int, float]:
    """Last index ``J`` with ``t_J <= t_k / 2`` (``-1`` if none) and the leftover ``t_k/2 - t_J``."""
    half = nodes[k] / 2
    J = int(np.searchsorted(nodes, half * (1 + 1e-12), side="right")) - 1
    left = nodes[J] if J >= 0 else 0.0
    rest = half - left
    if abs(rest) <= 1e-12 * half:
        rest = 0.0
    return J, rest


def duhamel_Tz(cache: PropagatorCache, family: str, z: complex, f: SpaceTimeField) -> DuhamelSolution:
    """Regular part ``T_z f(t) = int_0^{t/2} (s/t)^z K(t, s) f(s) ds`` at the nodes.

    Cells lying entirely in ``(0, t/2]`` use the midpoint rule. The cell that
    straddles ``t/2`` is cut there; its lower fragment is integrated exactly
    against the kernel with the weight frozen at the fragment midpoint. ``K``
    is ``e^{-(t-s)L}`` composed with the identity, the gradient or ``L``
    according to ``family``.
    """
    F = _flat_source(cache, f)
    tg = f.tgrid
    nodes, w = tg.nodes, tg.weights
    left = nodes - w
    mids = left + w / 2
    M = cache.grid.size
    zc = complex(z)
    zz = zc.real if zc.imag == 0 else zc
    dtype = np.result_type(F, cache.exp[0], type(zz))
    out = []
    acc = np.zeros(M, dtype=dtype)
    J_done = -1
    empty = 0
    for k in range(tg.size):
        J, rest = _half_split(nodes, k)
        while J_done < J:
            j = J_done + 1
            g = mids[j] ** zz * w[j] * cache.apply_exp(w[j] / 2, F[j])
            acc = cache.apply_exp(w[j], acc) + g if j > 0 else g
            J_done = j
        total = cache.apply_exp(nodes[k] - nodes[J], acc) if J >= 0 else np.zeros(M, dtype=dtype)
        if rest > 0:
            lo = nodes[J] if J >= 0 else 0.0
            frag = cache.apply_exp(nodes[k] / 2, cache.apply_int1(rest, F[J + 1]))
            total = total + (lo + rest / 2) ** zz * frag
        if J < 0 and rest == 0:
            empty += 1
        out.append(nodes[k] ** (-zz) * _family_map(cache, family, total))
    comps = cache.grid.dim if family == "gradient_semigroup" else 1
    shape = (tg.size,) + ((comps,) if family == "gradient_semigroup" else ()) + cache.grid.shape
    flags = [f"{empty} nodes with an empty regular range"] if empty else []
    return DuhamelSolution("Tz", SpaceTimeField(f.grid, tg, np.array(out).reshape(shape)), flags=flags)


def split_regular_singular(cache: PropagatorCache, family: str, f: SpaceTimeField) -> tuple[SpaceTimeField, SpaceTimeField]:
    """``(T_0 f, T_sing f)`` where ``T_sing`` is the full operator minus ``T_0``."""
    if family not in OPERATOR_FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    reg = duhamel_Tz(cache, family, 0.0, f).u
    full = apply_operator(cache, OPERATOR_FAMILIES[family], f).u
    return reg, SpaceTimeField(f.grid, f.tgrid, full.values - reg.values)


def singular_part_exact(cache: PropagatorCache, f: SpaceTimeField) -> SpaceTimeField:
    """Closed form of ``int_{t/2}^t e^{-(t-s)L} f(s) ds`` at the nodes."""
    sol = duhamel_L1(cache, f)
    F = _flat_source(cache, f)
    tg = f.tgrid
    U = sol.u.values.reshape(tg.size, -1)
    out = np.zeros_like(U)
    for k in range(tg.size):
        J, rest = _half_split(tg.nodes, k)
        mid = U[J] if J >= 0 else np.zeros_like(U[0])
        if rest > 0:
            mid = cache.apply_exp(rest, mid) + cache.apply_int1(rest, F[J + 1])
        out[k] = U[k] - cache.apply_exp(tg.nodes[k] / 2, mid)
    return SpaceTimeField(f.grid, tg, out.reshape(sol.u.values.shape))


def free_evolution(cache: PropagatorCache, tgrid, g: np.ndarray, adjoint: bool = False) -> SpaceTimeField:
    """``t -> e^{-tL} g`` (or ``e^{-tL*} g``) sampled at the nodes."""
    c = cache.adjoint() if adjoint else cache
    vals = []
    cur = np.asarray(g).ravel()
    prev_t = 0.0
    for t in tgrid.nodes:
        cur = c.apply_exp(t - prev_t, cur)
        prev_t = t
        vals.append(cur)
    return SpaceTimeField(cache.grid, tgrid, np.array(vals).reshape((tgrid.size,) + cache.grid.shape))


def homotopy_residual(cache: PropagatorCache, v: SpaceTimeField, s_index: int, t_index: int,
                      h: np.ndarray) -> dict:
    """Compare ``<v(t), h>`` with ``<v(s), e^{-(t-s)L*} h>`` for a null-source solution ``v``."""
    if t_index < s_index:
        raise ValueError("need s <= t")
    grid = cache.grid
    gap = v.tgrid.nodes[t_index] - v.tgrid.nodes[s_index]
    back = cache.adjoint().apply_exp(gap, np.asarray(h).ravel()).reshape(grid.shape)
    lhs = inner(grid, v.values[t_index], h)
    rhs = inner(grid, v.values[s_index], back)
    scale = np.sqrt(inner(grid, v.values[s_index], v.values[s_index]).real * inner(grid, h, h).real)
    diff = abs(lhs - rhs)
    return {"absolute": diff, "relative": diff / scale if scale > 0 else diff}


def weak_form_residual(op: DiscreteOperator, u: SpaceTimeField, f: SpaceTimeField, phi: SpaceTimeField,
                       u_mean: SpaceTimeField | None = None) -> dict:
    """Discrete weak form tested against ``phi`` vanishing at the end nodes.

    ``sum_k <u_k, phi_k - phi_{k+1}> + sum_k w_k <A grad ubar_k, grad phi_k>
    - sum_k w_k <f_k, phi_k>``, where ``ubar_k`` is the cell average of ``u``.
    Without ``u_mean`` the average is replaced by the trapezoid value, which
    is only second-order accurate.
    """
    tg = u.tgrid
    grid = op.grid
    P = phi.values
    if np.any(P[0]) or np.any(P[-1]):
        raise ValueError("test function must vanish at the first and last time nodes")
    U = u.values
    if u_mean is None:
        prev = np.concatenate([np.zeros_like(U[:1]), U[:-1]])
        bar = 0.5 * (prev + U)
    else:
        bar = u_mean.values
    w = tg.weights
    nxt = np.concatenate([P[1:], np.zeros_like(P[:1])])
    t1 = sum(inner(grid, U[k], P[k] - nxt[k]) for k in range(tg.size))
    t2 = sum(w[k] * inner(grid, op.flux(bar[k]), op.grad(P[k])) for k in range(tg.size))
    t3 = sum(w[k] * inner(grid, f.values[k], P[k]) for k in range(tg.size))
    res = t1 + t2 - t3
    scale = max(abs(t1), abs(t2), abs(t3))
    return {"absolute": abs(res), "relative": abs(res) / scale if scale > 0 else abs(res),
            "terms": (t1, t2, t3)}


def maximal_regularity_residual(op: DiscreteOperator, sol: DuhamelSolution, f: SpaceTimeField) -> float:
    """Largest cellwise relative defect of ``u_k - u_{k-1} + L int u = w f_k``."""
    if sol.mean is None:
        raise ValueError("needs cell averages")
    tg = f.tgrid
    U = sol.u.values.reshape(tg.size, -1)
    B = sol.mean.values.reshape(tg.size, -1)
    F = f.values.reshape(tg.size, -1)
    worst = 0.0
    prev = np.zeros_like(U[0])
    for k, w in enumerate(tg.weights):
        lu = op.matrix @ (w * B[k])
        r = U[k] - prev + lu - w * F[k]
        scale = max(np.linalg.norm(U[k]), np.linalg.norm(prev), np.linalg.norm(lu), np.linalg.norm(w * F[k]))
        if scale > 0:
            worst = max(worst, np.linalg.norm(r) / scale)
        prev = U[k]
    return float(worst)
