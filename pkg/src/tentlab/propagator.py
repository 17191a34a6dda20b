"""Dyadic cache of ``e^{-tL}`` and its integrated forms, plus off-diagonal norms.

Level ``j`` of the cache holds, for ``a = delta 2^j``,

* ``E_a = e^{-aL}``
* ``P_a = int_0^a e^{-rL} dr = a phi_1(aL)``
* ``Q_a = int_0^a (a - r) e^{-rL} dr = a^2 phi_2(aL)``

Level 0 comes from a (6,6) Pade approximant and a Taylor series on a scaled
copy of ``delta L``, followed by repeated doubling. Any gap that is an integer
multiple of ``delta`` is then applied through its binary decomposition using

* ``E_{a+b} = E_a E_b``
* ``P_{a+b} = P_a + E_a P_b``
* ``Q_{a+b} = b P_a + Q_a + E_a Q_b``
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .geometry import Grid, TimeGrid, ball_indices, torus_distance
from .operator import DiscreteOperator

PADE_ORDER = 6
MAX_SQUARINGS = 60
MAX_LEVELS = 40
_GAP_RTOL = 1e-9
FAMILIES = ("semigroup", "gradient_semigroup", "generator_semigroup", "adjoint_semigroup")


class UnresolvableGapError(ValueError):
    """Raised for a time gap that is not a cached multiple of the base gap."""


def pade_expm_neg(Z: np.ndarray, order: int = PADE_ORDER) -> np.ndarray:
    """Diagonal Pade approximant of ``e^{-Z}``; accurate for ``|Z| <= 1/2``."""
    q = order
    c = [factorial(2 * q - k) * factorial(q) / (factorial(2 * q) * factorial(k) * factorial(q - k))
         for k in range(q + 1)]
    eye = np.eye(Z.shape[0], dtype=Z.dtype)
    X = -Z
    num = c[q] * eye
    den = c[q] * eye
    for k in range(q - 1, -1, -1):
        num = X @ num + c[k] * eye
        den = -X @ den + c[k] * eye
    return np.linalg.solve(den, num)


def _phi_series(Z: np.ndarray, shift: int, terms: int = 24) -> np.ndarray:
    """``sum_k (-Z)^k / (k + shift)!`` by Horner's rule."""
    eye = np.eye(Z.shape[0], dtype=Z.dtype)
    acc = eye / factorial(terms + shift)
    for k in range(terms - 1, -1, -1):
        acc = -Z @ acc + eye / factorial(k + shift)
    return acc


def _double(E, P, Q, a):
    """Level data for ``2a`` from level data for ``a``."""
    Q2 = a * P + Q + E @ Q
    P2 = P + E @ P
    return E @ E, P2, Q2


@dataclass
class PropagatorCache:
    """Dyadic levels ``delta 2^j``, ``j = 0..levels``, for one operator."""

    op: DiscreteOperator
    base_gap: float
    levels: int
    exp: list[np.ndarray]
    int1: list[np.ndarray]
    int2: list[np.ndarray]
    squarings: int
    _adjoint: "PropagatorCache | None" = field(default=None, repr=False)
    _dense: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self) -> Grid:
        return self.op.grid

    @property
    def max_gap(self) -> float:
        return self.base_gap * (2 ** (self.levels + 1) - 1)

    def multiple(self, gap: float) -> int:
        """Integer ``n`` with ``gap = n delta``, or raise listing nearby gaps."""
        if gap < 0:
            raise UnresolvableGapError(f"negative gap {gap}")
        x = gap / self.base_gap
        n = int(round(x))
        ok = abs(x - n) <= _GAP_RTOL * max(x, 1.0)
        if ok and n < 2 ** (self.levels + 1):
            return n
        lo = min(math.floor(x), 2 ** (self.levels + 1) - 1)
        hi = min(lo + 1, 2 ** (self.levels + 1) - 1)
        raise UnresolvableGapError(
            f"gap {gap!r} is not resolvable with base gap {self.base_gap!r} and {self.levels} levels; "
            f"nearest resolvable gaps: {lo * self.base_gap!r}, {hi * self.base_gap!r}")

    def resolvable(self, gap: float) -> bool:
        try:
            self.multiple(gap)
            return True
        except UnresolvableGapError:
            return False

    def pieces(self, gap: float) -> list[int]:
        """Levels whose gaps sum to ``gap``, in increasing order."""
        n = self.multiple(gap)
        return [j for j in range(self.levels + 1) if n >> j & 1]

    def apply_exp(self, gap: float, X: np.ndarray) -> np.ndarray:
        """``e^{-gap L} X`` for flat columns ``X``."""
        out = X
        for j in self.pieces(gap):
            out = self.exp[j] @ out
        return out

    def apply_int1(self, gap: float, X: np.ndarray) -> np.ndarray:
        """``int_0^gap e^{-rL} dr X``, i.e. ``gap phi_1(gap L) X``."""
        js = self.pieces(gap)
        if not js:
            return np.zeros_like(X, dtype=np.result_type(X, self.exp[0]))
        acc = self.int1[js[-1]] @ X
        for j in reversed(js[:-1]):
            acc = self.int1[j] @ X + self.exp[j] @ acc
        return acc

    def apply_phi1(self, gap: float, X: np.ndarray) -> np.ndarray:
        """``phi_1(gap L) X`` with ``phi_1(0) = I``."""
        if self.multiple(gap) == 0:
            return np.array(X, dtype=np.result_type(X, self.exp[0]))
        return self.apply_int1(gap, X) / gap

    def apply_int2(self, gap: float, X: np.ndarray) -> np.ndarray:
        """``int_0^gap (gap - r) e^{-rL} dr X``, i.e. ``gap^2 phi_2(gap L) X``."""
        js = self.pieces(gap)
        if not js:
            return np.zeros_like(X, dtype=np.result_type(X, self.exp[0]))
        j = js[-1]
        acc = self.int2[j] @ X
        tail = self.base_gap * 2 ** j
        for j in reversed(js[:-1]):
            acc = tail * (self.int1[j] @ X) + self.int2[j] @ X + self.exp[j] @ acc
            tail += self.base_gap * 2 ** j
        return acc

    def expm(self, gap: float) -> np.ndarray:
        """Dense ``e^{-gap L}``; memoized for a handful of gaps."""
        n = self.multiple(gap)
        if n not in self._dense:
            if len(self._dense) >= 16:
                self._dense.pop(next(iter(self._dense)))
            self._dense[n] = self.apply_exp(gap, np.eye(self.grid.size, dtype=self.exp[0].dtype))
        return self._dense[n]

    def adjoint(self) -> "PropagatorCache":
        """Cache for ``L*`` built independently with the same levels."""
        if self._adjoint is None:
            self._adjoint = build_propagator(self.op.adjoint(), self.base_gap, self.levels)
            self._adjoint._adjoint = self
        return self._adjoint

    def descriptor(self) -> dict:
        return {"base_gap": self.base_gap, "levels": self.levels, "squarings": self.squarings,
                "adjoint": self.op.is_adjoint}


def build_propagator(op: DiscreteOperator, base_gap: float, levels: int) -> PropagatorCache:
    """Build the dyadic cache for ``L`` with gaps ``base_gap 2^j``, ``j <= levels``."""
    if not base_gap > 0:
        raise ValueError("base gap must be positive")
    if not 0 <= levels <= MAX_LEVELS:
        raise ValueError(f"levels must lie in [0, {MAX_LEVELS}]")
    Z = base_gap * op.matrix
    norm = np.linalg.norm(Z, 1)
    s = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    if s > MAX_SQUARINGS:
        raise ValueError(f"base gap too large for conditioning: {s} squarings exceed {MAX_SQUARINGS}")
    a = base_gap / 2 ** s
    Zs = Z / 2 ** s
    E = pade_expm_neg(Zs)
    P = a * _phi_series(Zs, 1)
    Q = a * a * _phi_series(Zs, 2)
    for _ in range(s):
        E, P, Q = _double(E, P, Q, a)
        a *= 2
    exp, int1, int2 = [E], [P], [Q]
    for _ in range(levels):
        E, P, Q = _double(E, P, Q, a)
        a *= 2
        exp.append(E)
        int1.append(P)
        int2.append(Q)
    return PropagatorCache(op, float(base_gap), int(levels), exp, int1, int2, s)


def propagator_for(op: DiscreteOperator, tgrid: TimeGrid, subdivisions: int = 7) -> tuple[PropagatorCache, TimeGrid]:
    """Cache whose base gap is ``t_min / 2^subdivisions`` and a mesh aligned to it.

    Nodes are snapped to multiples of twice the base gap so that every cell
    and half-cell gap resolves.
    """
    delta = tgrid.t_min / 2 ** subdivisions
    aligned = tgrid.aligned(2 * delta)
    levels = max(1, math.ceil(math.log2(aligned.t_max / delta + 1)))
    return build_propagator(op, delta, levels), aligned


def semigroup_apply(cache: PropagatorCache, t: float, g: np.ndarray) -> np.ndarray:
    """``e^{-tL} g`` for a field on the cache grid."""
    grid = cache.grid
    return cache.apply_exp(t, np.asarray(g).ravel()).reshape(grid.shape)


def gradient_semigroup_apply(cache: PropagatorCache, t: float, g: np.ndarray) -> np.ndarray:
    """``grad e^{-tL} g``; components on axis 0."""
    return cache.op.grad(semigroup_apply(cache, t, g))


def generator_semigroup_apply(cache: PropagatorCache, t: float, g: np.ndarray) -> np.ndarray:
    """``L e^{-tL} g``."""
    return cache.op.apply(semigroup_apply(cache, t, g))


def family_columns(cache: PropagatorCache, family: str, t: float, F: np.ndarray) -> np.ndarray:
    """Columns ``F`` of the scaled family member at time ``t``.

    The families are ``e^{-tL}``, ``t^(1/2) grad e^{-tL}``, ``t L e^{-tL}`` and
    ``e^{-tL*}``. The result has shape ``(components, N^dim, len(F))``.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    M = cache.grid.size
    X = np.zeros((M, len(F)))
    X[F, np.arange(len(F))] = 1.0
    if family == "adjoint_semigroup":
        return cache.adjoint().apply_exp(t, X)[None]
    Y = cache.apply_exp(t, X)
    if family == "semigroup":
        return Y[None]
    if family == "generator_semigroup":
        return (t * (cache.op.matrix @ Y))[None]
    G = cache.op.gradient @ Y
    return math.sqrt(t) * G.reshape(cache.grid.dim, M, len(F))


def _lp(v: np.ndarray, p: float, vol: float) -> float:
    """Discrete ``L^p`` norm of the pointwise magnitudes ``v`` (1-D array)."""
    if math.isinf(p):
        return float(np.max(v)) if v.size else 0.0
    return float(np.sum(v ** p) * vol) ** (1.0 / p)


def offdiagonal_norm(cache: PropagatorCache, family: str, t: float, E: np.ndarray, F: np.ndarray,
                     q: float = 2.0, r: float = 2.0, samples: int = 256, seed: int = 0) -> tuple[float, bool]:
    """``|1_E T(t) 1_F|`` from ``L^q`` to ``L^r`` for a family member ``T(t)``.

    The (2,2) case is the exact largest singular value of the masked block.
    Other exponents return a lower bound: the best ratio over seeded random
    inputs supported in ``F`` and the point masses of ``F``. The flag is
    True when the value is exact.
    """
    E = np.asarray(E)
    F = np.asarray(F)
    cols = family_columns(cache, family, t, F)
    block = cols[:, E, :]
    if q == 2 and r == 2:
        flat = block.reshape(-1, len(F))
        return float(np.linalg.norm(flat, 2)), True
    vol = cache.grid.cell_volume
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((len(F), samples)) + 1j * rng.standard_normal((len(F), samples))
    G = np.concatenate([G, np.eye(len(F))], axis=1)
    out = np.einsum("cef,fs->ces", block, G)
    mag = np.sqrt(np.sum(np.abs(out) ** 2, axis=0))
    best = 0.0
    for s in range(G.shape[1]):
        num = _lp(mag[:, s], r, vol)
        den = _lp(np.abs(G[:, s]), q, vol)
        best = max(best, num / den)
    return best, False


def set_distance(grid: Grid, A: np.ndarray, B: np.ndarray) -> float:
    """Smallest torus distance between two sets of cell centers."""
    ca = np.stack(np.unravel_index(A, grid.shape), axis=1) * grid.h
    cb = np.stack(np.unravel_index(B, grid.shape), axis=1) * grid.h
    if grid.dim == 1:
        d = torus_distance(grid, ca[:, None, 0], cb[None, :, 0])
    else:
        d = torus_distance(grid, ca[:, None, :], cb[None, :, :])
    return float(np.min(d))


@dataclass
class DecayFit:
    """Least-squares decay order from masked norms.

    ``M_hat`` is minus the slope of ``log(norm / norm0)`` against
    ``log(1 + d^2 / t)``; ``residual`` is the RMS misfit in natural-log units.
    """

    family: str
    q: float
    r: float
    M_hat: float
    intercept: float
    residual: float
    samples: list[dict]
    used: int

    def to_record(self) -> dict:
        return {"family": self.family, "q": self.q, "r": self.r, "M_hat": self.M_hat,
                "intercept": self.intercept, "residual": self.residual, "used": self.used,
                "samples": self.samples}


def decay_pair(grid: Grid, separation: float, radius: float, center: int = 0) -> tuple[np.ndarray, np.ndarray, float]:
    """Balls ``E`` and ``F`` of one radius whose cell sets are about ``separation`` apart.

    The second center is shifted along the first axis. Returns the measured
    set distance alongside the index sets.
    """
    c0 = np.zeros(grid.dim, dtype=int)
    c0[0] = center
    E, _ = ball_indices(grid, c0, radius)
    shift = int(round((separation + 2 * radius) / grid.h))
    c1 = c0.copy()
    c1[0] += shift
    F, _ = ball_indices(grid, c1, radius)
    return E, F, set_distance(grid, E, F)


def fit_decay_order(cache: PropagatorCache, family: str, times, separations, radius: float = 0.05,
                    q: float = 2.0, r: float = 2.0, seed: int = 0) -> DecayFit:
    """Fit the decay order of a family over a grid of times and separations.

    Samples with ``norm >= norm0 / 2`` (no decay yet) or with
    ``norm / norm0 <= 1e-13`` (roundoff floor) are excluded from the fit.
    """
    grid = cache.grid
    samples = []
    xs, ys = [], []
    for t in times:
        E0, _, _ = decay_pair(grid, 0.0, radius)
        n0, _ = offdiagonal_norm(cache, family, t, E0, E0, q, r, seed=seed)
        for d in separations:
            E, F, dist = decay_pair(grid, d, radius)
            if family == "adjoint_semigroup":
                E, F = F, E
            val, exact = offdiagonal_norm(cache, family, t, E, F, q, r, seed=seed)
            ratio = val / n0 if n0 > 0 else 0.0
            used = bool(n0 > 0 and 1e-13 < ratio < 0.5)
            samples.append({"t": float(t), "d": dist, "norm": val, "norm0": n0, "used": used, "exact": exact})
            if used:
                xs.append(math.log1p(dist * dist / t))
                ys.append(math.log(ratio))
    if len(xs) < 2:
        raise ValueError("fewer than two usable samples for the decay fit")
    X = np.column_stack([np.ones(len(xs)), xs])
    coef, *_ = np.linalg.lstsq(X, np.array(ys), rcond=None)
    res = np.array(ys) - X @ coef
    return DecayFit(family, q, r, float(-coef[1]), float(coef[0]),
                    float(math.sqrt(np.mean(res ** 2))), samples, len(xs))
