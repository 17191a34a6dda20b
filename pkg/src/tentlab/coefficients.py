"""Cellwise coefficient matrices and their ellipticity constants.

A field is fully described by its descriptor (kind, parameters, seed, grid and
refinement factor); values are always regenerated from it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Grid, build_grid

KINDS = ("identity", "scalar_checkerboard", "random_real_symmetric", "complex_perturbation")

_DEFAULTS = {
    "identity": {},
    "scalar_checkerboard": {"lo": 1.0, "hi": 10.0, "period": 4},
    "random_real_symmetric": {"lo": 1.0, "hi": 4.0},
    "complex_perturbation": {"eps": 0.3},
}


@dataclass
class CoefficientField:
    """Matrices ``A(x)`` of shape ``grid.shape + (dim, dim)``.

    ``lambda0`` is the smallest eigenvalue of the Hermitian part and
    ``lambda1`` the largest operator norm over all cells.
    """

    grid: Grid
    matrices: np.ndarray
    lambda0: float
    lambda1: float
    kind: str
    params: dict
    seed: int | None = None
    refine: int = 1

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.matrices) or not np.any(self.matrices.imag)

    def descriptor(self) -> dict:
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "seed": self.seed,
            "grid": self.grid.descriptor(),
            "refine": self.refine,
        }

    def refined(self, factor: int) -> "CoefficientField":
        """Transport to a grid ``factor`` times finer by cell-block replication."""
        if factor == 1:
            return self
        A = self.matrices
        for ax in range(self.grid.dim):
            A = np.repeat(A, factor, axis=ax)
        return CoefficientField(self.grid.refine(factor), A, self.lambda0, self.lambda1,
                                self.kind, dict(self.params), self.seed, self.refine * factor)


def ellipticity_constants(matrices: np.ndarray) -> tuple[float, float]:
    """Closed-form ``(lambda0, lambda1)`` for 1x1 or 2x2 cell matrices."""
    A = np.asarray(matrices)
    d = A.shape[-1]
    if d == 1:
        a = A[..., 0, 0]
        return float(np.min(np.real(a))), float(np.max(np.abs(a)))
    if d != 2:
        raise ValueError("closed forms only cover dimensions 1 and 2")
    lam0 = np.min(_hermitian_eigs(0.5 * (A + np.conj(np.swapaxes(A, -1, -2))))[0])
    gram = np.conj(np.swapaxes(A, -1, -2)) @ A
    lam1 = np.sqrt(np.max(_hermitian_eigs(gram)[1]))
    return float(lam0), float(lam1)


def _hermitian_eigs(H):
    a = np.real(H[..., 0, 0])
    d = np.real(H[..., 1, 1])
    b = np.abs(H[..., 0, 1])
    mid = 0.5 * (a + d)
    rad = np.sqrt((0.5 * (a - d)) ** 2 + b * b)
    return mid - rad, mid + rad


def make_coefficient_field(grid: Grid, kind: str, params: dict | None = None,
                           seed: int | None = None) -> CoefficientField:
    """Generate a coefficient field of the given kind on ``grid``.

    Kinds and parameters:

    * ``identity``
    * ``scalar_checkerboard``: ``lo``, ``hi``, ``period`` (cells per full
      cycle, even); ``lo`` on the first half of each cycle
    * ``random_real_symmetric``: eigenvalues uniform in ``[lo, hi]``
    * ``complex_perturbation``: ``I + eps B`` with ``|B| = 1`` per cell and
      ``eps < 1/2``
    """
    if kind not in KINDS:
        raise ValueError(f"unknown coefficient kind {kind!r}; choose from {KINDS}")
    p = dict(_DEFAULTS[kind])
    p.update(params or {})
    n = grid.dim
    shape = grid.shape
    eye = np.broadcast_to(np.eye(n), shape + (n, n))
    rng = np.random.default_rng(seed)

    if kind == "identity":
        A = np.array(eye, dtype=float)
    elif kind == "scalar_checkerboard":
        lo, hi, period = float(p["lo"]), float(p["hi"]), int(p["period"])
        if lo <= 0 or hi <= 0:
            raise ValueError("checkerboard values must be positive")
        if period < 2 or period % 2:
            raise ValueError("checkerboard period must be an even number of cells")
        idx = np.indices(shape)
        parity = np.sum(idx // (period // 2), axis=0) % 2
        a = np.where(parity == 0, lo, hi)
        A = a[..., None, None] * eye
    elif kind == "random_real_symmetric":
        lo, hi = float(p["lo"]), float(p["hi"])
        if not 0 < lo <= hi:
            raise ValueError("need 0 < lo <= hi")
        lam = rng.uniform(lo, hi, size=shape + (n,))
        if n == 1:
            A = lam[..., None]
        else:
            theta = rng.uniform(0, np.pi, size=shape)
            c, s = np.cos(theta), np.sin(theta)
            Q = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
            A = Q @ (lam[..., :, None] * np.swapaxes(Q, -1, -2))
            A = 0.5 * (A + np.swapaxes(A, -1, -2))
    else:
        eps = float(p["eps"])
        if not 0 <= eps < 0.5:
            raise ValueError("complex perturbation needs 0 <= eps < 1/2")
        B = rng.standard_normal(shape + (n, n)) + 1j * rng.standard_normal(shape + (n, n))
        if n == 1:
            norms = np.abs(B[..., 0, 0])
        else:
            norms = np.sqrt(_hermitian_eigs(np.conj(np.swapaxes(B, -1, -2)) @ B)[1])
        A = eye + eps * B / norms[..., None, None]

    lam0, lam1 = ellipticity_constants(A)
    if not lam0 > 0:
        raise RuntimeError(f"generator produced a non-elliptic field (lambda0={lam0})")
    return CoefficientField(grid, A, lam0, lam1, kind, p, seed)


def field_from_descriptor(desc: dict) -> CoefficientField:
    """Regenerate a field from :meth:`CoefficientField.descriptor` output."""
    g = desc["grid"]
    refine = int(desc.get("refine", 1))
    if g["N"] % refine:
        raise ValueError("grid size is not a multiple of the refinement factor")
    base = build_grid(g["dim"], g["N"] // refine, g["period"])
    return make_coefficient_field(base, desc["kind"], desc.get("params"), desc.get("seed")).refined(refine)
