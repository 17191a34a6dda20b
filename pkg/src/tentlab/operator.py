"""Divergence-form operator ``L = -div(A grad)`` on a periodic grid.

The gradient is the forward difference with wraparound and the divergence is
minus its transpose, so ``<L u, v> = <A grad u, grad v>`` holds exactly in the
discrete inner product ``sum(u conj(v)) h^n``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .coefficients import CoefficientField
from .geometry import Grid


@lru_cache(maxsize=32)
def _gradient(dim: int, N: int, period: float) -> sp.csr_matrix:
    h = period / N
    shift = sp.diags([np.ones(N - 1), np.ones(1)], [1, -(N - 1)], shape=(N, N))
    d1 = (shift - sp.identity(N)) / h
    if dim == 1:
        return sp.csr_matrix(d1)
    eye = sp.identity(N)
    return sp.csr_matrix(sp.vstack([sp.kron(d1, eye), sp.kron(eye, d1)]))


def assemble_gradient(grid: Grid) -> sp.csr_matrix:
    """Forward-difference gradient, shape ``(dim * N^dim, N^dim)``.

    Rows are grouped by component: all ``d/dx_0`` entries first.
    """
    return _gradient(grid.dim, grid.N, grid.period)


def _block_coefficient(coeffs: CoefficientField) -> sp.csr_matrix:
    n = coeffs.grid.dim
    A = coeffs.matrices
    blocks = [[sp.diags(A[..., a, b].ravel()) for b in range(n)] for a in range(n)]
    return sp.csr_matrix(sp.bmat(blocks))


@dataclass
class DiscreteOperator:
    """Dense matrix of ``L`` together with the pieces it was built from."""

    grid: Grid
    coeffs: CoefficientField
    gradient: sp.csr_matrix
    matrix: np.ndarray
    is_adjoint: bool = False

    @property
    def size(self) -> int:
        return self.grid.size

    def apply(self, u: np.ndarray, adjoint: bool = False) -> np.ndarray:
        """Apply ``L`` (or ``L*``) to a field or to a stack of flat columns."""
        M = self.matrix.conj().T if adjoint else self.matrix
        return _apply_flat(self.grid, M, u)

    def grad(self, u: np.ndarray) -> np.ndarray:
        """Gradient of a field of shape ``grid.shape``; components on axis 0."""
        u = np.asarray(u)
        if u.shape != self.grid.shape:
            raise ValueError(f"field shape {u.shape} does not match grid {self.grid.shape}")
        g = self.gradient @ u.ravel()
        return g.reshape((self.grid.dim,) + self.grid.shape)

    def div(self, v: np.ndarray) -> np.ndarray:
        """Discrete divergence, minus the adjoint of :meth:`grad`."""
        v = np.asarray(v)
        if v.shape != (self.grid.dim,) + self.grid.shape:
            raise ValueError("vector field has the wrong shape")
        return -(self.gradient.T @ v.reshape(-1)).reshape(self.grid.shape)

    def flux(self, u: np.ndarray) -> np.ndarray:
        """``A grad u`` with components on axis 0."""
        g = self.grad(u)
        A = self.coeffs.matrices
        return np.einsum("...ab,b...->a...", A, g)

    def adjoint(self) -> "DiscreteOperator":
        """Operator of the adjoint coefficients ``A^*``; its matrix is ``L^H``."""
        A = np.conj(np.swapaxes(self.coeffs.matrices, -1, -2))
        c = replace(self.coeffs, matrices=A)
        return DiscreteOperator(self.grid, c, self.gradient, self.matrix.conj().T.copy(), not self.is_adjoint)


def _apply_flat(grid: Grid, M: np.ndarray, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u)
    if u.shape == grid.shape:
        return (M @ u.ravel()).reshape(grid.shape)
    if u.ndim in (1, 2) and u.shape[0] == grid.size:
        return M @ u
    raise ValueError(f"field of shape {u.shape} does not live on grid {grid.shape}")


def assemble_operator(coeffs: CoefficientField) -> DiscreteOperator:
    """Assemble ``L = D^T A D`` as a dense matrix."""
    grid = coeffs.grid
    D = assemble_gradient(grid)
    AD = _block_coefficient(coeffs) @ D
    L = (D.T @ AD).toarray()
    if coeffs.is_real:
        L = np.real(L).astype(float)
    return DiscreteOperator(grid, coeffs, D, L)


def inner(grid: Grid, u: np.ndarray, v: np.ndarray) -> complex:
    """Discrete ``L^2`` pairing ``sum(u conj(v)) h^n`` (sums over all axes)."""
    return complex(np.sum(u * np.conj(v)) * grid.cell_volume)


def form_bounds(op: DiscreteOperator, samples: int = 100, seed: int = 0) -> dict:
    """Check coercivity and the sector bound on random complex fields.

    Returns the worst observed ``Re<Lu,u> / (lambda0 |grad u|^2)`` (should be
    at least 1) and ``|Im<Lu,u>| / Re<Lu,u>`` (should not exceed
    ``lambda1 / lambda0``).
    """
    rng = np.random.default_rng(seed)
    g = op.grid
    worst_coercive, worst_sector = np.inf, 0.0
    for _ in range(samples):
        u = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
        form = inner(g, op.apply(u), u)
        grad2 = np.sum(np.abs(op.grad(u)) ** 2) * g.cell_volume
        worst_coercive = min(worst_coercive, form.real / (op.coeffs.lambda0 * grad2))
        worst_sector = max(worst_sector, abs(form.imag) / form.real)
    return {"coercivity": worst_coercive, "sector": worst_sector,
            "sector_bound": op.coeffs.lambda1 / op.coeffs.lambda0}
