"""d-linear (Q1) finite elements on the fine grid.

Coefficients are constant on every fine element, so element matrices are the
analytic reference matrices scaled by that constant and assembly is exact.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from typing import TypeAlias

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..core.errors import DimensionMismatch, ResolutionError
from ..core.models import CoeffSample, FineFunction, FloatArray, PiecewiseConstant
from ..sampling.randfield import constant_sample
from .grid import FineGrid

log = logging.getLogger(__name__)

SparseMat: TypeAlias = sp.csr_matrix


def _kron_all(factors: list[np.ndarray]) -> np.ndarray:
    # Axis 0 is the fastest local vertex bit, hence the reversed product.
    result = np.ones((1, 1))
    for factor in reversed(factors):
        result = np.kron(result, factor)
    return result


@functools.cache
def reference_matrices(d: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Element stiffness and mass matrices of a cube with side ``h``."""
    stiff_1d = np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
    mass_1d = np.array([[2.0, 1.0], [1.0, 2.0]]) * h / 6.0
    stiffness = sum(
        _kron_all([stiff_1d if axis == a else mass_1d for axis in range(d)])
        for a in range(d)
    )
    mass = _kron_all([mass_1d] * d)
    return np.asarray(stiffness), mass


def element_coefficients(sample: CoeffSample, fine: FineGrid) -> FloatArray:
    """Coefficient value on every fine element (the epsilon-cell it lies in)."""
    if sample.d != fine.d:
        raise DimensionMismatch(f"sample is {sample.d}-d, fine grid is {fine.d}-d")
    if fine.J < sample.eps_level:
        raise ResolutionError(
            f"fine level {fine.J} does not resolve coefficient level {sample.eps_level}"
        )
    cells = fine.element_cells(sample.eps_level)
    return np.asarray(sample.values[cells], dtype=np.float64)


def _assemble(
    fine: FineGrid, local: np.ndarray, weights: FloatArray, eliminate: bool
) -> SparseMat:
    if eliminate and fine.n_dofs == 0:
        raise ResolutionError(f"fine grid J={fine.J} has no interior nodes")
    conn = fine.connectivity
    nloc = conn.shape[1]
    rows = np.repeat(conn, nloc, axis=1).ravel()
    cols = np.tile(conn, (1, nloc)).ravel()
    data = (weights[:, None, None] * local[None, :, :]).ravel()
    full = sp.csr_matrix(
        sp.coo_matrix((data, (rows, cols)), shape=(fine.n_nodes, fine.n_nodes))
    )
    if not eliminate:
        return full
    dofs = fine.node_of_dof
    return sp.csr_matrix(full[dofs][:, dofs])


def assemble_stiffness(
    sample: CoeffSample, fine: FineGrid, *, eliminate: bool = True
) -> SparseMat:
    """Matrix of a_omega(u, v) = int A grad u . grad v on V_h."""
    stiffness, _ = reference_matrices(fine.d, fine.h)
    return _assemble(fine, stiffness, element_coefficients(sample, fine), eliminate)


def assemble_mass(fine: FineGrid, *, eliminate: bool = True) -> SparseMat:
    _, mass = reference_matrices(fine.d, fine.h)
    return _assemble(fine, mass, np.ones(fine.n_elements), eliminate)


@functools.cache
def laplacian(fine: FineGrid) -> SparseMat:
    """Stiffness matrix of the unit coefficient."""
    return assemble_stiffness(constant_sample(fine.d, 1.0), fine)


@functools.cache
def cell_integrals(fine: FineGrid, level: int, *, boundary: bool = False) -> SparseMat:
    """Exact integrals of d-linear functions over the cells of one level.

    Row ``T`` of the result maps nodal values to the integral over ``T``; the
    columns are degrees of freedom, or all nodes when ``boundary`` is set.
    """
    conn = fine.connectivity
    nloc = conn.shape[1]
    rows = np.repeat(fine.element_cells(level), nloc)
    cols = conn.ravel()
    data = np.full(cols.shape, fine.h**fine.d / nloc)
    n_cells = 2 ** (fine.d * level)
    full = sp.csr_matrix(
        sp.coo_matrix((data, (rows, cols)), shape=(n_cells, fine.n_nodes))
    )
    if boundary:
        return full
    return sp.csr_matrix(full[:, fine.node_of_dof])


def energy_norm(K: SparseMat, v: FineFunction) -> float:
    return math.sqrt(max(float(v @ (K @ v)), 0.0))


def h1_seminorm(v: FineFunction, fine: FineGrid) -> float:
    return energy_norm(laplacian(fine), v)


@dataclass
class FineSolve:
    """Outcome of a fine Galerkin solve."""

    u: FineFunction
    iterations: int
    residual: float
    converged: bool


def solve_dirichlet(
    K: SparseMat, rhs: FloatArray, tol: float = 1e-10, maxit: int | None = None
) -> FineSolve:
    """Plain CG for K u = rhs; non-convergence is flagged, not raised."""
    if rhs.shape != (K.shape[0],):
        raise DimensionMismatch(f"rhs shape {rhs.shape} does not fit {K.shape}")
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return FineSolve(np.zeros_like(rhs), 0, 0.0, True)
    iterations = 0

    def count(_: np.ndarray) -> None:
        nonlocal iterations
        iterations += 1

    u, info = spla.cg(
        K,
        rhs,
        rtol=tol,
        atol=0.0,
        maxiter=maxit if maxit is not None else 10 * K.shape[0],
        callback=count,
    )
    residual = float(np.linalg.norm(K @ u - rhs)) / rhs_norm
    converged = info == 0
    if not converged:
        log.warning(
            "fine CG stopped after %d steps with relative residual %.2e",
            iterations,
            residual,
        )
    return FineSolve(np.asarray(u, dtype=np.float64), iterations, residual, converged)


def load_vector(f: PiecewiseConstant, fine: FineGrid) -> FloatArray:
    """Exact integrals of a piecewise constant against the hat functions."""
    if f.d != fine.d:
        raise DimensionMismatch(f"rhs is {f.d}-d, fine grid is {fine.d}-d")
    return np.asarray(cell_integrals(fine, f.level).T @ f.values, dtype=np.float64)


def element_energies(
    u: FineFunction, sample: CoeffSample, fine: FineGrid
) -> FloatArray:
    """Energy density a_omega(u, u) restricted to every fine element."""
    stiffness, _ = reference_matrices(fine.d, fine.h)
    local = fine.extend(u)[fine.connectivity]
    density = np.einsum("ei,ij,ej->e", local, stiffness, local)
    return np.asarray(element_coefficients(sample, fine) * density)


def l2_distance_to_pc(
    u: FineFunction, pc: PiecewiseConstant, fine: FineGrid
) -> float:
    """Exact L2 distance between an FE function and a piecewise constant."""
    mass = assemble_mass_cached(fine)
    cross = float(pc.values @ (cell_integrals(fine, pc.level) @ u))
    squared = float(u @ (mass @ u)) - 2.0 * cross + pc.l2_norm() ** 2
    return math.sqrt(max(squared, 0.0))


@functools.cache
def assemble_mass_cached(fine: FineGrid) -> SparseMat:
    return assemble_mass(fine)
