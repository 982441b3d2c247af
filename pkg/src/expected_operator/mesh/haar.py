"""Hierarchical Haar basis, piecewise-constant projections and bubble lifts.

Level 0 holds the indicator of the domain. Every cell ``T`` of level
``l - 1`` carries ``2**d - 1`` zero-mean functions of level ``l`` that are
constant on the children of ``T``: kind ``j`` takes the product of the signs
``+1``/``-1`` of the child offset along every axis whose bit is set in ``j``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..core.errors import DimensionMismatch, ResolutionError
from ..core.models import ElementId, FineFunction, FloatArray, PiecewiseConstant
from .fem import SparseMat, cell_integrals
from .grid import FineGrid, HierGrid, flatten, multi_indices


@dataclass(frozen=True)
class HaarFunction:
    """Metadata of one basis function; values live in :class:`HaarBasis`."""

    index: int
    level: int
    parent: ElementId
    kind: int
    l2norm: float


@functools.cache
def _level_values(d: int, level: int, target: int) -> SparseMat:
    """Normalized values of the level-``level`` functions on cells of ``target``.

    Shape ``(#H_level, 2**(d*target))``; requires ``target >= level``.
    """
    cells = multi_indices(2**target, d)
    n_cells = cells.shape[0]
    if level == 0:
        return sp.csr_matrix(np.ones((1, n_cells)))
    at_level = cells >> (target - level)
    offset = at_level & 1
    parent = flatten(at_level >> 1, 2 ** (level - 1))
    signs = 1 - 2 * offset
    n_kinds = 2**d - 1
    norm = math.sqrt(2.0 ** (-d * (level - 1)))
    rows, cols, data = [], [], []
    for kind in range(1, n_kinds + 1):
        value = np.ones(n_cells)
        for axis in range(d):
            if (kind >> axis) & 1:
                value = value * signs[:, axis]
        rows.append(parent * n_kinds + (kind - 1))
        cols.append(np.arange(n_cells))
        data.append(value / norm)
    n_functions = n_kinds * 2 ** (d * (level - 1))
    return sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_functions, n_cells),
    )


@dataclass(frozen=True, eq=False)
class HaarBasis:
    """Ordered, level-monotone, L2-orthonormal (after scaling) Haar basis."""

    grid: HierGrid
    functions: tuple[HaarFunction, ...]
    offsets: tuple[int, ...]
    matrix: SparseMat

    @property
    def size(self) -> int:
        return len(self.functions)

    @property
    def levels(self) -> range:
        return range(self.grid.L + 1)

    def level_slice(self, level: int) -> slice:
        return slice(self.offsets[level], self.offsets[level + 1])

    @property
    def level_sizes(self) -> tuple[int, ...]:
        bounds = self.offsets
        return tuple(b - a for a, b in zip(bounds, bounds[1:], strict=False))

    def level_of(self, i: int) -> int:
        return self.functions[i].level

    def level_values(self, level: int) -> SparseMat:
        """Normalized level-``level`` functions evaluated on cells of that level."""
        return _level_values(self.grid.d, level, level)

    def midpoints(self) -> FloatArray:
        """Midpoints of the supports (parent cells), shape (N, d)."""
        return np.array(
            [self.grid.element_midpoint(phi.parent) for phi in self.functions]
        )

    def function(self, i: int) -> PiecewiseConstant:
        """The unnormalized function ``i`` on its own level."""
        phi = self.functions[i]
        start = self.offsets[phi.level]
        values = self.level_values(phi.level)[i - start].toarray().ravel()
        return PiecewiseConstant(self.grid.d, phi.level, values * phi.l2norm)


@functools.cache
def build_haar(grid: HierGrid) -> HaarBasis:
    """Haar basis of the hierarchy with N = 2**(d*L) functions."""
    d = grid.d
    origin = ElementId(0, (0,) * d)
    functions: list[HaarFunction] = [HaarFunction(0, 0, origin, 0, 1.0)]
    offsets = [0, 1]
    for level in range(1, grid.L + 1):
        l2norm = math.sqrt(grid.volume(level - 1))
        for parent in grid.elements(level - 1):
            for kind in range(1, 2**d):
                functions.append(
                    HaarFunction(len(functions), level, parent, kind, l2norm)
                )
        offsets.append(len(functions))
    matrix = sp.vstack(
        [_level_values(d, level, grid.L) for level in range(grid.L + 1)], format="csr"
    )
    return HaarBasis(grid, tuple(functions), tuple(offsets), sp.csr_matrix(matrix))


def _coarsen(pc: PiecewiseConstant, level: int) -> PiecewiseConstant:
    if level > pc.level:
        return pc.refine(level)
    fine_cells = multi_indices(2**pc.level, pc.d)
    coarse = flatten(fine_cells >> (pc.level - level), 2**level)
    sums = np.bincount(coarse, weights=pc.values, minlength=2 ** (pc.d * level))
    return PiecewiseConstant(pc.d, level, sums / 2 ** (pc.d * (pc.level - level)))


def project_pc(
    v: FineFunction | PiecewiseConstant, level: int, fine: FineGrid | None = None
) -> PiecewiseConstant:
    """L2 projection onto piecewise constants of one level (cell means).

    ``v`` is a piecewise constant, or a fine function given either on the
    degrees of freedom or on all nodes.
    """
    if isinstance(v, PiecewiseConstant):
        return _coarsen(v, level)
    if fine is None:
        raise DimensionMismatch("a fine grid is needed to project a fine function")
    if v.shape == (fine.n_dofs,):
        integrals = cell_integrals(fine, level) @ v
    elif v.shape == (fine.n_nodes,):
        integrals = cell_integrals(fine, level, boundary=True) @ v
    else:
        raise DimensionMismatch(
            f"vector of shape {v.shape} does not live on the fine grid J={fine.J}"
        )
    values = np.asarray(integrals) * 2.0 ** (fine.d * level)
    return PiecewiseConstant(fine.d, level, values)


def haar_analyze(
    v: FineFunction | PiecewiseConstant,
    basis: HaarBasis,
    fine: FineGrid | None = None,
) -> FloatArray:
    """Coefficients (v, phi_i) / ||phi_i|| of the projection onto level L."""
    pc = project_pc(v, basis.grid.L, fine)
    if pc.d != basis.grid.d:
        raise DimensionMismatch(f"{pc.d}-d function against a {basis.grid.d}-d basis")
    return np.asarray(basis.matrix @ pc.values) * basis.grid.volume(basis.grid.L)


def haar_synthesize(beta: FloatArray, basis: HaarBasis) -> PiecewiseConstant:
    if beta.shape != (basis.size,):
        raise DimensionMismatch(
            f"{beta.shape[0]} coefficients for {basis.size} functions"
        )
    values = np.asarray(basis.matrix.T @ beta, dtype=np.float64)
    return PiecewiseConstant(basis.grid.d, basis.grid.L, values)


@functools.cache
def bubble_matrix(fine: FineGrid, level: int) -> SparseMat:
    """Unit-mean bubbles of all level cells as columns on the fine dofs.

    The bubble of a cell is the tensor product hat peaking at its midpoint;
    it vanishes on the cell boundary.
    """
    if fine.J <= level:
        raise ResolutionError(
            f"fine level {fine.J} has no interior node in cells of level {level}"
        )
    ratio = 2 ** (fine.J - level)
    nodes = fine.node_index[fine.node_of_dof]
    local = nodes % ratio
    inside = np.all(local > 0, axis=1)
    hats = np.prod(1.0 - np.abs(2.0 * local / ratio - 1.0), axis=1)
    cells = flatten(nodes // ratio, 2**level)
    dofs = np.flatnonzero(inside)
    raw = sp.csc_matrix(
        (hats[dofs], (dofs, cells[dofs])), shape=(fine.n_dofs, 2 ** (fine.d * level))
    )
    means = (cell_integrals(fine, level) @ raw).diagonal()
    scale = 2.0 ** (-fine.d * level) / means
    return sp.csc_matrix(raw @ sp.diags(scale))


def bubble_lift(phi: PiecewiseConstant, grid: HierGrid, fine: FineGrid) -> FineFunction:
    """Fine function with the same cell means as ``phi`` and support inside it."""
    fine.hosts(grid)
    if phi.d != grid.d:
        raise DimensionMismatch(f"{phi.d}-d function on a {grid.d}-d hierarchy")
    return np.asarray(bubble_matrix(fine, phi.level) @ phi.values, dtype=np.float64)
