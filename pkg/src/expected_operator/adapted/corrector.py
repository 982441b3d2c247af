"""Coefficient-adapted localized basis of one coefficient sample.

For every level ``l`` the fine-scale space ``W_l`` is the kernel of the cell
means over the level-``l`` cells. The corrector ``C_l`` is the energy
projection onto ``W_l``; it is approximated by ``k`` steps of conjugate
gradients on ``W_l`` preconditioned with the sum of local Ritz projections
onto the patch spaces ``W_T``. Each step widens the support by one patch
around every reached cell, i.e. by at most two cell layers.

Vectors are kept dense with exact zeros outside their support so that the
sparsity of everything assembled from them is structural.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..core.errors import (
    ConfigError,
    DimensionMismatch,
    InvalidElement,
    SingularLocalSystem,
)
from ..core.models import CoeffSample, ElementId, FineFunction, FloatArray, IntArray
from ..mesh.fem import SparseMat, assemble_stiffness, cell_integrals
from ..mesh.grid import FineGrid, HierGrid
from ..mesh.haar import HaarBasis, bubble_matrix

log = logging.getLogger(__name__)

# Columns freeze once their preconditioned residual falls below this fraction
# of the initial one.
CORRECTOR_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class MeanZeroConstraint:
    """Cell integrals over one level; ``W_l`` is the kernel of ``matrix``."""

    level: int
    matrix: SparseMat

    def residual(self, v: FloatArray) -> FloatArray:
        return np.asarray(self.matrix @ v)


def build_constraint(grid: HierGrid, fine: FineGrid, level: int) -> MeanZeroConstraint:
    fine.hosts(grid)
    if not 0 <= level <= grid.L:
        raise InvalidElement(f"level {level} outside 0..{grid.L}")
    return MeanZeroConstraint(level, cell_integrals(fine, level))


@dataclass(frozen=True, eq=False)
class _Patch:
    element: int
    dofs: IntArray
    cells: IntArray
    lu: spla.SuperLU


@dataclass
class CorrectorSolve:
    """Localized corrector of a block of columns and its last PCG residuals."""

    x: FloatArray
    residual: FloatArray
    steps: int


def _column_dot(a: FloatArray, b: FloatArray) -> FloatArray:
    return np.einsum("ij,ij->j", a, b)


def _as_block(u: FloatArray | SparseMat, n: int) -> tuple[FloatArray, bool]:
    block = u.toarray() if sp.issparse(u) else np.asarray(u, dtype=np.float64)
    single = block.ndim == 1
    if single:
        block = block[:, None]
    if block.shape[0] != n:
        raise DimensionMismatch(f"expected {n} rows, got {block.shape[0]}")
    return block, single


class LevelCorrector:
    """Correctors of one level for one assembled stiffness matrix."""

    def __init__(
        self, K: SparseMat, grid: HierGrid, fine: FineGrid, level: int
    ) -> None:
        if K.shape != (fine.n_dofs, fine.n_dofs):
            raise DimensionMismatch(
                f"stiffness of shape {K.shape} on a grid with {fine.n_dofs} dofs"
            )
        self.K = sp.csr_matrix(K)
        self.grid = grid
        self.fine = fine
        self.level = level
        self.constraint = build_constraint(grid, fine, level)
        self.bubbles = bubble_matrix(fine, level)

    def _patch_dofs(self, elem: ElementId) -> IntArray:
        lower, upper = self.grid.patch_box(elem)
        ratio = 2 ** (self.fine.J - self.level)
        axes = [
            np.arange(lo * ratio + 1, hi * ratio, dtype=np.int64)
            for lo, hi in zip(lower, upper, strict=True)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        weights = (self.fine.n + 1) ** np.arange(self.fine.d, dtype=np.int64)
        nodes = sum(w * m.ravel() for w, m in zip(weights, mesh, strict=True))
        return np.sort(self.fine.dof_of_node[np.asarray(nodes, dtype=np.int64)])

    def _factorize(self, elem: ElementId) -> _Patch:
        flat = self.grid.flat(elem)
        dofs = self._patch_dofs(elem)
        patch = self.grid.patch(elem)
        cells = np.array([self.grid.flat(m) for m in patch], dtype=np.int64)
        k_loc = self.K[dofs][:, dofs]
        b_loc = self.constraint.matrix[cells][:, dofs]
        if np.any(np.diff(sp.csr_matrix(b_loc).indptr) == 0):
            raise SingularLocalSystem(
                self.level, flat, "a patch cell has no interior dof"
            )
        saddle = sp.bmat([[k_loc, b_loc.T], [b_loc, None]], format="csc")
        try:
            lu = spla.splu(saddle)
        except RuntimeError as exc:
            raise SingularLocalSystem(self.level, flat, str(exc)) from exc
        return _Patch(flat, dofs, cells, lu)

    @functools.cached_property
    def patches(self) -> tuple[_Patch, ...]:
        elements = self.grid.elements(self.level)
        patches = tuple(self._factorize(elem) for elem in elements)
        log.debug(
            "level %d: factorized %d patch systems (largest %d dofs)",
            self.level,
            len(patches),
            max(len(p.dofs) for p in patches),
        )
        return patches

    def _solve_patch(self, patch: _Patch, residual: FloatArray) -> FloatArray:
        rhs = np.zeros((len(patch.dofs) + len(patch.cells), residual.shape[1]))
        rhs[: len(patch.dofs)] = residual
        solution = patch.lu.solve(rhs)
        return np.asarray(solution[: len(patch.dofs)])

    def local_projection(
        self, elem: ElementId | int, residual: FloatArray
    ) -> FineFunction:
        """Ritz projection of a residual functional onto one patch space W_T."""
        flat = elem if isinstance(elem, int) else self.grid.flat(elem)
        patch = self.patches[flat]
        block, single = _as_block(residual, self.fine.n_dofs)
        out = np.zeros_like(block)
        out[patch.dofs] = self._solve_patch(patch, block[patch.dofs])
        return out[:, 0] if single else out

    def preconditioner_apply(self, residual: FloatArray) -> FloatArray:
        """Sum of the local projections over all cells of the level.

        Patches whose local residual vanishes contribute exact zeros.
        """
        block, single = _as_block(residual, self.fine.n_dofs)
        out = np.zeros_like(block)
        for patch in self.patches:
            local = block[patch.dofs]
            active = np.flatnonzero(np.any(local != 0.0, axis=0))
            if active.size == 0:
                continue
            update = self._solve_patch(patch, local[:, active])
            out[np.ix_(patch.dofs, active)] += update
        return out[:, 0] if single else out

    def _remove_drift(self, x: FloatArray) -> FloatArray:
        means = (self.constraint.matrix @ x) * 2.0 ** (self.fine.d * self.level)
        return np.asarray(x - self.bubbles @ means)

    def corrector_solve(self, u: FloatArray | SparseMat, k: int) -> CorrectorSolve:
        """``k`` preconditioned CG steps on W_l for every column of ``u``."""
        if k < 0:
            raise ConfigError(f"iteration count must be >= 0, got {k}")
        block, _ = _as_block(u, self.fine.n_dofs)
        x = np.zeros_like(block)
        r = np.asarray(self.K @ block)
        if k == 0:
            return CorrectorSolve(x, np.ones(block.shape[1]), 0)
        z = self.preconditioner_apply(r)
        p = z.copy()
        rz = _column_dot(r, z)
        start = np.sqrt(np.maximum(rz, 0.0))
        floor = (CORRECTOR_RTOL * start) ** 2
        active = rz > floor
        for step in range(k):
            if not active.any():
                break
            q = np.asarray(self.K @ p)
            curvature = _column_dot(p, q)
            active &= curvature > 0.0
            alpha = np.divide(rz, curvature, out=np.zeros_like(rz), where=active)
            x += p * alpha
            r -= q * alpha
            if step == k - 1:
                break
            z = np.zeros_like(r)
            z[:, active] = self.preconditioner_apply(r[:, active])
            rz_next = _column_dot(r, z)
            beta = np.divide(rz_next, rz, out=np.zeros_like(rz), where=active)
            p = z + p * beta
            rz = np.where(active, rz_next, rz)
            active &= rz_next > floor
            log.debug(
                "level %d step %d: %d active columns, max residual %.3e",
                self.level,
                step + 1,
                int(active.sum()),
                float(np.sqrt(np.maximum(rz, 0.0)).max(initial=0.0)),
            )
        final = np.sqrt(np.maximum(_column_dot(r, self.preconditioner_apply(r)), 0.0))
        relative = np.divide(final, start, out=np.zeros_like(final), where=start > 0.0)
        return CorrectorSolve(self._remove_drift(x), relative, k)

    def corrector_apply(self, u: FloatArray | SparseMat, k: int) -> FloatArray:
        solve = self.corrector_solve(u, k)
        return solve.x[:, 0] if np.ndim(u) == 1 else solve.x

    @functools.cached_property
    def _global_lu(self) -> spla.SuperLU:
        B = self.constraint.matrix
        saddle = sp.bmat([[self.K, B.T], [B, None]], format="csc")
        try:
            return spla.splu(saddle)
        except RuntimeError as exc:
            raise SingularLocalSystem(self.level, -1, str(exc)) from exc

    def exact_corrector(self, u: FloatArray | SparseMat) -> FloatArray:
        """Energy projection onto W_l via the global saddle-point system."""
        block, single = _as_block(u, self.fine.n_dofs)
        n_cells = self.constraint.matrix.shape[0]
        zeros = np.zeros((n_cells, block.shape[1]))
        rhs = np.vstack([np.asarray(self.K @ block), zeros])
        x = np.asarray(self._global_lu.solve(rhs))[: self.fine.n_dofs]
        return x[:, 0] if single else x


@dataclass(frozen=True, eq=False)
class LevelBasis:
    """Energy-normalized localized functions of one level."""

    level: int
    vectors: sp.csc_matrix
    energy: FloatArray
    supports: tuple[frozenset[int], ...]
    residual: float
    constraint_residual: float

    @property
    def size(self) -> int:
        return int(self.vectors.shape[1])


@dataclass(frozen=True, eq=False)
class LocalizedBasis:
    """The localized basis ``b_phi / |||b_phi|||`` of one sample, level by level."""

    sample_index: int
    levels: tuple[LevelBasis, ...]
    iterations: int
    exact: bool

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(lb.size for lb in self.levels)

    @property
    def n_dofs(self) -> int:
        return int(self.levels[0].vectors.shape[0])

    @functools.cached_property
    def _matrix(self) -> sp.csc_matrix:
        stacked = sp.hstack([lb.vectors for lb in self.levels], format="csc")
        return sp.csc_matrix(stacked)

    def matrix(self) -> sp.csc_matrix:
        """All vectors as columns in Haar order."""
        return self._matrix

    def supports(self) -> list[frozenset[int]]:
        return [s for lb in self.levels for s in lb.supports]


def _supports(
    fine: FineGrid, level: int, vectors: sp.csc_matrix
) -> tuple[frozenset[int], ...]:
    """Cells whose closure meets the nonzero pattern of every column."""
    pattern = sp.csc_matrix(
        (np.ones_like(vectors.data), vectors.indices, vectors.indptr),
        shape=vectors.shape,
    )
    touched = sp.csc_matrix(cell_integrals(fine, level) @ pattern)
    bounds = touched.indptr
    return tuple(
        frozenset(int(c) for c in touched.indices[bounds[j] : bounds[j + 1]])
        for j in range(touched.shape[1])
    )


def build_level_basis(
    corrector: LevelCorrector, basis: HaarBasis, k: int, *, exact: bool = False
) -> LevelBasis:
    level = corrector.level
    phi = basis.level_values(level)
    lifted = np.asarray((corrector.bubbles @ phi.T).toarray())
    if exact:
        x = corrector.exact_corrector(lifted)
        residual = 0.0
    else:
        solve = corrector.corrector_solve(lifted, k)
        x = solve.x
        residual = float(solve.residual.max(initial=0.0))
    b = lifted - x
    energy = np.sqrt(np.maximum(_column_dot(b, np.asarray(corrector.K @ b)), 0.0))
    b /= energy
    vectors = sp.csc_matrix(b)
    # B b = phi / |||b||| cellwise, up to the corrector residual
    scale = 2.0 ** (corrector.fine.d * level)
    means = np.asarray(corrector.constraint.matrix @ b).T * scale
    target = phi.toarray() / energy[:, None]
    constraint_residual = float(np.abs(means - target).max() / np.abs(target).max())
    return LevelBasis(
        level,
        vectors,
        energy,
        _supports(corrector.fine, level, vectors),
        residual,
        constraint_residual,
    )


def build_localized_basis(
    sample: CoeffSample,
    grid: HierGrid,
    fine: FineGrid,
    basis: HaarBasis,
    k: int,
    *,
    K: SparseMat | None = None,
    exact: bool = False,
) -> LocalizedBasis:
    """Localized basis of every Haar function for one coefficient sample."""
    if basis.grid != grid:
        raise DimensionMismatch(f"basis built on {basis.grid}, expected {grid}")
    if k < 0:
        raise ConfigError(f"iteration count must be >= 0, got {k}")
    stiffness = assemble_stiffness(sample, fine) if K is None else K
    levels = []
    for level in basis.levels:
        corrector = LevelCorrector(stiffness, grid, fine, level)
        lb = build_level_basis(corrector, basis, k, exact=exact)
        log.debug(
            "sample %d level %d: %d functions, corrector residual %.2e, "
            "constraint residual %.2e",
            sample.index,
            level,
            lb.size,
            lb.residual,
            lb.constraint_residual,
        )
        levels.append(lb)
    return LocalizedBasis(sample.index, tuple(levels), k, exact)
