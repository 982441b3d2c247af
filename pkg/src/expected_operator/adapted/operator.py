"""Per-sample matrix algebra in the localized basis.

Block ``(k, m)`` of a :class:`BlockMat` couples Haar level ``k`` (rows) with
Haar level ``m`` (columns). Absent blocks are structural zeros.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterator, Mapping
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..core.errors import (
    ConfigError,
    DimensionMismatch,
    NotPositiveDefinite,
    SamplingError,
)
from ..core.models import CoeffSample, FloatArray
from ..mesh.fem import SparseMat, cell_integrals
from ..mesh.grid import FineGrid, HierGrid
from ..mesh.haar import HaarBasis
from .corrector import LocalizedBasis

log = logging.getLogger(__name__)

BlockKey = tuple[int, int]
LevelPredicate = Callable[[int, int], bool]

# Largest block handled by dense eigen/singular value routines.
DENSE_LIMIT = 1500

# Columns of the truncated inverse stop once ||r|| <= INVERSE_RTOL ||e_i||.
INVERSE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class BlockMat:
    """Level-blocked sparse matrix over the Haar index set."""

    sizes: tuple[int, ...]
    blocks: Mapping[BlockKey, SparseMat] = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = len(self.sizes)
        for (k, m), block in self.blocks.items():
            if not (0 <= k < n and 0 <= m < n):
                raise DimensionMismatch(f"block {(k, m)} outside {n} levels")
            if block.shape != (self.sizes[k], self.sizes[m]):
                raise DimensionMismatch(
                    f"block {(k, m)} has shape {block.shape}, "
                    f"expected {(self.sizes[k], self.sizes[m])}"
                )

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.sizes)]))

    @property
    def shape(self) -> tuple[int, int]:
        n = sum(self.sizes)
        return n, n

    def keys(self) -> list[BlockKey]:
        return sorted(self.blocks)

    def __getitem__(self, key: BlockKey) -> SparseMat:
        return self.blocks[key]

    def __contains__(self, key: object) -> bool:
        return key in self.blocks

    def __iter__(self) -> Iterator[tuple[BlockKey, SparseMat]]:
        for key in self.keys():
            yield key, self.blocks[key]

    @property
    def nnz(self) -> int:
        """Stored entries that are not exact zeros."""
        return sum(int(block.count_nonzero()) for block in self.blocks.values())

    def to_csr(self) -> sp.csr_matrix:
        offsets = self.offsets
        rows, cols, data = [], [], []
        for (k, m), block in self:
            coo = sp.coo_matrix(block)
            rows.append(coo.row + offsets[k])
            cols.append(coo.col + offsets[m])
            data.append(coo.data)
        if not data:
            return sp.csr_matrix(self.shape)
        return sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=self.shape,
        )

    def dense(self) -> FloatArray:
        return np.asarray(self.to_csr().toarray())

    def transpose(self) -> BlockMat:
        return BlockMat(
            self.sizes,
            {(m, k): sp.csr_matrix(b.T) for (k, m), b in self.blocks.items()},
        )

    @classmethod
    def from_matrix(
        cls,
        matrix: SparseMat | FloatArray,
        sizes: tuple[int, ...],
        keep: LevelPredicate | None = None,
    ) -> BlockMat:
        """Split a global matrix into level blocks, keeping selected level pairs."""
        csr = sp.csr_matrix(matrix)
        n = sum(sizes)
        if csr.shape != (n, n):
            raise DimensionMismatch(f"matrix of shape {csr.shape} for {n} functions")
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        blocks = {}
        for k in range(len(sizes)):
            for m in range(len(sizes)):
                if keep is not None and not keep(k, m):
                    continue
                block = csr[offsets[k] : offsets[k + 1], offsets[m] : offsets[m + 1]]
                blocks[(k, m)] = sp.csr_matrix(block)
        return cls(tuple(sizes), blocks)


def haar_distance(i: int, j: int, basis: HaarBasis, grid: HierGrid) -> float:
    """Midpoint distance of two supports in units of the coarser support width."""
    phi_i, phi_j = basis.functions[i], basis.functions[j]
    coarse = max(min(phi_i.level, phi_j.level) - 1, 0)
    mid_i = np.array(grid.element_midpoint(phi_i.parent))
    mid_j = np.array(grid.element_midpoint(phi_j.parent))
    return float(np.linalg.norm(mid_i - mid_j)) / grid.h(coarse)


def _check_basis(sample: CoeffSample, lbasis: LocalizedBasis, K: SparseMat) -> None:
    if sample.index != lbasis.sample_index:
        raise SamplingError(
            f"basis of sample {lbasis.sample_index} used with sample {sample.index}"
        )
    if K.shape != (lbasis.n_dofs, lbasis.n_dofs):
        raise DimensionMismatch(
            f"stiffness of shape {K.shape} for a basis on {lbasis.n_dofs} dofs"
        )


def assemble_S_delta(
    sample: CoeffSample, lbasis: LocalizedBasis, K: SparseMat
) -> BlockMat:
    """Block-diagonal stiffness matrix of the normalized localized basis."""
    _check_basis(sample, lbasis, K)
    blocks = {}
    for level, lb in enumerate(lbasis.levels):
        block = sp.csr_matrix(lb.vectors.T @ (K @ lb.vectors))
        block.eliminate_zeros()
        blocks[(level, level)] = block
    return BlockMat(lbasis.sizes, blocks)


def gram_matrix(lbasis: LocalizedBasis, K: SparseMat) -> BlockMat:
    """All energy inner products of the basis, cross-level blocks included."""
    b = lbasis.matrix()
    full = sp.csr_matrix(b.T @ (K @ b))
    return BlockMat.from_matrix(full, lbasis.sizes)


def invert_block_cg(S: SparseMat, k: int) -> SparseMat:
    """``k`` CG steps on ``S x = e_i`` for every column, symmetrized.

    All columns run together; column supports grow by one sparsity ring per
    step.
    """
    if k < 1:
        raise ConfigError(f"block inversion needs at least one CG step, got {k}")
    S = sp.csr_matrix(S)
    n = S.shape[0]
    if S.shape != (n, n):
        raise DimensionMismatch(f"block of shape {S.shape} is not square")
    x = sp.csr_matrix((n, n))
    r = sp.identity(n, format="csr")
    p = r.copy()
    rr = np.ones(n)
    active = np.ones(n, dtype=bool)
    for step in range(k):
        if not active.any():
            break
        q = sp.csr_matrix(S @ p)
        curvature = np.asarray(p.multiply(q).sum(axis=0)).ravel()
        bad = np.flatnonzero(active & (curvature <= 0.0))
        if bad.size:
            column = int(bad[0])
            raise NotPositiveDefinite(column, step, float(curvature[column]))
        alpha = np.divide(rr, curvature, out=np.zeros(n), where=active)
        x = x + p @ sp.diags(alpha)
        r = r - q @ sp.diags(alpha)
        if step == k - 1:
            break
        rr_next = np.asarray(r.multiply(r).sum(axis=0)).ravel()
        beta = np.divide(rr_next, rr, out=np.zeros(n), where=active)
        p = r + p @ sp.diags(beta)
        rr = np.where(active, rr_next, rr)
        active &= rr_next > INVERSE_RTOL**2
    x = sp.csr_matrix(0.5 * (x + x.T))
    x.eliminate_zeros()
    return x


def invert_block_exact(S: SparseMat) -> SparseMat:
    """Dense inverse of a small block; the reference for :func:`invert_block_cg`."""
    inverse = np.linalg.inv(sp.csr_matrix(S).toarray())
    return sp.csr_matrix(0.5 * (inverse + inverse.T))


def invert_blocks(S: BlockMat, k: int | None) -> BlockMat:
    """Invert every diagonal block, by ``k`` CG steps or exactly for ``None``."""
    blocks = {}
    for m in range(len(S.sizes)):
        block = S[(m, m)]
        if k is None:
            blocks[(m, m)] = invert_block_exact(block)
        else:
            blocks[(m, m)] = invert_block_cg(block, k)
    return BlockMat(S.sizes, blocks)


def assemble_T_delta(
    sample: CoeffSample, lbasis: LocalizedBasis, basis: HaarBasis, fine: FineGrid
) -> BlockMat:
    """Lower block-triangular transform ``T_ij = (b_j, phi_i) / (|||b_j||| ||phi_i||)``.

    The L2 pairings are exact: cell integrals of the d-linear basis functions
    on the finest hierarchy level, weighted with the normalized Haar values.
    """
    if sample.index != lbasis.sample_index:
        raise SamplingError(
            f"basis of sample {lbasis.sample_index} used with sample {sample.index}"
        )
    if lbasis.sizes != basis.level_sizes:
        raise DimensionMismatch(f"level sizes {lbasis.sizes} != {basis.level_sizes}")
    integrals = cell_integrals(fine, basis.grid.L) @ lbasis.matrix()
    full = sp.csr_matrix(basis.matrix @ integrals)
    full.eliminate_zeros()
    return BlockMat.from_matrix(full, basis.level_sizes, lambda k, m: m <= k)


def per_sample_Y(T: BlockMat, R: BlockMat, cutoff: LevelPredicate) -> BlockMat:
    """Kept blocks of ``T R T^t`` using the lower-triangular shape of ``T``."""
    if T.sizes != R.sizes:
        raise DimensionMismatch(f"T has level sizes {T.sizes}, R has {R.sizes}")
    n = len(T.sizes)
    blocks: dict[BlockKey, SparseMat] = {}
    for m in range(n):
        for k in range(m, n):
            if not cutoff(m, k):
                continue
            total = sp.csr_matrix((T.sizes[m], T.sizes[k]))
            for j in range(m + 1):
                if (m, j) not in T or (k, j) not in T or (j, j) not in R:
                    continue
                total = total + T[(m, j)] @ R[(j, j)] @ T[(k, j)].T
            block = sp.csr_matrix(total)
            block.eliminate_zeros()
            blocks[(m, k)] = block
            if k != m:
                blocks[(k, m)] = sp.csr_matrix(block.T)
    return BlockMat(T.sizes, blocks)


def spectral_norm(block: SparseMat) -> float:
    if min(block.shape) == 0 or block.count_nonzero() == 0:
        return 0.0
    if max(block.shape) <= DENSE_LIMIT:
        return float(np.linalg.norm(block.toarray(), ord=2))
    return float(spla.svds(block, k=1, return_singular_vectors=False)[0])


def condition_number(block: SparseMat) -> float:
    """Spectral condition number of a symmetric positive definite block."""
    if block.shape[0] <= DENSE_LIMIT:
        eigenvalues = np.linalg.eigvalsh(block.toarray())
        low, high = float(eigenvalues[0]), float(eigenvalues[-1])
    else:
        high = float(spla.eigsh(block, k=1, which="LA", return_eigenvectors=False)[0])
        low = float(spla.eigsh(block, k=1, which="SA", return_eigenvectors=False)[0])
    if low <= 0.0:
        return math.inf
    return high / low


def block_norms(T: BlockMat) -> dict[BlockKey, float]:
    """Spectral norms of all stored blocks."""
    return {key: spectral_norm(block) for key, block in T}
