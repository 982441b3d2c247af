"""Sample averaging into the compressed expected operator, its application and
gradient post-processing."""

from __future__ import annotations

import asyncio
import functools
import logging
import math
import threading
from collections.abc import AsyncIterator, Callable
from dataclasses import asdict, dataclass, field
from typing import Any, TypeVar

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .adapted.corrector import LocalizedBasis, build_localized_basis
from .adapted.operator import (
    BlockKey,
    BlockMat,
    LevelPredicate,
    assemble_S_delta,
    assemble_T_delta,
    block_norms,
    condition_number,
    invert_blocks,
    per_sample_Y,
)
from .core.errors import DimensionMismatch, EmptyAccumulator, PostprocessError
from .core.models import (
    CoeffSample,
    CutoffMode,
    FineFunction,
    FloatArray,
    Generator,
    PiecewiseConstant,
    SamplePlan,
)
from .mesh.fem import SparseMat, assemble_stiffness
from .mesh.grid import FineGrid, HierGrid
from .mesh.haar import HaarBasis, build_haar, haar_analyze, haar_synthesize
from .sampling.randfield import constant_sample, draw_sample

log = logging.getLogger(__name__)

_T = TypeVar("_T")

# Relative tolerance of the diagonal transform-block solves.
POSTPROCESS_RTOL = 1e-12


def cutoff_bound(mode: CutoffMode, L: int) -> int:
    """Largest kept level sum ``l + k`` of the hyperbolic cross."""
    if mode is CutoffMode.STANDARD:
        return L
    extra = 1 if L <= 1 else max(1, math.ceil(math.log2(L)))
    return L + extra


def cutoff_predicate(mode: CutoffMode, L: int) -> LevelPredicate:
    bound = cutoff_bound(mode, L)
    return lambda k, m: k + m <= bound


@dataclass(frozen=True)
class OperatorInfo:
    """Where a compressed operator comes from."""

    d: int
    L: int
    fine_level: int
    eps_level: int
    iterations: int
    gamma_min: float
    gamma_max: float
    generator: Generator = Generator.MC
    seed: int = 0
    skip: int = 0
    scrambled: bool = False

    @classmethod
    def from_plan(
        cls, plan: SamplePlan, L: int, fine_level: int, iterations: int
    ) -> OperatorInfo:
        return cls(
            d=plan.d,
            L=L,
            fine_level=fine_level,
            eps_level=plan.eps_level,
            iterations=iterations,
            gamma_min=plan.gamma_min,
            gamma_max=plan.gamma_max,
            generator=plan.generator,
            seed=plan.seed,
            skip=plan.skip,
        )

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["generator"] = self.generator.value
        return data


@dataclass(frozen=True, eq=False)
class CompressedOperator:
    """Averaged block matrix restricted to the kept hyperbolic cross."""

    blocks: BlockMat
    info: OperatorInfo
    cutoff: CutoffMode
    samples: int
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def nnz(self) -> int:
        return self.blocks.nnz

    @functools.cached_property
    def _matrix(self) -> sp.csr_matrix:
        return self.blocks.to_csr()

    def matrix(self) -> sp.csr_matrix:
        return self._matrix

    def kept(self) -> list[BlockKey]:
        return self.blocks.keys()

    @property
    def grid(self) -> HierGrid:
        return HierGrid(self.info.d, self.info.L)

    def metadata(self) -> dict[str, Any]:
        return {
            **self.info.to_dict(),
            "cutoff": self.cutoff.value,
            "samples": self.samples,
            "nnz": self.nnz,
            "sizes": list(self.blocks.sizes),
            "offsets": list(self.blocks.offsets),
            "blocks": [list(key) for key in self.kept()],
            "diagnostics": dict(self.diagnostics),
        }


class Accumulator:
    """Running block-wise sums of per-sample matrices."""

    def __init__(self) -> None:
        self.sizes: tuple[int, ...] | None = None
        self.sums: dict[BlockKey, SparseMat] = {}
        self.count = 0
        self._lock = threading.Lock()

    def _check(self, sizes: tuple[int, ...]) -> None:
        if self.sizes is not None and self.sizes != sizes:
            raise DimensionMismatch(f"level sizes {sizes} do not match {self.sizes}")

    def add(self, Y: BlockMat) -> Accumulator:
        with self._lock:
            self._check(Y.sizes)
            self.sizes = Y.sizes
            for key, block in Y:
                current = self.sums.get(key)
                total = block if current is None else current + block
                self.sums[key] = sp.csr_matrix(total)
            self.count += 1
        return self

    def merge(self, other: Accumulator) -> Accumulator:
        """Fold another accumulator's partial sums into this one."""
        if other is self or other.count == 0:
            return self
        with other._lock:
            sizes, sums, count = other.sizes, dict(other.sums), other.count
        with self._lock:
            assert sizes is not None
            self._check(sizes)
            self.sizes = sizes
            for key, block in sums.items():
                current = self.sums.get(key)
                total = block if current is None else current + block
                self.sums[key] = sp.csr_matrix(total)
            self.count += count
        return self

    def mean(self) -> BlockMat:
        if self.count == 0 or self.sizes is None:
            raise EmptyAccumulator("no sample has been accumulated")
        return BlockMat(
            self.sizes, {key: block / self.count for key, block in self.sums.items()}
        )


def accumulate(acc: Accumulator, Y: BlockMat) -> Accumulator:
    return acc.add(Y)


def finalize(
    acc: Accumulator,
    cutoff: CutoffMode,
    info: OperatorInfo,
    diagnostics: dict[str, float] | None = None,
) -> CompressedOperator:
    """Sample mean restricted to the blocks kept by ``cutoff``."""
    mean = acc.mean()
    keep = cutoff_predicate(cutoff, info.L)
    blocks = {}
    for key, block in mean:
        if keep(*key):
            block = sp.csr_matrix(block)
            block.eliminate_zeros()
            blocks[key] = block
    op = CompressedOperator(
        BlockMat(mean.sizes, blocks), info, cutoff, acc.count, dict(diagnostics or {})
    )
    log.info(
        "compressed operator: L=%d, %s cutoff, M=%d, nnz=%d",
        info.L,
        cutoff.value,
        op.samples,
        op.nnz,
    )
    return op


@dataclass
class SampleContribution:
    """Truncated ``T R T^t`` of one sample plus what was measured on the way."""

    Y: BlockMat
    diagnostics: dict[str, float]


def sample_contribution(
    sample: CoeffSample,
    grid: HierGrid,
    fine: FineGrid,
    basis: HaarBasis,
    iterations: int,
    keep: LevelPredicate,
    *,
    max_condition: float = 100.0,
    exact: bool = False,
) -> SampleContribution:
    """Truncated ``T R T^t`` of one sample.

    With ``exact`` the correctors and the block inverses are computed with
    direct solvers instead of ``iterations`` CG steps.
    """
    K = assemble_stiffness(sample, fine)
    lbasis = build_localized_basis(
        sample, grid, fine, basis, iterations, K=K, exact=exact
    )
    S = assemble_S_delta(sample, lbasis, K)
    R = invert_blocks(S, None if exact else max(iterations, 1))
    T = assemble_T_delta(sample, lbasis, basis, fine)
    conditions = [condition_number(S[(m, m)]) for m in basis.levels]
    worst = max(conditions)
    if worst > max_condition:
        log.warning(
            "sample %d: condition number %.1f of a stiffness block exceeds %.1f",
            sample.index,
            worst,
            max_condition,
        )
    diagnostics = {
        "condition": worst,
        "nnz_S": float(S.nnz),
        "nnz_T": float(T.nnz),
        "transform_decay": max(
            (norm / grid.h(k) for (k, m), norm in block_norms(T).items() if k > m),
            default=0.0,
        ),
        "corrector_residual": max(lb.residual for lb in lbasis.levels),
        "constraint_residual": max(lb.constraint_residual for lb in lbasis.levels),
    }
    return SampleContribution(per_sample_Y(T, R, keep), diagnostics)


async def gather_ordered(
    func: Callable[[int], _T], count: int, workers: int = 1
) -> AsyncIterator[_T]:
    """Yield ``func(0), ..., func(count - 1)`` in order.

    Calls run in worker threads, ``workers`` at a time.
    """
    window = max(workers, 1)
    for start in range(0, count, window):
        indices = range(start, min(start + window, count))
        results = await asyncio.gather(
            *(asyncio.to_thread(func, index) for index in indices)
        )
        for result in results:
            yield result


def _merge_diagnostics(total: dict[str, float], new: dict[str, float]) -> None:
    for key, value in new.items():
        total[key] = max(total.get(key, value), value)


async def compress_async(
    plan: SamplePlan,
    L: int,
    fine_level: int,
    *,
    iterations: int | None = None,
    cutoff: CutoffMode = CutoffMode.STANDARD,
    workers: int = 1,
    max_condition: float = 100.0,
    exact: bool = False,
) -> CompressedOperator:
    """Average the per-sample contributions of a plan.

    Samples are computed in worker threads, ``workers`` at a time, and added in
    sample-index order so the result does not depend on ``workers``.
    """
    grid = HierGrid(plan.d, L)
    fine = FineGrid(plan.d, fine_level)
    fine.hosts(grid)
    basis = build_haar(grid)
    k = math.ceil(L / 2) if iterations is None else iterations
    keep = cutoff_predicate(cutoff, L)
    log.info(
        "compressing L=%d with %d samples, %d iterations, %s cutoff",
        L,
        plan.samples,
        k,
        cutoff.value,
    )

    def contribute(index: int) -> SampleContribution:
        sample = draw_sample(plan, index)
        return sample_contribution(
            sample,
            grid,
            fine,
            basis,
            k,
            keep,
            max_condition=max_condition,
            exact=exact,
        )

    acc = Accumulator()
    diagnostics: dict[str, float] = {}
    async for result in gather_ordered(contribute, plan.samples, workers):
        acc.add(result.Y)
        _merge_diagnostics(diagnostics, result.diagnostics)
    info = OperatorInfo.from_plan(plan, L, fine_level, k)
    return finalize(acc, cutoff, info, diagnostics)


def build_operator(
    plan: SamplePlan,
    L: int,
    fine_level: int,
    *,
    iterations: int | None = None,
    cutoff: CutoffMode = CutoffMode.STANDARD,
    workers: int = 1,
    max_condition: float = 100.0,
    exact: bool = False,
) -> CompressedOperator:
    """Blocking wrapper around :func:`compress_async`."""
    return asyncio.run(
        compress_async(
            plan,
            L,
            fine_level,
            iterations=iterations,
            cutoff=cutoff,
            workers=workers,
            max_condition=max_condition,
            exact=exact,
        )
    )


def _coefficients(
    op: CompressedOperator, f: PiecewiseConstant | FineFunction, fine: FineGrid | None
) -> FloatArray:
    basis = build_haar(op.grid)
    beta = haar_analyze(f, basis, fine)
    return np.asarray(op.matrix() @ beta, dtype=np.float64)


def apply(
    op: CompressedOperator,
    f: PiecewiseConstant | FineFunction,
    fine: FineGrid | None = None,
) -> PiecewiseConstant:
    """Piecewise-constant approximation of the expected solution for ``f``."""
    gamma = _coefficients(op, f, fine)
    return haar_synthesize(gamma, build_haar(op.grid))


def _solve_diagonal(block: SparseMat, rhs: FloatArray, level: int) -> FloatArray:
    if not np.any(rhs):
        return np.zeros(block.shape[1])
    column_norms = np.asarray(abs(block).sum(axis=0)).ravel()
    if np.any(column_norms == 0.0):
        raise PostprocessError(level, "diagonal block has an empty column")
    normal = sp.csr_matrix(block.T @ block)
    solution, info = spla.cg(
        normal,
        block.T @ rhs,
        rtol=POSTPROCESS_RTOL,
        atol=0.0,
        maxiter=10 * block.shape[1],
    )
    if info != 0:
        raise PostprocessError(level, f"CG did not converge (info={info})")
    return np.asarray(solution, dtype=np.float64)


def forward_substitute(T: BlockMat, gamma: FloatArray) -> FloatArray:
    """Solve the lower block-triangular system ``T alpha = gamma``."""
    offsets = T.offsets
    if gamma.shape != (offsets[-1],):
        raise DimensionMismatch(f"{gamma.shape[0]} coefficients for {offsets[-1]} rows")
    alpha = np.zeros_like(gamma)
    for level in range(len(T.sizes)):
        rows = slice(offsets[level], offsets[level + 1])
        rhs = gamma[rows].copy()
        for j in range(level):
            if (level, j) in T:
                rhs -= T[(level, j)] @ alpha[offsets[j] : offsets[j + 1]]
        if (level, level) not in T:
            raise PostprocessError(level, "diagonal block is missing")
        alpha[rows] = _solve_diagonal(T[(level, level)], rhs, level)
    return alpha


def postprocess_gradient(
    op: CompressedOperator,
    f: PiecewiseConstant | FineFunction,
    laplacian_basis: LocalizedBasis,
    Tlap: BlockMat,
    fine: FineGrid | None = None,
) -> FineFunction:
    """Fine function in the span of the Laplacian-adapted basis with the same
    Haar coefficients as the compressed solution."""
    if op.cutoff is CutoffMode.STANDARD:
        log.warning("post-processing an operator built with the standard cutoff")
    if Tlap.sizes != laplacian_basis.sizes or Tlap.sizes != op.blocks.sizes:
        raise DimensionMismatch("transform, basis and operator levels differ")
    gamma = _coefficients(op, f, fine)
    alpha = forward_substitute(Tlap, gamma)
    return np.asarray(laplacian_basis.matrix() @ alpha, dtype=np.float64)


def laplacian_transform(
    grid: HierGrid, fine: FineGrid, iterations: int
) -> tuple[LocalizedBasis, BlockMat]:
    """Localized basis and transform of the unit coefficient."""
    sample = constant_sample(grid.d)
    basis = build_haar(grid)
    lbasis = build_localized_basis(sample, grid, fine, basis, iterations)
    return lbasis, assemble_T_delta(sample, lbasis, basis, fine)
