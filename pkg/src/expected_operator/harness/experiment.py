"""Error-versus-nnz sweeps against Monte Carlo reference solutions."""

from __future__ import annotations

import asyncio
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ..compress import (
    apply,
    build_operator,
    gather_ordered,
    laplacian_transform,
    postprocess_gradient,
)
from ..core.config import ExperimentConfig
from ..core.models import ErrorRow, FineFunction, PiecewiseConstant, SamplePlan
from ..io import save_operator, write_rows
from ..mesh.fem import (
    FineSolve,
    assemble_stiffness,
    h1_seminorm,
    l2_distance_to_pc,
    load_vector,
    solve_dirichlet,
)
from ..mesh.grid import FineGrid, HierGrid
from ..sampling.randfield import draw_sample, fit_generator

log = logging.getLogger(__name__)


def rhs_function(kind: str, d: int) -> PiecewiseConstant:
    """``indicator``: the indicator of [1/2, 1] x [0, 1]^(d-1); ``one``: f = 1."""
    if kind == "one":
        return PiecewiseConstant(d, 0, np.ones(1))
    first_axis = np.arange(2**d) % 2
    return PiecewiseConstant(d, 1, first_axis.astype(np.float64))


def compression_plan(cfg: ExperimentConfig, L: int) -> SamplePlan:
    """Sampling plan for level ``L``; a deterministic coefficient needs one sample."""
    plan = fit_generator(cfg.plan_for(L))
    if plan.deterministic:
        plan = replace(plan, samples=1)
    return plan


@dataclass
class ReferenceSolution:
    """Sample mean of fine Galerkin solutions."""

    u: FineFunction
    samples: int
    failures: list[int] = field(default_factory=list)


def reference_solution(
    cfg: ExperimentConfig, f: PiecewiseConstant
) -> ReferenceSolution:
    """Mean of fine solves over the reference stream (``M_h`` samples)."""
    fine = FineGrid(cfg.d, cfg.fine_level)
    load = load_vector(f, fine)
    plan = fit_generator(cfg.reference_plan())
    if plan.deterministic:
        plan = replace(plan, samples=1)

    def solve(index: int) -> FineSolve:
        sample = draw_sample(plan, index)
        return solve_dirichlet(assemble_stiffness(sample, fine), load, cfg.solver_tol)

    async def collect() -> ReferenceSolution:
        total = np.zeros(fine.n_dofs)
        failures = []
        index = 0
        async for result in gather_ordered(solve, plan.samples, cfg.workers):
            total += result.u
            if not result.converged:
                failures.append(index)
            index += 1
        return ReferenceSolution(total / plan.samples, plan.samples, failures)

    reference = asyncio.run(collect())
    if reference.failures:
        log.warning(
            "%d of %d reference solves did not converge",
            len(reference.failures),
            reference.samples,
        )
    log.info("reference solution from %d fine solves", reference.samples)
    return reference


def run_experiment(cfg: ExperimentConfig) -> list[ErrorRow]:
    """Compress, apply and compare for every configured level."""
    fine = FineGrid(cfg.d, cfg.fine_level)
    f = rhs_function(cfg.rhs, cfg.d)
    reference = reference_solution(cfg, f)
    rows = []
    for L in cfg.levels:
        started = time.perf_counter()
        plan = compression_plan(cfg, L)
        k = cfg.iterations_for(L)
        op = build_operator(
            plan,
            L,
            cfg.fine_level,
            iterations=k,
            cutoff=cfg.cutoff,
            workers=cfg.workers,
            max_condition=cfg.max_condition,
        )
        l2_error = l2_distance_to_pc(reference.u, apply(op, f), fine)
        h1_error = None
        if cfg.gradient:
            lbasis, transform = laplacian_transform(HierGrid(cfg.d, L), fine, k)
            smooth = postprocess_gradient(op, f, lbasis, transform)
            h1_error = h1_seminorm(smooth - reference.u, fine)
        seconds = time.perf_counter() - started if cfg.record_timing else None
        row = ErrorRow(
            L, op.nnz, l2_error, h1_error, seconds, op.samples, op.diagnostics
        )
        log.info(
            "L=%d: nnz=%d, L2 error %.3e%s",
            L,
            row.nnz,
            l2_error,
            "" if h1_error is None else f", H1 error {h1_error:.3e}",
        )
        if cfg.operator_dir is not None:
            save_operator(op, cfg.operator_dir / f"L{L}")
        rows.append(row)
    if cfg.output_csv is not None:
        write_rows(rows, cfg.output_csv, record_timing=cfg.record_timing)
    return rows
