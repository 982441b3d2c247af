"""Shared test fixtures for Expected Operator tests."""

import pytest

from expected_operator.core.models import CoeffSample, SamplePlan
from expected_operator.mesh.grid import FineGrid, HierGrid
from expected_operator.sampling.randfield import draw_sample


@pytest.fixture
def grid_1d() -> HierGrid:
    """Three-level hierarchy on the unit interval."""
    return HierGrid(1, 2)


@pytest.fixture
def fine_1d() -> FineGrid:
    return FineGrid(1, 5)


@pytest.fixture
def grid_2d() -> HierGrid:
    return HierGrid(2, 1)


@pytest.fixture
def fine_2d() -> FineGrid:
    """7x7 interior nodes on the unit square."""
    return FineGrid(2, 3)


@pytest.fixture
def plan_1d() -> SamplePlan:
    """Small Monte Carlo plan with a genuinely random coefficient."""
    return SamplePlan(
        d=1, eps_level=3, samples=3, gamma_min=0.5, gamma_max=2.0, seed=7
    )


@pytest.fixture
def plan_2d() -> SamplePlan:
    return SamplePlan(
        d=2, eps_level=2, samples=2, gamma_min=0.5, gamma_max=2.0, seed=11
    )


@pytest.fixture
def sample_1d(plan_1d: SamplePlan) -> CoeffSample:
    return draw_sample(plan_1d, 0)


@pytest.fixture
def sample_2d(plan_2d: SamplePlan) -> CoeffSample:
    return draw_sample(plan_2d, 0)
