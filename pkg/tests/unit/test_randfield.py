"""Unit tests for coefficient sampling."""

import logging
import math
from dataclasses import replace

import numpy as np
import pytest

from expected_operator.core.errors import (
    ResolutionError,
    SamplingError,
    SobolDimensionError,
)
from expected_operator.core.models import CoeffSample, Generator, SamplePlan
from expected_operator.sampling.randfield import (
    SOBOL_MAX_DIMENSION,
    MonteCarloSource,
    SobolSource,
    coeff_at,
    coeff_on_fine_element,
    constant_sample,
    draw_sample,
    fit_generator,
    open_source,
)


@pytest.fixture
def sobol_plan() -> SamplePlan:
    return SamplePlan(
        d=1,
        eps_level=2,
        samples=4,
        gamma_min=1.0,
        gamma_max=3.0,
        generator=Generator.SOBOL,
    )


class TestSources:
    """Tests for the point sources."""

    def test_monte_carlo_is_reproducible(self) -> None:
        source = MonteCarloSource(8, seed=5)
        assert np.array_equal(source.point(3), source.point(3))
        assert not np.array_equal(source.point(3), source.point(4))

    def test_monte_carlo_streams_differ(self) -> None:
        first = MonteCarloSource(8, seed=5, stream=0).point(0)
        second = MonteCarloSource(8, seed=5, stream=1).point(0)
        assert not np.array_equal(first, second)

    def test_sobol_starts_at_origin(self) -> None:
        source = SobolSource(4, count=4)
        assert np.array_equal(source.point(0), np.zeros(4))
        assert np.array_equal(source.point(1), np.full(4, 0.5))

    def test_sobol_skip_shifts_the_sequence(self) -> None:
        plain = SobolSource(3, count=8)
        skipped = SobolSource(3, count=4, skip=2)
        assert np.array_equal(skipped.point(1), plain.point(3))

    def test_sobol_dimension_limit(self) -> None:
        with pytest.raises(SobolDimensionError) as excinfo:
            SobolSource(SOBOL_MAX_DIMENSION + 1, count=1)
        assert excinfo.value.limit == SOBOL_MAX_DIMENSION

    def test_open_source_follows_plan(self, sobol_plan: SamplePlan) -> None:
        assert isinstance(open_source(sobol_plan), SobolSource)
        mc = replace(sobol_plan, generator=Generator.MC)
        assert isinstance(open_source(mc), MonteCarloSource)
        assert open_source(mc).dimension == 4


class TestDrawSample:
    """Tests for draw_sample."""

    def test_values_lie_in_range(self, plan_1d: SamplePlan) -> None:
        for k in range(plan_1d.samples):
            sample = draw_sample(plan_1d, k)
            assert sample.values.shape == (8,)
            assert np.all(sample.values >= 0.5)
            assert np.all(sample.values <= 2.0)
            assert sample.index == k

    def test_same_index_same_sample(self, plan_1d: SamplePlan) -> None:
        first = draw_sample(plan_1d, 1)
        again = draw_sample(plan_1d, 1)
        assert np.array_equal(first.values, again.values)

    def test_first_sobol_sample_is_gamma_min(self, sobol_plan: SamplePlan) -> None:
        assert np.all(draw_sample(sobol_plan, 0).values == 1.0)
        assert np.all(draw_sample(sobol_plan, 1).values == 2.0)

    @pytest.mark.parametrize("k", [-1, 3])
    def test_index_out_of_range(self, plan_1d: SamplePlan, k: int) -> None:
        with pytest.raises(SamplingError):
            draw_sample(plan_1d, k)

    def test_fit_generator_falls_back_to_monte_carlo(
        self, caplog: pytest.LogCaptureFixture
    ) -> None:
        eps_level = 1
        while 2**eps_level <= SOBOL_MAX_DIMENSION:
            eps_level += 1
        plan = SamplePlan(
            d=1,
            eps_level=eps_level,
            samples=1,
            gamma_min=1.0,
            gamma_max=2.0,
            generator=Generator.SOBOL,
        )
        with caplog.at_level(logging.WARNING):
            fitted = fit_generator(plan)
        assert fitted.generator is Generator.MC
        assert "Monte Carlo" in caplog.text

    def test_fit_generator_keeps_small_sobol(self, sobol_plan: SamplePlan) -> None:
        assert fit_generator(sobol_plan) is sobol_plan


class TestCoefficientLookup:
    """Tests for point and element lookups."""

    @pytest.fixture
    def sample(self) -> CoeffSample:
        return CoeffSample(2, 1, np.array([1.0, 2.0, 3.0, 4.0]), 0, Generator.MC)

    def test_half_open_cells(self, sample: CoeffSample) -> None:
        assert coeff_at(sample, (0.5, 0.0)) == 2.0
        assert coeff_at(sample, (0.49, 0.51)) == 3.0

    def test_last_cell_is_closed(self, sample: CoeffSample) -> None:
        assert coeff_at(sample, (1.0, 1.0)) == 4.0

    def test_fine_element_lookup(self, sample: CoeffSample) -> None:
        assert coeff_on_fine_element(sample, 2, (3, 0)) == 2.0

    def test_fine_element_needs_resolution(self, sample: CoeffSample) -> None:
        with pytest.raises(ResolutionError):
            coeff_on_fine_element(sample, 0, (0, 0))

    def test_constant_sample(self) -> None:
        sample = constant_sample(2, 3.5)
        assert sample.eps_level == 0
        assert coeff_at(sample, (0.3, 0.9)) == 3.5


class TestMoments:
    """Statistics of Monte Carlo coefficients."""

    def test_mean_within_three_sigma(self) -> None:
        plan = SamplePlan(
            d=2, eps_level=2, samples=40, gamma_min=0.5, gamma_max=10.0, seed=13
        )
        values = np.concatenate([draw_sample(plan, k).values for k in range(40)])
        sigma = (plan.gamma_max - plan.gamma_min) / math.sqrt(12 * values.size)
        assert abs(values.mean() - 5.25) <= 3 * sigma
