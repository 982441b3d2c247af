"""Coefficient realizations and the point sources driving MC/QMC sampling."""

from __future__ import annotations

import functools
import logging
import math
import warnings
from dataclasses import replace
from typing import Protocol

import numpy as np
from scipy.stats import qmc

from ..core.errors import ResolutionError, SamplingError, SobolDimensionError
from ..core.models import CoeffSample, FloatArray, Generator, SamplePlan

log = logging.getLogger(__name__)

# Dimension limit of the Joe-Kuo direction numbers shipped with scipy.
SOBOL_MAX_DIMENSION: int = int(getattr(qmc.Sobol, "MAXDIM", 21201))

# Sobol streams are disjoint segments of one sequence.
SOBOL_STREAM_STRIDE = 2**16


class UnitCubeSource(Protocol):
    """Deterministic access to the k-th point in [0, 1)^dimension."""

    @property
    def dimension(self) -> int:
        """Number of coordinates per point."""
        ...

    def point(self, k: int) -> FloatArray:
        """Return the k-th point; identical for identical ``k``."""
        ...


class MonteCarloSource:
    """Counter-based pseudo random points: one seed sequence per sample index."""

    def __init__(self, dimension: int, seed: int, stream: int = 0) -> None:
        self._dimension = dimension
        self._seed = seed
        self._stream = stream

    @property
    def dimension(self) -> int:
        return self._dimension

    def point(self, k: int) -> FloatArray:
        seq = np.random.SeedSequence([self._seed, self._stream, k])
        rng = np.random.default_rng(seq)
        return rng.random(self._dimension)


@functools.lru_cache(maxsize=16)
def _sobol_block(dimension: int, start: int, count: int) -> FloatArray:
    engine = qmc.Sobol(d=dimension, scramble=False)
    if start:
        engine.fast_forward(start)
    with warnings.catch_warnings():
        # Balance warnings for non power-of-two counts do not apply here.
        warnings.simplefilter("ignore", UserWarning)
        block = np.asarray(engine.random(count), dtype=np.float64)
    block.setflags(write=False)
    return block


class SobolSource:
    """Unscrambled Sobol points, the first point of stream 0 being the origin."""

    def __init__(
        self, dimension: int, count: int, skip: int = 0, stream: int = 0
    ) -> None:
        if dimension > SOBOL_MAX_DIMENSION:
            raise SobolDimensionError(dimension, SOBOL_MAX_DIMENSION)
        self._dimension = dimension
        self._count = count
        self._start = skip + stream * SOBOL_STREAM_STRIDE

    @property
    def dimension(self) -> int:
        return self._dimension

    def point(self, k: int) -> FloatArray:
        block = _sobol_block(self._dimension, self._start, self._count)
        return np.array(block[k])


def open_source(plan: SamplePlan) -> UnitCubeSource:
    """Create the point source a plan describes."""
    if plan.generator is Generator.SOBOL:
        return SobolSource(plan.dimension, plan.samples, plan.skip, plan.stream)
    return MonteCarloSource(plan.dimension, plan.seed, plan.stream)


def fit_generator(plan: SamplePlan) -> SamplePlan:
    """Fall back to Monte Carlo when Sobol cannot cover the plan's dimension."""
    if plan.generator is Generator.SOBOL and plan.dimension > SOBOL_MAX_DIMENSION:
        log.warning(
            "Sobol dimension %d exceeds %d, sampling with Monte Carlo instead",
            plan.dimension,
            SOBOL_MAX_DIMENSION,
        )
        return replace(plan, generator=Generator.MC)
    return plan


def draw_sample(plan: SamplePlan, k: int) -> CoeffSample:
    """The k-th coefficient realization of a plan."""
    if not 0 <= k < plan.samples:
        raise SamplingError(f"sample index {k} outside 0..{plan.samples - 1}")
    u = open_source(plan).point(k)
    values = plan.gamma_min + (plan.gamma_max - plan.gamma_min) * u
    return CoeffSample(plan.d, plan.eps_level, values, k, plan.generator)


def constant_sample(d: int, value: float = 1.0, index: int = 0) -> CoeffSample:
    """The deterministic coefficient A = value on the whole domain."""
    return CoeffSample(d, 0, np.array([float(value)]), index, Generator.MC)


def coeff_at(sample: CoeffSample, point: tuple[float, ...]) -> float:
    """Coefficient at a point; cells are half-open, the last one closed."""
    n = 2**sample.eps_level
    flat = 0
    for axis, x in enumerate(point):
        m = min(math.floor(x * n), n - 1)
        flat += m * n**axis
    return float(sample.values[flat])


def coeff_on_fine_element(
    sample: CoeffSample, fine_level: int, elem: tuple[int, ...]
) -> float:
    """Value of the epsilon-cell containing the fine element's midpoint."""
    if fine_level < sample.eps_level:
        raise ResolutionError(
            f"fine level {fine_level} does not resolve coefficient level "
            f"{sample.eps_level}"
        )
    h = 2.0**-fine_level
    return coeff_at(sample, tuple((m + 0.5) * h for m in elem))
