"""Core data models for expected-operator using dataclasses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TypeAlias

import numpy as np
import numpy.typing as npt

from .errors import ConfigError, DimensionMismatch

FloatArray: TypeAlias = npt.NDArray[np.float64]
IntArray: TypeAlias = npt.NDArray[np.int64]

# Interior-node coefficient vector of the d-linear space V_h (zero trace).
FineFunction: TypeAlias = FloatArray


@dataclass(frozen=True, order=True)
class ElementId:
    """A cell of the dyadic hierarchy, addressed by level and multi-index."""

    level: int
    index: tuple[int, ...]

    def __str__(self) -> str:
        return f"({self.level},{self.index})"


@dataclass(frozen=True, eq=False)
class PiecewiseConstant:
    """A function that is constant on every cell of one hierarchy level.

    ``values`` holds one entry per cell in lexicographic order with the first
    coordinate running fastest.
    """

    d: int
    level: int
    values: FloatArray

    def __post_init__(self) -> None:
        expected = 2 ** (self.d * self.level)
        if self.values.shape != (expected,):
            raise DimensionMismatch(
                f"level {self.level} in d={self.d} needs {expected} values, "
                f"got shape {self.values.shape}"
            )

    @property
    def cell_volume(self) -> float:
        return 2.0 ** (-self.d * self.level)

    def refine(self, level: int) -> PiecewiseConstant:
        """Represent the same function on a finer level."""
        if level < self.level:
            raise DimensionMismatch(f"cannot refine level {self.level} to {level}")
        if level == self.level:
            return self
        n_coarse = 2**self.level
        n_fine = 2**level
        ratio = n_fine // n_coarse
        flat = np.arange(n_fine**self.d, dtype=np.int64)
        coarse = np.zeros_like(flat)
        for axis in range(self.d):
            coordinate = (flat // n_fine**axis) % n_fine
            coarse += (coordinate // ratio) * n_coarse**axis
        return PiecewiseConstant(self.d, level, self.values[coarse])

    def l2_norm(self) -> float:
        return math.sqrt(float(np.sum(self.values**2)) * self.cell_volume)


class Generator(Enum):
    """Point generator driving the coefficient sampling."""

    MC = "mc"
    SOBOL = "sobol"


@dataclass(frozen=True, eq=False)
class CoeffSample:
    """One realization A(omega) as one scalar per epsilon-cell."""

    d: int
    eps_level: int
    values: FloatArray
    index: int
    generator: Generator

    @property
    def epsilon(self) -> float:
        return 2.0**-self.eps_level


@dataclass(frozen=True)
class SamplePlan:
    """Finite set of sampling points together with the coefficient law."""

    d: int
    eps_level: int
    samples: int
    gamma_min: float
    gamma_max: float
    generator: Generator = Generator.MC
    seed: int = 0
    skip: int = 0
    stream: int = 0

    def __post_init__(self) -> None:
        if self.samples < 1:
            raise ConfigError(f"need at least one sample, got {self.samples}")
        if not 0 < self.gamma_min <= self.gamma_max:
            raise ConfigError(
                f"need 0 < gamma_min <= gamma_max, got "
                f"[{self.gamma_min}, {self.gamma_max}]"
            )
        if self.eps_level < 0:
            raise ConfigError(f"negative coefficient level {self.eps_level}")
        if self.skip < 0 or self.stream < 0:
            raise ConfigError("skip and stream must be non-negative")

    @property
    def dimension(self) -> int:
        """Number of independent cell values per sample."""
        return 2 ** (self.d * self.eps_level)

    @property
    def deterministic(self) -> bool:
        return self.gamma_min == self.gamma_max


class CutoffMode(Enum):
    """Hyperbolic-cross truncation of the averaged block matrix."""

    STANDARD = "standard"
    RELAXED = "relaxed"


@dataclass
class ErrorRow:
    """One line of the error-versus-nnz table."""

    L: int
    nnz: int
    l2_error: float
    h1_error: float | None
    seconds: float | None
    M: int
    diagnostics: dict[str, float] = field(default_factory=dict, compare=False)
