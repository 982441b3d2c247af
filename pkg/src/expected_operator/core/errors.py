"""Exception hierarchy for expected-operator.

Every error raised by the library derives from :class:`ExpectedOperatorError`
so callers (and the CLI) can catch the whole family at once.
"""

from __future__ import annotations


class ExpectedOperatorError(Exception):
    """Base exception for all expected-operator errors."""


class ConfigError(ExpectedOperatorError):
    """Invalid configuration, plan or grid parameters."""


class InvalidElement(ExpectedOperatorError):
    """Malformed element id or level outside the hierarchy."""


class ResolutionError(ExpectedOperatorError):
    """The fine grid is too coarse for the requested operation.

    Raised for bubbles on elements without interior fine nodes, coefficient
    lookups on grids that do not resolve the coefficient cells, and grids
    without interior degrees of freedom.
    """


class DimensionMismatch(ExpectedOperatorError):
    """Vector, basis or block shapes do not fit together."""


class SamplingError(ExpectedOperatorError):
    """Sample index or generator setup is invalid."""


class SobolDimensionError(SamplingError):
    """Requested Sobol dimension exceeds the direction-number table."""

    def __init__(self, dimension: int, limit: int) -> None:
        self.dimension = dimension
        self.limit = limit
        super().__init__(
            f"Sobol dimension {dimension} exceeds the supported maximum {limit}"
        )


class SingularLocalSystem(ExpectedOperatorError):
    """A patch saddle-point system could not be factorized."""

    def __init__(self, level: int, element: int, reason: str) -> None:
        self.level = level
        self.element = element
        super().__init__(
            f"singular local system on level {level}, element {element}: {reason}"
        )


class NotPositiveDefinite(ExpectedOperatorError):
    """Non-positive curvature met while running CG on a block."""

    def __init__(self, column: int, step: int, curvature: float) -> None:
        self.column = column
        self.step = step
        self.curvature = curvature
        super().__init__(
            f"block is not positive definite: curvature {curvature:.3e} "
            f"in column {column} at CG step {step}"
        )


class EmptyAccumulator(ExpectedOperatorError):
    """The accumulator has not received any sample."""


class PostprocessError(ExpectedOperatorError):
    """A diagonal block of the transform could not be inverted."""

    def __init__(self, level: int, reason: str) -> None:
        self.level = level
        super().__init__(f"postprocessing failed on level {level}: {reason}")


class OperatorFormatError(ExpectedOperatorError):
    """Serialized operator files are missing or malformed."""
