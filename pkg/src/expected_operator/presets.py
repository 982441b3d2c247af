"""Ready-made experiment configurations."""

from __future__ import annotations

from .core.config import ExperimentConfig
from .core.errors import ConfigError
from .core.models import Generator

_DESK = {
    1: {"fine_level": 10, "coeff_level": 6, "levels": tuple(range(1, 9))},
    2: {"fine_level": 6, "coeff_level": 4, "levels": tuple(range(1, 5))},
}

_FULL = {
    1: {"fine_level": 14, "coeff_level": 8, "levels": tuple(range(1, 13))},
    2: {"fine_level": 9, "coeff_level": 5, "levels": tuple(range(1, 8))},
}


def _preset(table: dict[int, dict[str, object]], d: int) -> ExperimentConfig:
    if d not in table:
        raise ConfigError(f"no preset for dimension {d}")
    return ExperimentConfig(
        d=d,
        gamma_min=0.5,
        gamma_max=10.0,
        generator=Generator.SOBOL,
        rhs="indicator",
        **table[d],  # type: ignore[arg-type]
    )


def desk_config(d: int) -> ExperimentConfig:
    """Scaled-down sweep that runs in minutes."""
    return _preset(_DESK, d)


def full_config(d: int) -> ExperimentConfig:
    """Full-size sweep; runs for hours."""
    return _preset(_FULL, d)


PRESETS = {
    "desk-1d": lambda: desk_config(1),
    "desk-2d": lambda: desk_config(2),
    "full-1d": lambda: full_config(1),
    "full-2d": lambda: full_config(2),
}
