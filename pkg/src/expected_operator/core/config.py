"""Experiment configuration: JSON files overridden by command-line flags."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .models import CutoffMode, Generator, SamplePlan

RHS_KINDS = ("indicator", "one")

# Stream 0 drives the compression, stream 1 the reference solutions.
COMPRESSION_STREAM = 0
REFERENCE_STREAM = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one error-versus-nnz sweep depends on."""

    d: int = 1
    levels: tuple[int, ...] = (1, 2, 3, 4)
    fine_level: int = 10
    coeff_level: int = 6
    gamma_min: float = 0.5
    gamma_max: float = 10.0
    generator: Generator = Generator.MC
    seed: int = 0
    skip: int = 0
    samples: int | None = None
    reference_samples: int | None = None
    cutoff: CutoffMode = CutoffMode.STANDARD
    iterations: int | None = None
    rhs: str = "indicator"
    gradient: bool = False
    workers: int = 1
    solver_tol: float = 1e-10
    max_condition: float = 100.0
    record_timing: bool = True
    output_csv: Path | None = None
    operator_dir: Path | None = None

    def __post_init__(self) -> None:
        if self.d not in (1, 2, 3):
            raise ConfigError(f"dimension must be 1, 2 or 3, got {self.d}")
        if not self.levels or min(self.levels) < 0:
            raise ConfigError(
                f"levels must be a non-empty list of L >= 0, got {self.levels}"
            )
        top = max(self.levels)
        if self.fine_level < max(top, self.coeff_level):
            raise ConfigError(
                f"fine level {self.fine_level} must be >= max(L={top}, "
                f"E={self.coeff_level})"
            )
        if self.fine_level <= top:
            raise ConfigError(
                f"fine level {self.fine_level} must exceed L={top} to host bubbles"
            )
        if self.coeff_level < 0:
            raise ConfigError(f"negative coefficient level {self.coeff_level}")
        if not 0 < self.gamma_min <= self.gamma_max:
            raise ConfigError(
                f"need 0 < gamma_min <= gamma_max, got "
                f"[{self.gamma_min}, {self.gamma_max}]"
            )
        for name in ("samples", "reference_samples"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.iterations is not None and self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")
        if self.rhs not in RHS_KINDS:
            raise ConfigError(f"rhs must be one of {RHS_KINDS}, got {self.rhs!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.solver_tol <= 0:
            raise ConfigError(f"solver_tol must be positive, got {self.solver_tol}")

    def samples_for(self, L: int) -> int:
        """M_L, 2**L unless fixed."""
        return self.samples if self.samples is not None else 2**L

    def iterations_for(self, L: int) -> int:
        return self.iterations if self.iterations is not None else math.ceil(L / 2)

    @property
    def reference_count(self) -> int:
        """M_h, 2**J unless fixed."""
        if self.reference_samples is not None:
            return self.reference_samples
        return 2**self.fine_level

    def plan_for(self, L: int) -> SamplePlan:
        return self._plan(self.samples_for(L), COMPRESSION_STREAM)

    def reference_plan(self) -> SamplePlan:
        return self._plan(self.reference_count, REFERENCE_STREAM)

    def _plan(self, samples: int, stream: int) -> SamplePlan:
        return SamplePlan(
            d=self.d,
            eps_level=self.coeff_level,
            samples=samples,
            gamma_min=self.gamma_min,
            gamma_max=self.gamma_max,
            generator=self.generator,
            seed=self.seed,
            skip=self.skip,
            stream=stream,
        )

    def with_overrides(self, **overrides: Any) -> ExperimentConfig:
        """Copy with the given fields replaced; ``None`` values are ignored."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown configuration fields: {sorted(unknown)}")
        return replace(self, **_coerce(changes))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown configuration fields: {sorted(unknown)}")
        return cls(**_coerce(data))

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["levels"] = list(self.levels)
        data["generator"] = self.generator.value
        data["cutoff"] = self.cutoff.value
        for name in ("output_csv", "operator_dir"):
            if data[name] is not None:
                data[name] = str(data[name])
        return data


def _coerce(data: dict[str, Any]) -> dict[str, Any]:
    """Turn JSON/CLI values into the field types."""
    out = dict(data)
    try:
        if "levels" in out and out["levels"] is not None:
            levels = out["levels"]
            out["levels"] = (levels,) if isinstance(levels, int) else tuple(levels)
        if isinstance(out.get("generator"), str):
            out["generator"] = Generator(out["generator"])
        if isinstance(out.get("cutoff"), str):
            out["cutoff"] = CutoffMode(out["cutoff"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for name in ("output_csv", "operator_dir"):
        if isinstance(out.get(name), str):
            out[name] = Path(out[name])
    return out


def load_config(path: Path) -> ExperimentConfig:
    """Read an :class:`ExperimentConfig` from a JSON object."""
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"configuration {path} must hold a JSON object")
    return ExperimentConfig.from_dict(data)
