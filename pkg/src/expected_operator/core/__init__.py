"""Core module for Expected Operator."""

from .errors import ExpectedOperatorError
from .models import (
    CoeffSample,
    CutoffMode,
    ElementId,
    ErrorRow,
    Generator,
    PiecewiseConstant,
    SamplePlan,
)

__all__ = [
    "ExpectedOperatorError",
    "CoeffSample",
    "CutoffMode",
    "ElementId",
    "ErrorRow",
    "Generator",
    "PiecewiseConstant",
    "SamplePlan",
]
