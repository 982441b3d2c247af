"""Expected Operator - sparse compression of expected solution operators."""

__version__ = "0.1.0"
__author__ = "Ronny Pfannschmidt"
__email__ = "opensource@ronnypfannschmidt.de"

from .core.models import (
    CoeffSample,
    CutoffMode,
    ElementId,
    ErrorRow,
    Generator,
    PiecewiseConstant,
    SamplePlan,
)

__all__ = [
    "CoeffSample",
    "CutoffMode",
    "ElementId",
    "ErrorRow",
    "Generator",
    "PiecewiseConstant",
    "SamplePlan",
]
