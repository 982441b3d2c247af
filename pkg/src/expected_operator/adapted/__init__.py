"""Coefficient-adapted localized bases and their block operators."""

from .corrector import LevelCorrector, LocalizedBasis, build_localized_basis
from .operator import BlockMat

__all__ = ["BlockMat", "LevelCorrector", "LocalizedBasis", "build_localized_basis"]
