"""Nested uniform Cartesian hierarchy on [0, 1]^d and the fine FE grid.

Cells of one level are numbered lexicographically with the first coordinate
running fastest, so that ``flat = sum(m[a] * n**a)`` with ``n = 2**level``.
"""

from __future__ import annotations

import functools
import itertools
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from ..core.errors import ConfigError, InvalidElement, ResolutionError
from ..core.models import ElementId, IntArray


def multi_indices(n: int, d: int) -> IntArray:
    """Multi-indices of an ``n**d`` tensor grid in flat order, shape (n**d, d)."""
    flat = np.arange(n**d, dtype=np.int64)
    return np.stack([(flat // n**axis) % n for axis in range(d)], axis=1)


def flatten(index: IntArray, n: int) -> IntArray:
    """Inverse of :func:`multi_indices` for arrays of shape (..., d)."""
    weights = n ** np.arange(index.shape[-1], dtype=np.int64)
    return np.asarray(index @ weights, dtype=np.int64)


@dataclass(frozen=True)
class HierGrid:
    """Dyadic hierarchy T_0, ..., T_L of [0, 1]^d with h(l) = 2**-l."""

    d: int
    L: int

    def __post_init__(self) -> None:
        if self.d not in (1, 2, 3):
            raise ConfigError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.L < 0:
            raise ConfigError(f"finest level must be >= 0, got {self.L}")

    def h(self, level: int) -> float:
        return 2.0**-level

    def n_cells(self, level: int) -> int:
        return 2 ** (self.d * level)

    def volume(self, level: int) -> float:
        return self.h(level) ** self.d

    def validate(self, elem: ElementId) -> None:
        if not 0 <= elem.level <= self.L:
            raise InvalidElement(f"level {elem.level} outside 0..{self.L}")
        if len(elem.index) != self.d:
            raise InvalidElement(f"{elem} is not a {self.d}-dimensional index")
        n = 2**elem.level
        if any(not 0 <= m < n for m in elem.index):
            raise InvalidElement(f"{elem} has an index outside 0..{n - 1}")

    def elements(self, level: int) -> Iterator[ElementId]:
        """All elements of one level in flat order."""
        for index in multi_indices(2**level, self.d):
            yield ElementId(level, tuple(int(m) for m in index))

    def flat(self, elem: ElementId) -> int:
        n = 2**elem.level
        return sum(m * n**axis for axis, m in enumerate(elem.index))

    def element(self, level: int, flat: int) -> ElementId:
        n = 2**level
        return ElementId(level, tuple((flat // n**axis) % n for axis in range(self.d)))

    def children(self, elem: ElementId) -> list[ElementId]:
        """The 2^d children of ``elem`` in lexicographic order."""
        self.validate(elem)
        if elem.level >= self.L:
            raise InvalidElement(f"{elem} lies on the finest level {self.L}")
        return [
            ElementId(
                elem.level + 1,
                tuple(2 * m + ((j >> axis) & 1) for axis, m in enumerate(elem.index)),
            )
            for j in range(2**self.d)
        ]

    def parent(self, elem: ElementId) -> ElementId:
        self.validate(elem)
        if elem.level == 0:
            raise InvalidElement(f"{elem} lies on the coarsest level")
        return ElementId(elem.level - 1, tuple(m // 2 for m in elem.index))

    def ancestor(self, elem: ElementId, level: int) -> ElementId:
        self.validate(elem)
        if level > elem.level:
            raise InvalidElement(f"level {level} is finer than {elem}")
        shift = elem.level - level
        return ElementId(level, tuple(m >> shift for m in elem.index))

    def patch(self, elem: ElementId) -> list[ElementId]:
        """Same-level elements whose closures touch the closure of ``elem``."""
        self.validate(elem)
        n = 2**elem.level
        ranges = [range(max(m - 1, 0), min(m + 2, n)) for m in elem.index]
        members = [ElementId(elem.level, index) for index in itertools.product(*ranges)]
        return sorted(members, key=self.flat)

    def patch_box(self, elem: ElementId) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Lower and upper cell corners of the patch, in units of h(level)."""
        self.validate(elem)
        n = 2**elem.level
        lower = tuple(max(m - 1, 0) for m in elem.index)
        upper = tuple(min(m + 2, n) for m in elem.index)
        return lower, upper

    def ring_region(self, elems: Iterable[ElementId], rings: int) -> set[ElementId]:
        """The ``rings``-fold patch extension of a set of same-level elements."""
        region = set(elems)
        for _ in range(rings):
            region = {member for elem in region for member in self.patch(elem)}
        return region

    def element_midpoint(self, elem: ElementId) -> tuple[float, ...]:
        self.validate(elem)
        h = self.h(elem.level)
        return tuple((m + 0.5) * h for m in elem.index)


@dataclass(frozen=True)
class FineGrid:
    """Uniform grid of width h = 2**-J carrying the d-linear FE space V_h.

    Nodes are numbered like cells (first coordinate fastest) over the
    ``(2**J + 1)**d`` tensor grid; the degrees of freedom are the interior
    nodes in the same relative order.
    """

    d: int
    J: int

    def __post_init__(self) -> None:
        if self.d not in (1, 2, 3):
            raise ConfigError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.J < 0:
            raise ConfigError(f"fine level must be >= 0, got {self.J}")

    @property
    def h(self) -> float:
        return 2.0**-self.J

    @property
    def n(self) -> int:
        """Fine elements per axis."""
        return 2**self.J

    @property
    def n_nodes(self) -> int:
        return (self.n + 1) ** self.d

    @property
    def n_dofs(self) -> int:
        return max(self.n - 1, 0) ** self.d

    @property
    def n_elements(self) -> int:
        return self.n**self.d

    def hosts(self, grid: HierGrid) -> None:
        """Check that every element of T_L is a union of fine elements."""
        if grid.d != self.d:
            raise ConfigError(f"hierarchy is {grid.d}-d, fine grid is {self.d}-d")
        if self.J < grid.L:
            raise ResolutionError(f"fine level {self.J} is coarser than L={grid.L}")

    @functools.cached_property
    def node_index(self) -> IntArray:
        """Multi-indices of all nodes, shape (n_nodes, d)."""
        return multi_indices(self.n + 1, self.d)

    @functools.cached_property
    def dof_of_node(self) -> IntArray:
        """Degree of freedom of every node, -1 on the boundary."""
        index = self.node_index
        interior = np.all((index > 0) & (index < self.n), axis=1)
        dof = np.full(self.n_nodes, -1, dtype=np.int64)
        dof[interior] = np.arange(int(interior.sum()), dtype=np.int64)
        return dof

    @functools.cached_property
    def node_of_dof(self) -> IntArray:
        return np.flatnonzero(self.dof_of_node >= 0).astype(np.int64)

    @functools.cached_property
    def element_index(self) -> IntArray:
        """Multi-indices of the fine elements, shape (n_elements, d)."""
        return multi_indices(self.n, self.d)

    @functools.cached_property
    def connectivity(self) -> IntArray:
        """Global node numbers of every fine element, shape (n_elements, 2**d).

        Local vertex ``j`` sits at offset ``(j >> a) & 1`` along axis ``a``.
        """
        offsets = np.array(
            [[(j >> axis) & 1 for axis in range(self.d)] for j in range(2**self.d)],
            dtype=np.int64,
        )
        corners = self.element_index[:, None, :] + offsets[None, :, :]
        return flatten(corners, self.n + 1)

    def element_cells(self, level: int) -> IntArray:
        """Flat index of the level-``level`` cell containing each fine element."""
        if level > self.J:
            raise ResolutionError(f"level {level} is finer than the fine grid {self.J}")
        return flatten(self.element_index >> (self.J - level), 2**level)

    def node_coordinates(self) -> np.ndarray:
        return self.node_index * self.h

    def dof_coordinates(self) -> np.ndarray:
        return self.node_coordinates()[self.node_of_dof]

    def extend(self, v: np.ndarray) -> np.ndarray:
        """Extend dof vectors (or dof-by-column arrays) by zero boundary values."""
        full = np.zeros((self.n_nodes, *v.shape[1:]), dtype=v.dtype)
        full[self.node_of_dof] = v
        return full

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return full[self.node_of_dof]

    def interpolate(self, func: Callable[..., npt.ArrayLike]) -> np.ndarray:
        """Nodal interpolant of a callable on the degrees of freedom."""
        coords = self.dof_coordinates()
        values = func(*coords.T)
        return np.asarray(np.broadcast_to(values, (self.n_dofs,)), dtype=np.float64)
