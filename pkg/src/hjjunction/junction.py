"""Junction geometry: N half-lines glued at a single origin, grids and fields on it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class JunctionError(ValueError):
    """Invalid junction, point or grid description."""


class DataError(ValueError):
    """Non-finite or otherwise unusable numerical data."""


@dataclass(frozen=True)
class Junction:
    num_branches: int

    def __post_init__(self):
        if int(self.num_branches) != self.num_branches or self.num_branches < 1:
            raise JunctionError(f"need at least one branch, got {self.num_branches!r}")

    @property
    def branch_labels(self) -> range:
        return range(1, self.num_branches + 1)


@dataclass(frozen=True)
class JunctionPoint:
    """A point ``coordinate`` away from the origin on branch ``branch`` (1-based)."""

    junction: Junction
    branch: int
    coordinate: float

    def __post_init__(self):
        if self.branch not in self.junction.branch_labels:
            raise JunctionError(f"branch {self.branch} not in 1..{self.junction.num_branches}")
        if not self.coordinate >= 0.0:
            raise JunctionError(f"coordinate must be >= 0, got {self.coordinate!r}")

    @property
    def is_origin(self) -> bool:
        return self.coordinate == 0.0


def geodesic_distance(x: JunctionPoint, y: JunctionPoint) -> float:
    if x.junction != y.junction:
        raise JunctionError("points live on different junctions")
    if x.branch == y.branch:
        return abs(x.coordinate - y.coordinate)
    return x.coordinate + y.coordinate


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``x_i = i * dx``, ``i = 0..imax`` on every branch.

    Node ``(alpha, 0)`` is the same point for every branch.
    """

    junction: Junction
    dx: float
    imax: int

    def __post_init__(self):
        if not (self.dx > 0.0 and math.isfinite(self.dx)):
            raise JunctionError(f"dx must be positive, got {self.dx!r}")
        if self.imax < 1:
            raise JunctionError("need at least one node per branch besides the origin")

    @classmethod
    def covering(cls, junction: Junction, dx: float, length: float) -> "Grid":
        """Smallest grid whose branches reach ``length``."""
        imax = max(1, int(math.ceil(length / dx - 1e-9)))
        return cls(junction, dx, imax)

    @property
    def num_branches(self) -> int:
        return self.junction.num_branches

    @property
    def nodes_per_branch(self) -> int:
        return self.imax + 1

    @property
    def length(self) -> float:
        return self.imax * self.dx

    @property
    def coords(self) -> np.ndarray:
        return self.dx * np.arange(self.imax + 1)


@dataclass
class GridField:
    """Values on a grid: one shared origin value plus ``(N, imax)`` branch values.

    ``branch_values[a, i - 1]`` holds node ``i`` of branch ``a + 1``.
    """

    grid: Grid
    origin_value: float
    branch_values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.origin_value = float(self.origin_value)
        self.branch_values = np.asarray(self.branch_values, dtype=float)
        shape = (self.grid.num_branches, self.grid.imax)
        if self.branch_values.shape != shape:
            raise JunctionError(f"branch values have shape {self.branch_values.shape}, expected {shape}")

    @classmethod
    def zeros(cls, grid: Grid) -> "GridField":
        return cls(grid, 0.0, np.zeros((grid.num_branches, grid.imax)))

    @classmethod
    def from_full(cls, grid: Grid, full: np.ndarray) -> "GridField":
        """Build from an ``(N, imax + 1)`` array; column 0 must agree across branches."""
        full = np.asarray(full, dtype=float)
        if np.any(full[:, 0] != full[0, 0]):
            raise JunctionError("origin column differs between branches")
        return cls(grid, full[0, 0], full[:, 1:].copy())

    def __getitem__(self, node: tuple[int, int]) -> float:
        branch, i = node
        self._check(branch, i)
        if i == 0:
            return self.origin_value
        return float(self.branch_values[branch - 1, i - 1])

    def __setitem__(self, node: tuple[int, int], value: float) -> None:
        branch, i = node
        self._check(branch, i)
        if i == 0:
            self.origin_value = float(value)
        else:
            self.branch_values[branch - 1, i - 1] = value

    def _check(self, branch: int, i: int) -> None:
        if branch not in self.grid.junction.branch_labels or not 0 <= i <= self.grid.imax:
            raise JunctionError(f"node ({branch}, {i}) outside the grid")

    def full(self) -> np.ndarray:
        """``(N, imax + 1)`` array with the origin value repeated in column 0."""
        out = np.empty((self.grid.num_branches, self.grid.imax + 1))
        out[:, 0] = self.origin_value
        out[:, 1:] = self.branch_values
        return out

    def copy(self) -> "GridField":
        return GridField(self.grid, self.origin_value, self.branch_values.copy())

    def __add__(self, c: float) -> "GridField":
        return GridField(self.grid, self.origin_value + c, self.branch_values + c)


def sample_initial(grid: Grid, u0: Callable[[int, np.ndarray], np.ndarray]) -> GridField:
    """Sample ``u0(branch, x)`` at every node.

    ``u0`` receives a 1-based branch label and an array of coordinates and
    must return the same value at ``x = 0`` for every branch.
    """
    xs = grid.coords
    full = np.empty((grid.num_branches, grid.imax + 1))
    for a in range(grid.num_branches):
        full[a] = np.broadcast_to(np.asarray(u0(a + 1, xs), dtype=float), xs.shape)
    if not np.all(np.isfinite(full)):
        bad = np.argwhere(~np.isfinite(full))[0]
        raise DataError(f"initial datum is not finite at branch {bad[0] + 1}, node {bad[1]}")
    if np.any(full[:, 0] != full[0, 0]):
        raise DataError("initial datum is not single-valued at the origin")
    return GridField.from_full(grid, full)
