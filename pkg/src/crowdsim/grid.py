"""Uniform 1D grids, node-sampled fields, and the boundary-condition vocabulary."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np


@dataclass(frozen=True)
class Grid1D:
    """Equispaced node-centred mesh on [x_min, x_max] with n >= 3 nodes.

    Node k sits at x_min + k*h with h = (x_max - x_min)/(n - 1), evaluated
    in that exact form so tests can rely on bit-reproducible coordinates.
    """

    x_min: float
    x_max: float
    n: int

    def __post_init__(self) -> None:
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise ValueError("grid endpoints must be finite")
        if self.x_max <= self.x_min:
            raise ValueError(f"degenerate interval [{self.x_min}, {self.x_max}]")
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"need an integer node count >= 3, got {self.n}")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.n)

    @property
    def span(self) -> float:
        return self.x_max - self.x_min


def build_grid(x_min: float, x_max: float, n: int) -> Grid1D:
    """Construct a uniform grid; rejects n < 3 or a degenerate interval."""
    return Grid1D(float(x_min), float(x_max), int(n))


def _validated_values(grid: Grid1D, values, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != (grid.n,):
        raise ValueError(f"{what} needs {grid.n} node values, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        k = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise ValueError(f"{what} is not finite at node {k} (x={grid.nodes[k]:g})")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DensityField:
    """Occupancy fraction rho sampled at the grid nodes.

    Values outside [0, 1] are representable on purpose: the model reports
    breakdown (rho > 1) instead of clamping it away.
    """

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _validated_values(self.grid, self.values, "density"))

    def physically_valid(self, tol: float = 0.0) -> bool:
        return bool(np.all(self.values >= -tol) and np.all(self.values <= 1.0 + tol))

    def with_values(self, values) -> "DensityField":
        return DensityField(self.grid, values)


@dataclass(frozen=True)
class ValueField:
    """Exit-time samples u at the grid nodes."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _validated_values(self.grid, self.values, "value field"))


def sample_function(grid: Grid1D, f: Callable[[float], float], kind: str = "density"):
    """Sample f at every node into a DensityField ("density") or ValueField ("value")."""
    values = np.asarray([float(f(x)) for x in grid.nodes], dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        k = int(bad[0])
        raise ValueError(f"sampled function not finite at node {k} (x={grid.nodes[k]:g})")
    if kind == "density":
        return DensityField(grid, values)
    if kind == "value":
        return ValueField(grid, values)
    raise ValueError(f"unknown field kind {kind!r}")


def total_mass(rho: DensityField) -> float:
    """Discrete mass h * sum(rho_k).

    Uniform node weights are the functional the adjoint transport scheme
    conserves exactly with closed ends.
    """
    return rho.grid.h * float(rho.values.sum())


# Boundary conditions, one per endpoint and per unknown. Density conditions
# drive the transport closure; value conditions drive the eikonal solve.

@dataclass(frozen=True)
class DirichletDensity:
    """Prescribed rho at an endpoint; value may be a constant or a function of t."""

    value: Union[float, Callable[[float], float]]

    def at(self, t: float) -> float:
        return float(self.value(t)) if callable(self.value) else float(self.value)


@dataclass(frozen=True)
class NoFlux:
    """Closed wall for rho: zero total (advective + diffusive) normal flux."""


@dataclass(frozen=True)
class InfluxDensity:
    """Prescribed current j >= 0 entering the domain through this endpoint."""

    j: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.j) or self.j < 0:
            raise ValueError(f"influx current must be >= 0, got {self.j}")


@dataclass(frozen=True)
class DirichletValue:
    """Exit condition: u held at the given value (units of exit time)."""

    value: float


@dataclass(frozen=True)
class ReflectingValue:
    """Wall condition for u, imposed with a mirror ghost node."""


RhoCondition = Union[DirichletDensity, NoFlux, InfluxDensity]
UCondition = Union[DirichletValue, ReflectingValue]
