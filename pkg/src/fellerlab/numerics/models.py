"""Shared value objects used across the numerical modules."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .base import ConfigError, GridError

# Ratios (-a)/h and b/h must sit this close to an integer, relative to their size.
NODE_TOLERANCE = 1e-12


def _integer_ratio(length: float, h: float, label: str) -> int:
    ratio = length / h
    nearest = round(ratio)
    if abs(ratio - nearest) > NODE_TOLERANCE * max(1.0, abs(ratio)):
        raise GridError(f"{label}/h = {ratio!r} is not an integer; 0 and the endpoints must be nodes")
    return int(nearest)


@dataclass(frozen=True)
class Grid:
    """Uniform grid over [a, b] with 0 and both endpoints as nodes.

    Half grids ([0, b]) are allowed for the odd/even block generators.
    """

    a: float
    b: float
    h: float

    def __post_init__(self) -> None:
        if not (self.a <= 0.0 < self.b):
            raise GridError(f"grid needs a <= 0 < b, got a={self.a}, b={self.b}")
        if not self.h > 0.0:
            raise GridError(f"grid step must be positive, got h={self.h}")
        _integer_ratio(-self.a, self.h, "(-a)")
        _integer_ratio(self.b, self.h, "b")

    @property
    def zero_index(self) -> int:
        return _integer_ratio(-self.a, self.h, "(-a)")

    @property
    def size(self) -> int:
        return self.zero_index + _integer_ratio(self.b, self.h, "b") + 1

    @property
    def x(self) -> np.ndarray:
        left = self.zero_index
        right = self.size - left - 1
        nodes = np.concatenate((-self.h * np.arange(left, 0, -1), self.h * np.arange(0, right + 1)))
        nodes[0] = self.a
        nodes[-1] = self.b
        return nodes

    @property
    def symmetric(self) -> bool:
        return math.isclose(-self.a, self.b, rel_tol=0.0, abs_tol=1e-12 * self.b)

    def refine(self, factor: int) -> "Grid":
        if factor < 1:
            raise GridError("refinement factor must be a positive integer")
        return Grid(self.a, self.b, self.h / factor)

    def half(self) -> "Grid":
        """The nonnegative half [0, b] with the same step."""
        return Grid(0.0, self.b, self.h)

    def function(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self, np.asarray(values, dtype=float))

    def sample(self, fn: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        values = np.broadcast_to(np.asarray(fn(self.x), dtype=float), (self.size,))
        return GridFunction(self, np.array(values, dtype=float))

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.size))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values of a continuous function at the nodes of a Grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (self.grid.size,):
            raise GridError(
                f"expected {self.grid.size} values for the grid, got shape {self.values.shape}"
            )

    @property
    def a(self) -> float:
        return self.grid.a

    @property
    def b(self) -> float:
        return self.grid.b

    @property
    def step_h(self) -> float:
        return self.grid.h

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def at_a(self) -> float:
        return float(self.values[0])

    @property
    def at_b(self) -> float:
        return float(self.values[-1])

    @property
    def at_zero(self) -> float:
        return float(self.values[self.grid.zero_index])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.grid, np.asarray(values, dtype=float))

    def downsample(self, target: Grid) -> "GridFunction":
        """Restrict to a coarser grid whose nodes are a subset of ours."""
        factor = round(target.h / self.grid.h)
        if factor < 1 or target.refine(factor).size != self.grid.size:
            raise GridError(f"grid with h={target.h} is not a coarsening of h={self.grid.h}")
        return GridFunction(target, self.values[::factor].copy())

    def interpolate(self, x: np.ndarray | float) -> np.ndarray:
        return np.interp(x, self.x, self.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return self.with_values(self.values - other.values)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return self.with_values(self.values + other.values)

    def scaled(self, factor: float) -> "GridFunction":
        return self.with_values(factor * self.values)


@dataclass(frozen=True)
class LimitParams:
    """Interval ends, interface killing mass and (optionally) the resolvent parameter."""

    a: float
    b: float
    gamma: float = 0.0
    lam: Optional[float] = None

    def __post_init__(self) -> None:
        if not (self.a < 0.0 < self.b):
            raise ConfigError(f"interval must satisfy a < 0 < b, got a={self.a}, b={self.b}")
        if self.gamma < 0.0:
            raise ConfigError(f"gamma must be nonnegative, got {self.gamma}")
        if self.lam is not None and self.lam <= 0.0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")

    @property
    def slam(self) -> float:
        if self.lam is None:
            raise ConfigError("this quantity needs lambda")
        return math.sqrt(2.0 * self.lam)

    def with_lambda(self, lam: float) -> "LimitParams":
        return LimitParams(self.a, self.b, self.gamma, lam)

    def grid(self, h: float) -> Grid:
        return Grid(self.a, self.b, h)


@dataclass(frozen=True)
class PicardTrace:
    """Iteration count and Bielecki-norm increments of one Picard solve."""

    iterations: int
    increments: tuple[float, ...]
    omega: float
    factor: float

    def ratios(self, floor: float = 0.0) -> list[float]:
        pairs = zip(self.increments, self.increments[1:])
        return [new / old for old, new in pairs if old > floor and new > floor]


@dataclass(frozen=True, eq=False)
class EigenPair:
    """The λ-eigenfunctions k (k(a)=0) and ℓ (ℓ(b)=0) with their Wronskian."""

    lam: float
    k: GridFunction
    l: GridFunction
    wronskian: float
    k_prime: GridFunction
    l_prime: GridFunction
    trace_k: Optional[PicardTrace] = field(default=None)
    trace_l: Optional[PicardTrace] = field(default=None)

    def wronskian_profile(self) -> np.ndarray:
        return self.k_prime.values * self.l.values - self.k.values * self.l_prime.values

    def wronskian_variation(self) -> float:
        """max over nodes of |k'ℓ - kℓ' - W| / |W|."""
        return float(np.max(np.abs(self.wronskian_profile() - self.wronskian)) / abs(self.wronskian))

    def endpoint_mismatch(self) -> float:
        """Relative gap between ℓ(a) and k(b)."""
        return abs(self.l.at_a - self.k.at_b) / abs(self.k.at_b)


@dataclass(frozen=True)
class BoundaryReport:
    """Deviations from the domain conditions, measured with one-sided stencils."""

    second_derivative_a: float
    second_derivative_b: float
    second_derivative_jump: float
    flux_jump_deviation: float

    def as_dict(self) -> dict[str, float]:
        return {
            "f''(a)": self.second_derivative_a,
            "f''(b)": self.second_derivative_b,
            "f''(0+)-f''(0-)": self.second_derivative_jump,
            "f'(0+)-f'(0-)-2γf(0)": self.flux_jump_deviation,
        }

    def worst(self) -> float:
        return max(self.as_dict().values())
