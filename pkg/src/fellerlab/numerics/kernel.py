"""Killing intensities c, their ε-scalings c_ε and their masses γ."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import pairwise
from typing import Any, Callable, Mapping, Protocol, Sequence

import numpy as np
from scipy.integrate import quad, simpson

from .base import ConfigError, QuadratureError, ResolutionError

log = logging.getLogger(__name__)

Profile = Callable[[np.ndarray], np.ndarray]

DEFAULT_REL_TOL = 1e-10
MAX_REFINEMENT_DEPTH = 24
MIN_REFINEMENT_DEPTH = 3
# Gaussian tails beyond this many widths are below 1e-14.
GAUSSIAN_SUPPORT_WIDTHS = 12.0
# h must not exceed this fraction of the scaled support radius.
RESOLUTION_FRACTION = 0.1


class MassSource(Protocol):
    """Anything `mass` can integrate: a profile, a support radius and breakpoints."""

    @property
    def name(self) -> str: ...

    @property
    def support_radius(self) -> float: ...

    @property
    def breakpoints(self) -> tuple[float, ...]: ...

    def profile(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class KillingKernel:
    """A nonnegative integrable intensity with cached mass γ = ∫c."""

    name: str
    profile: Profile
    support_radius: float
    breakpoints: tuple[float, ...] = ()
    mass_gamma: float = field(init=False)

    def __post_init__(self) -> None:
        if self.support_radius < 0.0:
            raise ConfigError(f"kernel {self.name!r}: support radius must be nonnegative")
        object.__setattr__(self, "mass_gamma", mass(self))

    def __call__(self, x: np.ndarray | float) -> np.ndarray:
        return np.asarray(self.profile(np.asarray(x, dtype=float)), dtype=float)

    def scaled(self, epsilon: float) -> "ScaledKernel":
        return ScaledKernel(self, epsilon)


@dataclass(frozen=True, eq=False)
class ScaledKernel:
    """c_ε(x) = ε⁻¹ c(ε⁻¹ x); its mass equals that of the base kernel."""

    base: KillingKernel
    epsilon: float

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must lie in (0, 1], got {self.epsilon}")

    def __call__(self, x: np.ndarray | float) -> np.ndarray:
        return self.base(np.asarray(x, dtype=float) / self.epsilon) / self.epsilon

    def profile(self, x: np.ndarray) -> np.ndarray:
        return self(x)

    @property
    def name(self) -> str:
        return f"{self.base.name}@eps={self.epsilon:g}"

    @property
    def gamma(self) -> float:
        return self.base.mass_gamma

    @property
    def support_radius(self) -> float:
        return self.epsilon * self.base.support_radius

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(self.epsilon * p for p in self.base.breakpoints)

    def required_step(self) -> float:
        """Largest grid step that resolves c_ε."""
        if self.gamma == 0.0:
            return math.inf
        return RESOLUTION_FRACTION * self.support_radius


def check_resolution(kernel: ScaledKernel, h: float) -> None:
    required = kernel.required_step()
    if h > required * (1.0 + 1e-12):
        raise ResolutionError(
            f"grid step h={h:g} does not resolve {kernel.name}; requires h <= {required:g}"
        )


def resolving_step(kernel: ScaledKernel, h: float) -> float:
    """h divided by the smallest integer that makes it resolve `kernel`."""
    return h / max(1, math.ceil(h / kernel.required_step() - 1e-9))


def scaled_eval(kernel: ScaledKernel, x: np.ndarray | float) -> np.ndarray | float:
    value = kernel(x)
    return float(value) if np.ndim(value) == 0 else value


# ---------------------------------------------------------------------------
# Quadrature

def _segment_simpson(profile: Profile, lo: float, hi: float, panels: int) -> float:
    x = np.linspace(lo, hi, panels + 1)
    # One-sided limits at the segment ends so jump discontinuities integrate cleanly.
    x[0] = np.nextafter(lo, hi)
    x[-1] = np.nextafter(hi, lo)
    y = np.asarray(profile(x), dtype=float)
    return float(simpson(y, x=np.linspace(lo, hi, panels + 1)))


def mass(kernel: MassSource, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """∫c by composite Simpson, doubling panels until successive totals agree."""
    if not 0.0 < rel_tol <= 1e-4:
        raise ValueError(f"rel_tol must lie in (0, 1e-4], got {rel_tol}")

    radius = kernel.support_radius
    if radius == 0.0:
        return 0.0
    if math.isinf(radius):
        value, _ = quad(lambda x: float(kernel.profile(np.asarray([x]))[0]), -math.inf, math.inf,
                        epsabs=0.0, epsrel=rel_tol, limit=500)
        return float(value)

    inner = (p for p in kernel.breakpoints if -radius < p < radius)
    edges = sorted({-radius, radius, *inner})
    panels = 2
    previous: float | None = None
    for depth in range(MAX_REFINEMENT_DEPTH):
        total = math.fsum(_segment_simpson(kernel.profile, lo, hi, panels) for lo, hi in pairwise(edges))
        if (
            previous is not None
            and depth >= MIN_REFINEMENT_DEPTH
            and abs(total - previous) <= rel_tol * abs(total)
        ):
            log.debug("mass of %s = %.15g after %d doublings", kernel.name, total, depth)
            return total
        previous = total
        panels *= 2
    raise QuadratureError(
        f"quadrature for kernel {kernel.name!r} did not converge to rel_tol={rel_tol:g} "
        f"after {MAX_REFINEMENT_DEPTH} refinements"
    )


# ---------------------------------------------------------------------------
# Built-in kernels

def box_kernel(height: float = 1.0, half_width: float = 1.0) -> KillingKernel:
    """Constant `height` on (-w, w); the two jump points take the mid-value."""
    if height < 0.0 or half_width <= 0.0:
        raise ConfigError("box kernel needs height >= 0 and half_width > 0")

    def profile(x: np.ndarray) -> np.ndarray:
        ax = np.abs(x)
        return np.where(ax < half_width, height, np.where(ax == half_width, 0.5 * height, 0.0))

    return KillingKernel("box", profile, half_width, (-half_width, half_width))


def triangle_kernel(height: float = 1.0, half_width: float = 1.0) -> KillingKernel:
    if height < 0.0 or half_width <= 0.0:
        raise ConfigError("triangle kernel needs height >= 0 and half_width > 0")

    def profile(x: np.ndarray) -> np.ndarray:
        return height * np.maximum(0.0, 1.0 - np.abs(x) / half_width)

    return KillingKernel("triangle", profile, half_width, (-half_width, 0.0, half_width))


def gaussian_kernel(height: float = 1.0, width: float = 1.0) -> KillingKernel:
    """height · exp(-x²/(2 width²)), truncated at 12 widths."""
    if height < 0.0 or width <= 0.0:
        raise ConfigError("gaussian kernel needs height >= 0 and width > 0")
    radius = GAUSSIAN_SUPPORT_WIDTHS * width

    def profile(x: np.ndarray) -> np.ndarray:
        return np.where(np.abs(x) <= radius, height * np.exp(-0.5 * (x / width) ** 2), 0.0)

    return KillingKernel("gaussian", profile, radius, (-radius, 0.0, radius))


def table_kernel(xs: Sequence[float], values: Sequence[float]) -> KillingKernel:
    """Linear interpolation of tabulated samples, zero outside the table."""
    nodes = np.asarray(xs, dtype=float)
    samples = np.asarray(values, dtype=float)
    if nodes.ndim != 1 or nodes.shape != samples.shape or nodes.size < 2:
        raise ConfigError("table kernel needs matching 1-D 'x' and 'c' arrays of length >= 2")
    if np.any(np.diff(nodes) <= 0.0):
        raise ConfigError("table kernel abscissae must be strictly increasing")
    if np.any(samples < 0.0):
        raise ConfigError("table kernel values must be nonnegative")

    def profile(x: np.ndarray) -> np.ndarray:
        return np.interp(x, nodes, samples, left=0.0, right=0.0)

    radius = float(max(abs(nodes[0]), abs(nodes[-1])))
    return KillingKernel("table", profile, radius, tuple(float(p) for p in nodes))


def zero_kernel() -> KillingKernel:
    """No killing at all (γ = 0)."""
    return KillingKernel("zero", lambda x: np.zeros_like(np.asarray(x, dtype=float)), 0.0)


_BUILDERS: dict[str, Callable[..., KillingKernel]] = {
    "box": box_kernel,
    "triangle": triangle_kernel,
    "gaussian": gaussian_kernel,
    "zero": zero_kernel,
}


def kernel_from_spec(spec: Mapping[str, Any]) -> KillingKernel:
    """Build a kernel from `{"kind": ..., "params": {...}}`."""
    kind = str(spec.get("kind", "")).lower()
    params = dict(spec.get("params") or {})
    if kind == "table":
        try:
            return table_kernel(params["x"], params["c"])
        except KeyError as exc:
            raise ConfigError(f"table kernel is missing parameter {exc.args[0]!r}") from None
    builder = _BUILDERS.get(kind)
    if builder is None:
        raise ConfigError(f"unknown kernel kind {kind!r}; expected box, triangle, gaussian, table or zero")
    try:
        return builder(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {kind} kernel: {exc}") from None
