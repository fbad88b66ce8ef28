"""Picard iteration for k_ε and ℓ_ε in Bielecki-weighted norms."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from .base import ConfigError, ContractionError, InconsistentEigenpairError, NumericalCheckError
from .kernel import ScaledKernel, check_resolution, resolving_step
from .models import EigenPair, Grid, GridFunction, LimitParams, PicardTrace

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
ITERATION_CAP = 200
WRONSKIAN_REL_TOL = 1e-4
# Offset, in grid steps, at which one-sided kernel limits are sampled.
JUMP_OFFSET = 1e-6

Step = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


class Anchor(str, Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class BieleckiNorm:
    """‖f‖_ω with weight e^{-ω(x-a)} (left) or e^{ω(x-b)} (right)."""

    omega: float
    anchor: Anchor = Anchor.LEFT

    def weights(self, grid: Grid) -> np.ndarray:
        if self.anchor is Anchor.LEFT:
            return np.exp(-self.omega * (grid.x - grid.a))
        return np.exp(self.omega * (grid.x - grid.b))


def bielecki_norm(f: GridFunction, norm: BieleckiNorm) -> float:
    return float(np.max(norm.weights(f.grid) * np.abs(f.values)))


def choose_omega(lam: float, gamma: float) -> tuple[float, float]:
    """ω making the contraction factor 2(λ/ω² + γ/ω) at most 3/8, independent of ε."""
    if lam <= 0.0 or gamma < 0.0:
        raise ConfigError(f"need lambda > 0 and gamma >= 0, got {lam}, {gamma}")
    omega = max(4.0 * math.sqrt(lam), 8.0 * gamma, 1.0)
    return omega, 2.0 * (lam / omega**2 + gamma / omega)


# ---------------------------------------------------------------------------
# Nested trapezoid sums

def _from_left(values: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """(∫_a^x v, ∫_a^x ∫_a^y v)."""
    inner = cumulative_trapezoid(values, dx=h, initial=0.0)
    return inner, cumulative_trapezoid(inner, dx=h, initial=0.0)


def _from_right(values: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """(∫_x^b v, ∫_x^b ∫_y^b v)."""
    inner = cumulative_trapezoid(values[::-1], dx=h, initial=0.0)
    outer = cumulative_trapezoid(inner, dx=h, initial=0.0)
    return inner[::-1], outer[::-1]


def apply_T(f: GridFunction, kernel: ScaledKernel, lam: float) -> GridFunction:
    check_resolution(kernel, f.step_h)
    q = lam + kernel(f.x)
    _, outer = _from_left(q * f.values, f.step_h)
    return f.with_values(f.x - f.a + 2.0 * outer)


def apply_S(f: GridFunction, kernel: ScaledKernel, lam: float) -> GridFunction:
    check_resolution(kernel, f.step_h)
    q = lam + kernel(f.x)
    _, outer = _from_right(q * f.values, f.step_h)
    return f.with_values(f.b - f.x + 2.0 * outer)


def apply_T_limit(f: GridFunction, lam: float, gamma: float) -> GridFunction:
    """x - a + 2λ∫∫f + 2γ f(0) x [x ≥ 0]."""
    x = f.x
    _, outer = _from_left(lam * f.values, f.step_h)
    return f.with_values(x - f.a + 2.0 * outer + 2.0 * gamma * f.at_zero * np.where(x >= 0.0, x, 0.0))


def apply_S_limit(f: GridFunction, lam: float, gamma: float) -> GridFunction:
    """b - x + 2λ∫∫f - 2γ f(0) x [x ≤ 0]."""
    x = f.x
    _, outer = _from_right(lam * f.values, f.step_h)
    return f.with_values(f.b - x + 2.0 * outer - 2.0 * gamma * f.at_zero * np.where(x <= 0.0, x, 0.0))


# ---------------------------------------------------------------------------
# Fixed points

def _iterate(
    grid: Grid,
    step: Step,
    start: np.ndarray,
    norm: BieleckiNorm,
    factor: float,
    tol: float,
) -> tuple[np.ndarray, np.ndarray, PicardTrace]:
    weights = norm.weights(grid)
    current = start
    increments: list[float] = []
    for iteration in range(1, ITERATION_CAP + 1):
        updated, _ = step(current)
        delta = np.abs(updated - current)
        increments.append(float(np.max(weights * delta)))
        current = updated
        # The weighted norm can hide the right end under e^{-ω(b-a)}; require the plain increment too.
        if increments[-1] < tol and np.max(delta) <= tol * max(1.0, float(np.max(np.abs(current)))):
            _, derivative = step(current)
            trace = PicardTrace(iteration, tuple(increments), norm.omega, factor)
            log.debug("picard %s converged in %d iterations", norm.anchor.value, iteration)
            return current, derivative, trace

    ratio = increments[-1] / increments[-2] if len(increments) > 1 and increments[-2] > 0 else math.nan
    raise ContractionError(
        f"Picard iteration ({norm.anchor.value}) missed tol={tol:g} after {ITERATION_CAP} iterations; "
        f"observed increment ratio {ratio:.4g} (bound {factor:.4g})"
    )


def _fine_grid(grid: Grid, kernel: ScaledKernel) -> tuple[Grid, int]:
    factor = round(grid.h / resolving_step(kernel, grid.h))
    return grid.refine(factor), factor


def _check_tol(tol: float, lam: float) -> None:
    if not 0.0 < tol <= 1e-4:
        raise ValueError(f"tol must lie in (0, 1e-4], got {tol}")
    if lam <= 0.0:
        raise ConfigError(f"lambda must be positive, got {lam}")


def _assemble_pair(
    lam: float,
    grid: Grid,
    fine: Grid,
    k: tuple[np.ndarray, np.ndarray, PicardTrace],
    l: tuple[np.ndarray, np.ndarray, PicardTrace],
) -> EigenPair:
    k_values, k_prime, trace_k = k
    l_values, l_prime, trace_l = l
    # k(a) = 0 and k'(a) = 1, so the Wronskian is ℓ(a).
    pair = EigenPair(
        lam=lam,
        k=GridFunction(fine, k_values).downsample(grid),
        l=GridFunction(fine, l_values).downsample(grid),
        wronskian=float(l_values[0]),
        k_prime=GridFunction(fine, k_prime).downsample(grid),
        l_prime=GridFunction(fine, l_prime).downsample(grid),
        trace_k=trace_k,
        trace_l=trace_l,
    )
    if pair.endpoint_mismatch() > WRONSKIAN_REL_TOL or pair.wronskian_variation() > WRONSKIAN_REL_TOL:
        raise InconsistentEigenpairError(
            f"Wronskian not constant: ℓ(a)={pair.l.at_a:.12g}, k(b)={pair.k.at_b:.12g}, "
            f"variation {pair.wronskian_variation():.3g}"
        )
    return pair


def _verify_start(values: np.ndarray, h: float) -> None:
    """k(a) = 0 and a second-order one-sided k'(a) close to 1."""
    slope = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
    if values[0] != 0.0 or abs(slope - 1.0) > 10.0 * h:
        raise NumericalCheckError(f"initial conditions violated: k(a)={values[0]:.3g}, k'(a)≈{slope:.6g}")


def solve_pair(kernel: ScaledKernel, lam: float, grid: Grid, tol: float = DEFAULT_TOL) -> EigenPair:
    """Fixed points k_ε = T_ε k_ε and ℓ_ε = S_ε ℓ_ε, solved on a grid fine enough for c_ε."""
    _check_tol(tol, lam)
    fine, _ = _fine_grid(grid, kernel)
    x, h = fine.x, fine.h
    q = lam + kernel(x)
    # At a jump node the trapezoid sum carries the mid-value; the derivative needs the one-sided limit.
    from_below = 0.5 * h * (q - lam - kernel(x - JUMP_OFFSET * h))
    from_above = 0.5 * h * (q - lam - kernel(x + JUMP_OFFSET * h))
    omega, factor = choose_omega(lam, kernel.gamma)

    def step_k(current: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        inner, outer = _from_left(q * current, h)
        return x - fine.a + 2.0 * outer, 1.0 + 2.0 * (inner - from_below * current)

    def step_l(current: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        inner, outer = _from_right(q * current, h)
        return fine.b - x + 2.0 * outer, -1.0 - 2.0 * (inner - from_above * current)

    k = _iterate(fine, step_k, x - fine.a, BieleckiNorm(omega, Anchor.LEFT), factor, tol)
    l = _iterate(fine, step_l, fine.b - x, BieleckiNorm(omega, Anchor.RIGHT), factor, tol)

    _verify_start(k[0], h)
    residual = float(np.max(np.abs(step_k(k[0])[0] - k[0])))
    if residual > 10.0 * tol * math.exp(min(omega * (fine.b - fine.a), 700.0)):
        raise NumericalCheckError(f"fixed-point residual {residual:.3g} too large")
    return _assemble_pair(lam, grid, fine, k, l)


def solve_limit_pair(params: LimitParams, grid: Grid, tol: float = DEFAULT_TOL) -> EigenPair:
    """Fixed points of the limit operators; they converge to the closed-form k and ℓ."""
    lam = params.lam if params.lam is not None else 0.0
    _check_tol(tol, lam)
    x, h, zero = grid.x, grid.h, grid.zero_index
    gamma = params.gamma
    right = np.where(x >= 0.0, 1.0, 0.0)
    left = np.where(x <= 0.0, 1.0, 0.0)
    omega, factor = choose_omega(lam, gamma)

    def step_k(current: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        inner, outer = _from_left(lam * current, h)
        jump = 2.0 * gamma * current[zero]
        return x - grid.a + 2.0 * outer + jump * x * right, 1.0 + 2.0 * inner + jump * right

    def step_l(current: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        inner, outer = _from_right(lam * current, h)
        jump = 2.0 * gamma * current[zero]
        return grid.b - x + 2.0 * outer - jump * x * left, -1.0 - 2.0 * inner - jump * left

    k = _iterate(grid, step_k, x - grid.a, BieleckiNorm(omega, Anchor.LEFT), factor, tol)
    l = _iterate(grid, step_l, grid.b - x, BieleckiNorm(omega, Anchor.RIGHT), factor, tol)
    return EigenPair(
        lam=lam,
        k=GridFunction(grid, k[0]),
        l=GridFunction(grid, l[0]),
        wronskian=float(l[0][0]),
        k_prime=GridFunction(grid, k[1]),
        l_prime=GridFunction(grid, l[1]),
        trace_k=k[2],
        trace_l=l[2],
    )


def measure_contraction(
    kernel: ScaledKernel,
    lam: float,
    grid: Grid,
    f: Optional[GridFunction] = None,
    g: Optional[GridFunction] = None,
    seed: int = 0,
) -> float:
    """Observed ‖Tf - Tg‖_ω / ‖f - g‖_ω (and the S analogue); the larger of the two."""
    if f is None or g is None:
        rng = np.random.default_rng(seed)
        f = grid.function(rng.uniform(-1.0, 1.0, grid.size))
        g = grid.function(rng.uniform(-1.0, 1.0, grid.size))
    omega, _ = choose_omega(lam, kernel.gamma)
    ratios = []
    for anchor, operator in ((Anchor.LEFT, apply_T), (Anchor.RIGHT, apply_S)):
        norm = BieleckiNorm(omega, anchor)
        before = bielecki_norm(f - g, norm)
        if before == 0.0:
            return 0.0
        after = bielecki_norm(operator(f, kernel, lam) - operator(g, kernel, lam), norm)
        ratios.append(after / before)
    return max(ratios)


def _shoot(kernel: ScaledKernel, lam: float, x: np.ndarray, start: float, end: float,
           initial: list[float], max_step: float) -> np.ndarray:
    """Values at `x` (ordered from `start` to `end`), restarting DOP853 at each kernel breakpoint."""
    inside = sorted({p for p in kernel.breakpoints if min(start, end) < p < max(start, end)},
                    reverse=end < start)
    edges = [start, *inside, end]
    state = np.asarray(initial, dtype=float)
    values = np.empty(x.size)
    done = 0
    for lo, hi in zip(edges, edges[1:]):
        # One-sided kernel values so a jump at the segment end is never sampled.
        near, far = np.nextafter(lo, hi), np.nextafter(hi, lo)
        low, high = min(near, far), max(near, far)

        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            return np.array([y[1], 2.0 * (lam + float(kernel(min(max(t, low), high)))) * y[0]])

        last = hi == end
        count = x.size - done if last else int(np.count_nonzero((x[done:] - hi) * (hi - lo) < 0.0))
        targets = x[done:done + count]
        solution = solve_ivp(rhs, (lo, hi), state, t_eval=targets if last else np.append(targets, hi),
                             method="DOP853", rtol=1e-12, atol=1e-14, max_step=max_step)
        if not solution.success:
            raise NumericalCheckError(f"shooting oracle failed on [{lo:g}, {hi:g}]: {solution.message}")
        values[done:done + count] = solution.y[0][:count]
        state = solution.y[:, -1]
        done += count
    return values


def shooting_pair(kernel: ScaledKernel, lam: float, grid: Grid) -> tuple[GridFunction, GridFunction]:
    """Independent ODE oracle for k'' = 2(λ + c_ε)k and ℓ'' = 2(λ + c_ε)ℓ."""
    x = grid.x
    max_step = min((grid.b - grid.a) / 200.0, kernel.support_radius / 40.0 if kernel.gamma > 0 else math.inf)
    k = _shoot(kernel, lam, x, grid.a, grid.b, [0.0, 1.0], max_step)
    l = _shoot(kernel, lam, x[::-1], grid.b, grid.a, [0.0, -1.0], max_step)
    return grid.function(k), grid.function(l[::-1])
