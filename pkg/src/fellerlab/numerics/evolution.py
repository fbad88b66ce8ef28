"""Discretised generators, semigroup evolution, the projection P and the odd/even blocks."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import expm, solve_banded

from .base import ConfigError, FitRejectedError, GridError, NumericalCheckError, UnsupportedError
from .closedform import k1, k2, k_star, l_star
from .kernel import ScaledKernel, check_resolution
from .models import Grid, GridFunction, LimitParams

log = logging.getLogger(__name__)

DENSE_NODE_LIMIT = 2000
# The first steps are backward-Euler half steps (Rannacher start) to damp data outside the domain.
STARTUP_STEPS = 2
RECONSTRUCTION_TOL = 1e-14
DECAY_WINDOW = (1.0, 6.0)


class GeneratorKind(str, Enum):
    A_EPS = "A_eps"
    A_LIMIT = "A_limit"
    B_DIRICHLET = "B_dirichlet"
    G1 = "G1"
    G2 = "G2"


class Scheme(str, Enum):
    CRANK_NICOLSON = "crank_nicolson"
    DENSE_EXPONENTIAL = "dense_exponential"


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Tridiagonal generator acting on the `free` nodes; eliminated nodes stay at 0."""

    kind: GeneratorKind
    grid: Grid
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    free: np.ndarray
    epsilon: Optional[float] = None
    gamma: float = 0.0

    @property
    def size(self) -> int:
        return int(self.diag.size)

    @property
    def stopped(self) -> np.ndarray:
        """Reduced indices whose row is identically zero; those values never change."""
        off_left = np.concatenate([[0.0], self.lower])
        off_right = np.concatenate([self.upper, [0.0]])
        return np.flatnonzero((self.diag == 0.0) & (off_left == 0.0) & (off_right == 0.0))

    def to_sparse(self) -> sparse.csr_matrix:
        return sparse.diags([self.lower, self.diag, self.upper], [-1, 0, 1], format="csr")

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def restrict(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float)[self.free]

    def extend(self, reduced: np.ndarray) -> np.ndarray:
        full = np.zeros(self.grid.size)
        full[self.free] = reduced
        return full

    def apply(self, f: GridFunction) -> GridFunction:
        return f.with_values(self.extend(self.to_sparse() @ self.restrict(f.values)))

    def implicit_band(self, shift: float, scale: float) -> np.ndarray:
        """Banded storage of shift·I - scale·M for solve_banded."""
        ab = np.zeros((3, self.size))
        ab[0, 1:] = -scale * self.upper
        ab[1] = shift - scale * self.diag
        ab[2, :-1] = -scale * self.lower
        return ab

    def solve_shifted(self, lam: float, g: GridFunction) -> GridFunction:
        """(λI - M)⁻¹ g."""
        solution = solve_banded((1, 1), self.implicit_band(lam, 1.0), self.restrict(g.values))
        return g.with_values(self.extend(solution))


def dirichlet_rate(a: float, b: float) -> float:
    """Principal decay rate π²/(2(b-a)²) of ½ d²/dx² killed at both ends."""
    return math.pi**2 / (2.0 * (b - a) ** 2)


def discretize(
    kind: GeneratorKind,
    grid: Grid,
    kernel: Optional[ScaledKernel] = None,
    gamma: float = 0.0,
) -> GeneratorMatrix:
    kind = GeneratorKind(kind)
    h, n = grid.h, grid.size
    off = 1.0 / (2.0 * h**2)
    lower = np.full(n - 1, off)
    upper = np.full(n - 1, off)
    diag = np.full(n, -2.0 * off)
    free = np.arange(n)
    epsilon = None

    if kind in (GeneratorKind.G1, GeneratorKind.G2):
        if grid.a != 0.0:
            raise GridError(f"{kind.value} lives on a half grid [0, b]")
    elif grid.a >= 0.0:
        raise GridError(f"{kind.value} needs 0 as an interior node")

    if kind is GeneratorKind.A_EPS:
        if kernel is None:
            raise ConfigError("A_eps needs a scaled kernel")
        check_resolution(kernel, h)
        potential = kernel(grid.x)
        diag -= potential
        upper[0] = lower[-1] = 0.0
        # Stopped at the ends, still exposed to c_ε there.
        diag[0], diag[-1] = -potential[0], -potential[-1]
        epsilon, gamma = kernel.epsilon, kernel.gamma
    elif kind is GeneratorKind.A_LIMIT:
        upper[0] = lower[-1] = 0.0
        diag[0] = diag[-1] = 0.0
        # Lumped delta: f(h) + f(-h) = (2 + 2hγ) f(0) + h² f''(0) + O(h³).
        diag[grid.zero_index] = -(1.0 / h**2 + gamma / h)
    elif kind is GeneratorKind.B_DIRICHLET:
        lower, diag, upper = lower[1:-1], diag[1:-1], upper[1:-1]
        free = np.arange(1, n - 1)
    elif kind is GeneratorKind.G1:
        lower[-1] = 0.0
        diag[-1] = 0.0
        lower, diag, upper = lower[1:], diag[1:], upper[1:]
        free = np.arange(1, n)
    elif kind is GeneratorKind.G2:
        lower[-1] = 0.0
        diag[-1] = 0.0
        # Ghost node from f'(0) = γ f(0): ½f''(0) ≈ (f(h) - (1 + hγ) f(0)) / h².
        upper[0] = 1.0 / h**2
        diag[0] = -(1.0 + h * gamma) / h**2

    return GeneratorMatrix(kind, grid, lower, diag, upper, free, epsilon, gamma)


# ---------------------------------------------------------------------------
# Time stepping

@dataclass(frozen=True, eq=False)
class EvolutionResult:
    times: tuple[float, ...]
    snapshots: tuple[GridFunction, ...]
    scheme: Scheme

    def at(self, t: float) -> GridFunction:
        for time, snapshot in zip(self.times, self.snapshots):
            if math.isclose(time, t, rel_tol=1e-12, abs_tol=1e-15):
                return snapshot
        raise KeyError(f"no snapshot at t={t}")

    @property
    def final(self) -> GridFunction:
        return self.snapshots[-1]

    def sup_norms(self) -> list[float]:
        return [snapshot.sup_norm() for snapshot in self.snapshots]

    def is_contractive(self, tol: float = 1e-10) -> bool:
        norms = self.sup_norms()
        return all(nxt <= prev + tol for prev, nxt in zip(norms, norms[1:]))

    def is_positive(self, tol: float = 1e-10) -> bool:
        return all(float(np.min(snapshot.values)) >= -tol for snapshot in self.snapshots)


class _CrankNicolson:
    """θ-scheme marcher with cached banded factors per (step, θ)."""

    def __init__(self, M: GeneratorMatrix, dt: float) -> None:
        self._M = M
        self._dt = dt
        self._operator = M.to_sparse()
        self._identity = sparse.identity(M.size, format="csr")
        self._startup_left = STARTUP_STEPS
        self._stopped = M.stopped
        self._bands: dict[tuple[float, float], np.ndarray] = {}

    def _step(self, u: np.ndarray, tau: float, theta: float) -> np.ndarray:
        key = (tau, theta)
        band = self._bands.get(key)
        if band is None:
            band = self._bands[key] = self._M.implicit_band(1.0, theta * tau)
        rhs = u if theta == 1.0 else u + (1.0 - theta) * tau * (self._operator @ u)
        return solve_banded((1, 1), band, rhs)

    def advance(self, u: np.ndarray, span: float) -> np.ndarray:
        whole = math.floor(span / self._dt + 1e-9)
        steps = [self._dt] * whole
        rest = span - whole * self._dt
        if rest > 1e-9 * self._dt:
            steps.append(rest)
        held = u[self._stopped].copy()
        for tau in steps:
            if self._startup_left > 0:
                self._startup_left -= 1
                u = self._step(self._step(u, 0.5 * tau, 1.0), 0.5 * tau, 1.0)
            else:
                u = self._step(u, tau, 0.5)
            # Stopped rows keep their initial values exactly.
            u[self._stopped] = held
        return u


def evolve(
    M: GeneratorMatrix,
    f0: GridFunction,
    t_end: float,
    dt: float,
    scheme: Scheme = Scheme.CRANK_NICOLSON,
    times: Optional[Sequence[float]] = None,
) -> EvolutionResult:
    """e^{tM} f0 at the requested times (default: t_end only)."""
    scheme = Scheme(scheme)
    if dt <= 0.0 or t_end < 0.0 or (t_end > 0.0 and dt > t_end):
        raise ConfigError(f"need 0 < dt <= t_end, got dt={dt}, t_end={t_end}")
    wanted = sorted({float(t) for t in (times if times is not None else (t_end,))})
    if wanted[0] < 0.0 or wanted[-1] > t_end * (1.0 + 1e-12):
        raise ConfigError(f"snapshot times must lie in [0, {t_end}]")

    u = M.restrict(f0.values)
    snapshots = []
    if scheme is Scheme.DENSE_EXPONENTIAL:
        if M.grid.size > DENSE_NODE_LIMIT:
            raise UnsupportedError(f"dense exponential limited to {DENSE_NODE_LIMIT} nodes, grid has {M.grid.size}")
        dense = M.to_dense()
        for t in wanted:
            evolved = expm(t * dense) @ u
            evolved[M.stopped] = u[M.stopped]
            snapshots.append(f0.with_values(M.extend(evolved)))
    else:
        marcher = _CrankNicolson(M, dt)
        clock = 0.0
        for t in wanted:
            if t > clock:
                u = marcher.advance(u, t - clock)
                clock = t
            snapshots.append(f0.with_values(M.extend(u)))
    log.debug("evolved %s over %d snapshots with %s", M.kind.value, len(wanted), scheme.value)
    return EvolutionResult(tuple(wanted), tuple(snapshots), scheme)


# ---------------------------------------------------------------------------
# Long-time behaviour

def projection_P(f: GridFunction, p: LimitParams) -> GridFunction:
    """P f = f(a) ℓ* + f(b) k*."""
    x = f.x
    return f.with_values(f.at_a * np.asarray(l_star(x, p)) + f.at_b * np.asarray(k_star(x, p)))


def projection_matrix(grid: Grid, p: LimitParams) -> np.ndarray:
    matrix = np.zeros((grid.size, grid.size))
    matrix[:, 0] = l_star(grid.x, p)
    matrix[:, -1] = k_star(grid.x, p)
    return matrix


def operator_norm_gap(M: GeneratorMatrix, p: LimitParams, t: float) -> float:
    """Induced sup-norm ‖e^{tM} - P‖ of the discretised limit semigroup."""
    if M.kind is not GeneratorKind.A_LIMIT:
        raise UnsupportedError("operator_norm_gap is defined for the limit generator")
    if M.grid.size > DENSE_NODE_LIMIT:
        raise UnsupportedError(f"dense exponential limited to {DENSE_NODE_LIMIT} nodes")
    gap = expm(t * M.to_dense()) - projection_matrix(M.grid, p)
    return float(np.max(np.sum(np.abs(gap), axis=1)))


@dataclass(frozen=True)
class DecayFit:
    kappa_fit: float
    K_fit: float
    dirichlet_rate: float
    degenerate: bool = False

    @property
    def passed(self) -> bool:
        return self.degenerate or self.kappa_fit >= 0.95 * self.dirichlet_rate


def decay_rate(
    M: GeneratorMatrix,
    f0: GridFunction,
    p: LimitParams,
    times: Optional[Sequence[float]] = None,
    scheme: Optional[Scheme] = None,
) -> DecayFit:
    """Least-squares slope of log ‖e^{tM} f0 - P f0‖ against t."""
    times = list(times) if times is not None else list(np.linspace(*DECAY_WINDOW, 11))
    if scheme is None:
        scheme = Scheme.DENSE_EXPONENTIAL if M.grid.size <= DENSE_NODE_LIMIT else Scheme.CRANK_NICOLSON
    result = evolve(M, f0, max(times), M.grid.h, scheme, times)
    target = projection_P(f0, p).values
    norms = np.array([float(np.max(np.abs(s.values - target))) for s in result.snapshots])
    rate = dirichlet_rate(p.a, p.b)
    if np.max(norms) < 1e-12:
        return DecayFit(math.inf, 0.0, rate, degenerate=True)
    if np.any(np.diff(norms) >= 0.0) or np.any(norms <= 0.0):
        raise FitRejectedError(f"distance to P f0 is not strictly decreasing: {norms.tolist()}")
    slope, intercept = np.polyfit(np.asarray(result.times), np.log(norms), 1)
    return DecayFit(float(-slope), float(math.exp(intercept)), rate)


# ---------------------------------------------------------------------------
# Odd/even blocks on symmetric intervals

def odd_part(f: GridFunction) -> np.ndarray:
    return 0.5 * (f.values - f.values[::-1])


def even_part(f: GridFunction) -> np.ndarray:
    return 0.5 * (f.values + f.values[::-1])


def odd_extension(half_values: np.ndarray) -> np.ndarray:
    """Values on [0, b] → odd function on [-b, b]."""
    return np.concatenate((-half_values[:0:-1], half_values))


def even_extension(half_values: np.ndarray) -> np.ndarray:
    return np.concatenate((half_values[:0:-1], half_values))


def _require_symmetric(grid: Grid) -> None:
    if not grid.symmetric:
        raise UnsupportedError(f"block construction needs a = -b, got a={grid.a}, b={grid.b}")


def block_semigroup(
    f0: GridFunction,
    t: float,
    gamma: float,
    dt: Optional[float] = None,
    scheme: Scheme = Scheme.CRANK_NICOLSON,
) -> GridFunction:
    """Σ J_i⁻¹ e^{tG_i} J_i Q_i f0: evolve odd part under G1, even part under G2, reflect and add."""
    grid = f0.grid
    _require_symmetric(grid)
    half = grid.half()
    zero = grid.zero_index
    step = dt if dt is not None else grid.h
    evolved = []
    for kind, part in ((GeneratorKind.G1, odd_part(f0)), (GeneratorKind.G2, even_part(f0))):
        M = discretize(kind, half, gamma=gamma)
        data = half.function(part[zero:])
        if t == 0.0:
            evolved.append(data.values)
        else:
            evolved.append(evolve(M, data, t, min(step, t), scheme).final.values)
    odd, even = evolved
    return f0.with_values(odd_extension(odd) + even_extension(even))


@dataclass(frozen=True, eq=False)
class BlockLimits:
    k1: GridFunction
    k2: GridFunction
    k_star: GridFunction
    l_star: GridFunction
    reconstruction_error: float
    g1_limit_error: float
    g2_limit_error: float


def longtime_blocks(b: float, gamma: float, h: float, t_long: Optional[float] = None) -> BlockLimits:
    """k₁, k₂ and the identities ½(k₁⊕k₂) = k*, ½(k₂⊖k₁) = ℓ*; e^{tG_i}1 → k_i checked numerically."""
    grid = Grid(-b, b, h)
    half = grid.half()
    p = LimitParams(-b, b, gamma)
    k1_half = np.asarray(k1(half.x, b))
    k2_half = np.asarray(k2(half.x, b, gamma))
    kstar = np.asarray(k_star(grid.x, p))
    lstar = np.asarray(l_star(grid.x, p))

    from_blocks_k = 0.5 * (odd_extension(k1_half) + even_extension(k2_half))
    from_blocks_l = 0.5 * (even_extension(k2_half) - odd_extension(k1_half))
    reconstruction = max(float(np.max(np.abs(from_blocks_k - kstar))), float(np.max(np.abs(from_blocks_l - lstar))))
    if reconstruction > RECONSTRUCTION_TOL:
        raise NumericalCheckError(f"block reconstruction of k*, ℓ* off by {reconstruction:.3g}")

    horizon = t_long if t_long is not None else 40.0 * b**2
    scheme = Scheme.DENSE_EXPONENTIAL if half.size <= DENSE_NODE_LIMIT else Scheme.CRANK_NICOLSON
    ones = half.function(np.ones(half.size))
    errors = []
    for kind, expected in ((GeneratorKind.G1, k1_half), (GeneratorKind.G2, k2_half)):
        M = discretize(kind, half, gamma=gamma)
        limit = evolve(M, ones, horizon, min(h, horizon), scheme).final.values
        # J₁ restricts odd functions, so the G1 block only sees C₀(0, b]: its value at 0 is pinned to 0.
        errors.append(float(np.max(np.abs(limit - expected))))
    return BlockLimits(
        k1=half.function(k1_half),
        k2=half.function(k2_half),
        k_star=grid.function(kstar),
        l_star=grid.function(lstar),
        reconstruction_error=reconstruction,
        g1_limit_error=errors[0],
        g2_limit_error=errors[1],
    )
