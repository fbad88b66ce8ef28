"""Resolvents of A_ε (Green's function from k_ε, ℓ_ε) and of the limit generator A."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .base import ConfigError, GridError, InconsistentEigenpairError, NumericalCheckError
from .closedform import k_limit, k_star, l_limit, l_star
from .evolution import GeneratorMatrix
from .kernel import ScaledKernel
from .models import BoundaryReport, GridFunction, LimitParams
from .picard import DEFAULT_TOL, solve_pair

log = logging.getLogger(__name__)

WRONSKIAN_TOLERANCE = 1e-3
# Residuals above this many h²·max(1, ‖g‖) are logged as warnings.
RESIDUAL_WARN_FACTOR = 1e4


@dataclass(frozen=True, eq=False)
class ResolventResult:
    """f = R(λ)g together with its equation residual and boundary deviations."""

    f: GridFunction
    lam: float
    residual: GridFunction
    residual_sup: float
    boundary_report: BoundaryReport

    @property
    def residual_constant(self) -> float:
        """C in residual_sup = C h²."""
        return self.residual_sup / self.f.step_h**2


@dataclass(frozen=True, eq=False)
class LambdaLimitStudy:
    limit: GridFunction
    lambdas: tuple[float, ...]
    sup_errors: tuple[float, ...]


# ---------------------------------------------------------------------------
# Stencils

def _one_sided(values: np.ndarray, index: int, direction: int, h: float) -> tuple[float, float]:
    """Second-order one-sided (f', f'') at `index`, looking in `direction` (+1 right, -1 left)."""
    f0, f1, f2, f3 = (values[index + direction * j] for j in range(4))
    first = direction * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)
    second = (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) / h**2
    return float(first), float(second)


def check_domain(f: GridFunction, gamma: float) -> BoundaryReport:
    """Deviations from f''(a) = f''(b) = 0, f''(0+) = f''(0-), f'(0+) - f'(0-) = 2γ f(0)."""
    zero, size, h = f.grid.zero_index, f.grid.size, f.step_h
    if zero < 3 or size - zero < 4:
        raise GridError("check_domain needs at least three nodes on each side of 0")
    values = f.values
    _, second_a = _one_sided(values, 0, +1, h)
    _, second_b = _one_sided(values, size - 1, -1, h)
    slope_plus, second_plus = _one_sided(values, zero, +1, h)
    slope_minus, second_minus = _one_sided(values, zero, -1, h)
    return BoundaryReport(
        second_derivative_a=abs(second_a),
        second_derivative_b=abs(second_b),
        second_derivative_jump=abs(second_plus - second_minus),
        flux_jump_deviation=abs(slope_plus - slope_minus - 2.0 * gamma * values[zero]),
    )


def _residual(
    f: GridFunction,
    g: GridFunction,
    lam: float,
    potential: np.ndarray,
    skip: np.ndarray,
) -> GridFunction:
    """λf - ½f'' + c f - g at interior nodes, with `skip` nodes zeroed out."""
    values, h = f.values, f.step_h
    out = np.zeros_like(values)
    second = (values[:-2] - 2.0 * values[1:-1] + values[2:]) / h**2
    out[1:-1] = lam * values[1:-1] - 0.5 * second + potential[1:-1] * values[1:-1] - g.values[1:-1]
    out[skip] = 0.0
    return f.with_values(out)


def _assemble(
    g: GridFunction,
    lam: float,
    k: np.ndarray,
    l: np.ndarray,
    killing_a: float = 0.0,
    killing_b: float = 0.0,
) -> np.ndarray:
    h = g.step_h
    wronskian_a, wronskian_b = l[0], k[-1]
    if abs(wronskian_a - wronskian_b) > WRONSKIAN_TOLERANCE * abs(wronskian_b):
        raise InconsistentEigenpairError(
            f"ℓ(a)={wronskian_a:.10g} and k(b)={wronskian_b:.10g} disagree beyond {WRONSKIAN_TOLERANCE:g}"
        )
    from_a = cumulative_trapezoid(k * g.values, dx=h, initial=0.0)
    to_b = cumulative_trapezoid((l * g.values)[::-1], dx=h, initial=0.0)[::-1]
    green = 2.0 * l / wronskian_a * from_a + 2.0 * k / wronskian_b * to_b
    return (
        green
        + g.at_a / ((lam + killing_a) * wronskian_a) * l
        + g.at_b / ((lam + killing_b) * wronskian_b) * k
    )


def _check_residual(residual: GridFunction, g: GridFunction, lam: float, tol: Optional[float]) -> float:
    """sup |residual|; raises above an explicit `tol`, warns above the h² scale otherwise."""
    value = residual.sup_norm()
    if tol is not None:
        if value > tol:
            raise NumericalCheckError(f"resolvent residual {value:.3e} exceeds {tol:.1e} at lambda={lam:g}")
        return value
    scale = RESIDUAL_WARN_FACTOR * g.step_h**2 * max(1.0, g.sup_norm())
    if value > scale:
        log.warning("resolvent residual %.3e at lambda=%g is above %.1e; is g resolved by the grid?", value, lam, scale)
    return value


# ---------------------------------------------------------------------------
# Public operations

def resolvent_eps(
    g: GridFunction,
    lam: float,
    kernel: ScaledKernel,
    tol: float = DEFAULT_TOL,
    residual_tol: Optional[float] = None,
) -> ResolventResult:
    pair = solve_pair(kernel, lam, g.grid, tol)
    x, h = g.x, g.step_h
    potential = kernel(x)
    values = _assemble(g, lam, pair.k.values, pair.l.values, float(potential[0]), float(potential[-1]))
    f = g.with_values(values)

    near_jump = np.zeros(x.shape, dtype=bool)
    for point in kernel.breakpoints:
        near_jump |= np.abs(x - point) < 1.5 * h
    residual = _residual(f, g, lam, potential, near_jump)
    report = check_domain(f, 0.0)
    residual_sup = _check_residual(residual, g, lam, residual_tol)
    log.debug("R(%g, A_eps) for %s: residual %.3g", lam, kernel.name, residual_sup)
    return ResolventResult(f, lam, residual, residual_sup, report)


def resolvent_limit(g: GridFunction, p: LimitParams, residual_tol: Optional[float] = None) -> ResolventResult:
    if p.lam is None:
        raise ConfigError("resolvent_limit needs lambda in the parameters")
    x = g.x
    values = _assemble(g, p.lam, np.asarray(k_limit(x, p)), np.asarray(l_limit(x, p)))
    f = g.with_values(values)

    at_zero = np.zeros(x.shape, dtype=bool)
    at_zero[g.grid.zero_index] = True
    residual = _residual(f, g, p.lam, np.zeros_like(x), at_zero)
    residual_sup = _check_residual(residual, g, p.lam, residual_tol)
    return ResolventResult(f, p.lam, residual, residual_sup, check_domain(f, p.gamma))


def resolvent_dense(M: GeneratorMatrix, g: GridFunction, lam: float) -> GridFunction:
    """Oracle (λI - M)⁻¹g from the discretised generator."""
    return M.solve_shifted(lam, g)


def resolvent_identity_gap(g: GridFunction, p: LimitParams, lam: float, mu: float) -> float:
    """sup |R_λ g - R_μ g - (μ - λ) R_λ R_μ g|."""
    r_lam = resolvent_limit(g, p.with_lambda(lam)).f
    r_mu = resolvent_limit(g, p.with_lambda(mu)).f
    nested = resolvent_limit(r_mu, p.with_lambda(lam)).f
    return float(np.max(np.abs(r_lam.values - r_mu.values - (mu - lam) * nested.values)))


def lambda_to_zero_limit(
    g: GridFunction,
    p: LimitParams,
    lambdas: Sequence[float] = (1.0, 0.1, 0.01, 0.001),
) -> LambdaLimitStudy:
    """λ R_λ g as λ ↓ 0, compared with g(a)ℓ* + g(b)k*."""
    lambdas = tuple(float(lam) for lam in lambdas)
    if len(lambdas) < 2 or any(nxt >= prev for prev, nxt in zip(lambdas, lambdas[1:])):
        raise ConfigError("lambdas must be strictly decreasing with at least two values")
    x = g.x
    target = g.at_a * np.asarray(l_star(x, p)) + g.at_b * np.asarray(k_star(x, p))
    errors = []
    scaled: Optional[np.ndarray] = None
    for lam in lambdas:
        scaled = lam * resolvent_limit(g, p.with_lambda(lam)).f.values
        errors.append(float(np.max(np.abs(scaled - target))))
    if errors[-1] >= errors[0] and errors[0] > 0.0:
        raise NumericalCheckError(f"λR(λ)g did not approach its limit: errors {errors}")
    return LambdaLimitStudy(g.with_values(scaled), lambdas, tuple(errors))
