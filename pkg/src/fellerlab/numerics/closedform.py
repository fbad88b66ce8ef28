"""Closed-form limit functions, the survival expectation and the local-time law."""
from __future__ import annotations

import numpy as np

from .base import ConfigError
from .models import LimitParams

# Below this λ the γ/λ factor in k and ℓ amplifies rounding beyond the tested range.
MIN_LAMBDA = 1e-8

ArrayLike = np.ndarray | float


def _as_array(x: ArrayLike) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _out(value: np.ndarray) -> ArrayLike:
    return float(value) if value.ndim == 0 else value


def _lambda(p: LimitParams) -> float:
    if p.lam is None or p.lam < MIN_LAMBDA:
        raise ConfigError(f"closed forms need lambda >= {MIN_LAMBDA:g}, got {p.lam}")
    return p.lam


def k_limit(x: ArrayLike, p: LimitParams) -> ArrayLike:
    """k(x) = sinh(s(x-a))/s - (γ/λ) sinh(sa) sinh(sx) [x ≥ 0], s = √(2λ)."""
    lam = _lambda(p)
    s = p.slam
    x = _as_array(x)
    jump = (p.gamma / lam) * np.sinh(s * p.a) * np.sinh(s * x) * (x >= 0.0)
    return _out(np.sinh(s * (x - p.a)) / s - jump)


def l_limit(x: ArrayLike, p: LimitParams) -> ArrayLike:
    """ℓ(x) = sinh(s(b-x))/s - (γ/λ) sinh(sb) sinh(sx) [x ≤ 0]."""
    lam = _lambda(p)
    s = p.slam
    x = _as_array(x)
    jump = (p.gamma / lam) * np.sinh(s * p.b) * np.sinh(s * x) * (x <= 0.0)
    return _out(np.sinh(s * (p.b - x)) / s - jump)


def k_integral(p: LimitParams) -> float:
    """∫_a^b k, whose product with λ vanishes as λ → 0."""
    lam = _lambda(p)
    s = p.slam
    return float(
        (np.cosh(s * (p.b - p.a)) - 1.0) / (2.0 * lam)
        - (2.0 * p.gamma / s) * np.sinh(s * p.a) * (np.cosh(s * p.b) - 1.0) / (2.0 * lam)
    )


def _denominator(p: LimitParams) -> float:
    return p.b - p.a - 2.0 * p.gamma * p.a * p.b


def k_star_lambda0(x: ArrayLike, p: LimitParams) -> ArrayLike:
    """lim_{λ→0} k(x) = x - a - 2γax [x ≥ 0]."""
    x = _as_array(x)
    return _out(x - p.a - 2.0 * p.gamma * p.a * x * (x >= 0.0))


def l_star_lambda0(x: ArrayLike, p: LimitParams) -> ArrayLike:
    """lim_{λ→0} ℓ(x) = b - x - 2γbx [x ≤ 0]."""
    x = _as_array(x)
    return _out(p.b - x - 2.0 * p.gamma * p.b * x * (x <= 0.0))


def k_star(x: ArrayLike, p: LimitParams) -> ArrayLike:
    """Probability of being captured at b (before a, before killing at 0)."""
    return _out(_as_array(k_star_lambda0(x, p)) / _denominator(p))


def l_star(x: ArrayLike, p: LimitParams) -> ArrayLike:
    """Probability of being captured at a (before b, before killing at 0)."""
    return _out(_as_array(l_star_lambda0(x, p)) / _denominator(p))


def survival_expectation(x: ArrayLike, p: LimitParams) -> ArrayLike:
    """E_x exp(-γ L₀(τ)) = (b - a - γ(a+b)x + γ(b-a)|x|) / (b - a - 2γab)."""
    x = _as_array(x)
    numerator = p.b - p.a - p.gamma * (p.a + p.b) * x + p.gamma * (p.b - p.a) * np.abs(x)
    return _out(numerator / _denominator(p))


def survival_affine(x: ArrayLike, p: LimitParams) -> ArrayLike:
    """Same expectation, written as a mixture of 'exit directly' and 'pass through 0'."""
    x = _as_array(x)
    at_zero = (p.b - p.a) / _denominator(p)
    right = x / p.b + (p.b - x) / p.b * at_zero
    left = x / p.a + (p.a - x) / p.a * at_zero
    return _out(np.where(x >= 0.0, right, left))


def exp_law_mean(a: float, b: float) -> float:
    """Mean of L₀(τ) under P₀: 2(-a)b/(b-a); the law is exponential."""
    if not a < 0.0 < b:
        raise ConfigError(f"need a < 0 < b, got a={a}, b={b}")
    return 2.0 * (-a) * b / (b - a)


def local_time_mean(x: ArrayLike, a: float, b: float) -> ArrayLike:
    """E_x L₀(τ): the chance of reaching 0 before exit times exp_law_mean."""
    mean = exp_law_mean(a, b)
    x = _as_array(x)
    reach = np.where(x >= 0.0, (b - x) / b, (x - a) / (-a))
    return _out(reach * mean)


def occupation_window_mean(a: float, b: float, delta: float) -> float:
    """E₀ of the occupation estimator (1/2δ)∫1[|w|<δ] ds up to τ: the Green's-function average.

    Equals exp_law_mean(a, b) - δ/2 whenever δ ≤ min(-a, b).
    """
    if not 0.0 < delta <= min(-a, b):
        raise ConfigError(f"window delta={delta} must lie in (0, min(-a, b)]")
    return exp_law_mean(a, b) - 0.5 * delta


def k1(x: ArrayLike, b: float) -> ArrayLike:
    """Capture probability at b for Brownian motion on (0, b] killed at 0."""
    return _out(_as_array(x) / b)


def k2(x: ArrayLike, b: float, gamma: float) -> ArrayLike:
    """Capture probability at b with an elastic barrier at 0."""
    return _out((1.0 + gamma * _as_array(x)) / (1.0 + gamma * b))
