"""Monte Carlo for stopped Brownian motion killed by an intensity or by local time at 0."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .base import ConfigError, EstimatorBiasError
from .closedform import exp_law_mean, occupation_window_mean
from .evolution import GeneratorKind, Scheme, discretize, evolve
from .kernel import KillingKernel, ScaledKernel, resolving_step
from .models import Grid, LimitParams

log = logging.getLogger(__name__)

# δ must be at least this many √dt for the occupation estimator.
DELTA_FACTOR = 5.0
DT_FRACTION = 1e-3
# Paths per RNG stream; fixed so results do not depend on the worker count.
CHUNK_SIZE = 2048
# Steps drawn per path at once; bounds memory at CHUNK_SIZE·BLOCK_STEPS doubles per array.
BLOCK_STEPS = 256
# Bridge crossings are only tested within this many √dt of an end.
BRIDGE_REACH = 7.0
# Without a horizon, paths still inside after this many (b-a)² time units are reported alive.
EXIT_TIME_CAP = 200.0
DEFAULT_LAW_DT = 1e-5
CI_LEVEL = 0.99


class Mechanism(str, Enum):
    NONE = "none"
    INTENSITY = "intensity"
    LOCAL_TIME = "local_time"


class LocalTimeMethod(str, Enum):
    OCCUPATION = "occupation"
    TANAKA = "tanaka"
    BRIDGE = "bridge"


class PathStatus(str, Enum):
    STOPPED_AT_A = "stopped_at_a"
    STOPPED_AT_B = "stopped_at_b"
    KILLED = "killed"
    ALIVE = "alive"


_STATUS_CODES = tuple(PathStatus)
_A, _B, _KILLED, _ALIVE = range(4)


@dataclass(frozen=True)
class SimConfig:
    x0: float
    a: float
    b: float
    dt: float
    mechanism: Mechanism = Mechanism.NONE
    n_paths: int = 10_000
    seed: int = 0
    bridge_correction: bool = True
    kernel: Optional[ScaledKernel] = None
    gamma: float = 0.0
    delta: Optional[float] = None
    local_time_method: LocalTimeMethod = LocalTimeMethod.OCCUPATION
    t_end: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "mechanism", Mechanism(self.mechanism))
        object.__setattr__(self, "local_time_method", LocalTimeMethod(self.local_time_method))
        if not self.a < 0.0 < self.b:
            raise ConfigError(f"interval must satisfy a < 0 < b, got a={self.a}, b={self.b}")
        if not self.a <= self.x0 <= self.b:
            raise ConfigError(f"x0={self.x0} lies outside [{self.a}, {self.b}]")
        if not 0.0 < self.dt <= DT_FRACTION * (self.b - self.a) ** 2:
            raise ConfigError(f"dt must lie in (0, {DT_FRACTION:g}·(b-a)²], got {self.dt}")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be at least 1")
        if self.mechanism is Mechanism.INTENSITY and self.kernel is None:
            raise ConfigError("the intensity mechanism needs a scaled kernel")
        if self.gamma < 0.0:
            raise ConfigError(f"gamma must be nonnegative, got {self.gamma}")
        if self.t_end is not None and self.t_end <= 0.0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        _check_window(self.window, self.dt)

    @property
    def window(self) -> float:
        return self.delta if self.delta is not None else DELTA_FACTOR * math.sqrt(self.dt)

    def started_at(self, x0: float) -> "SimConfig":
        return replace(self, x0=x0)


@dataclass(frozen=True)
class PathOutcome:
    """One path. For killed paths exit_time and local_time stop at the kill; weight and position run to t∧τ."""

    status: PathStatus
    exit_time: float
    local_time: float
    weight: float
    position: float


@dataclass(frozen=True, eq=False)
class PathBatch:
    """Per-path arrays in path order."""

    status: np.ndarray
    exit_time: np.ndarray
    local_time: np.ndarray
    weight: np.ndarray
    position: np.ndarray

    @property
    def count(self) -> int:
        return int(self.status.size)

    def outcomes(self) -> list[PathOutcome]:
        return [
            PathOutcome(_STATUS_CODES[code], float(t), float(lt), float(w), float(x))
            for code, t, lt, w, x in zip(self.status, self.exit_time, self.local_time, self.weight, self.position)
        ]

    def fraction(self, status: PathStatus) -> tuple[float, float]:
        return mean_and_error((self.status == _STATUS_CODES.index(status)).astype(float))

    @classmethod
    def concatenate(cls, parts: Sequence["PathBatch"]) -> "PathBatch":
        return cls(*(np.concatenate([getattr(p, name) for p in parts]) for name in
                     ("status", "exit_time", "local_time", "weight", "position")))


def mean_and_error(values: np.ndarray) -> tuple[float, float]:
    """Compensated mean and its standard error."""
    n = values.size
    mean = math.fsum(values) / n
    if n < 2:
        return mean, math.inf
    variance = math.fsum((values - mean) ** 2) / (n - 1)
    return mean, math.sqrt(variance / n)


def _check_window(delta: float, dt: float) -> None:
    if delta < DELTA_FACTOR * math.sqrt(dt) * (1.0 - 1e-12):
        raise EstimatorBiasError(
            f"local-time window δ={delta:g} is below {DELTA_FACTOR:g}·√dt = {DELTA_FACTOR * math.sqrt(dt):g}"
        )


# ---------------------------------------------------------------------------
# Path simulation

def local_time_estimate(
    path: np.ndarray,
    dt: float,
    delta: Optional[float] = None,
    method: LocalTimeMethod = LocalTimeMethod.OCCUPATION,
) -> float:
    """L̂₀ of a sampled path.

    occupation: (1/2δ) Σ dt·1[|w|<δ]; tanaka: Σ |w'|-|w|-sgn(w)Δw; bridge: the mean local time
    of the Brownian bridge between consecutive samples.
    """
    window = delta if delta is not None else DELTA_FACTOR * math.sqrt(dt)
    _check_window(window, dt)
    w = np.asarray(path, dtype=float)
    if w.size < 2:
        return 0.0
    method = LocalTimeMethod(method)
    if method is LocalTimeMethod.TANAKA:
        return float(np.sum(np.abs(w[1:]) - np.abs(w[:-1]) - np.sign(w[:-1]) * np.diff(w)))
    if method is LocalTimeMethod.BRIDGE:
        # E[L | x, y] = √(2π dt)·exp((y-x)²/2dt)·Q((|x|+|y|)/√dt), summed over steps.
        sqrt_dt = math.sqrt(dt)
        spread = (np.abs(w[:-1]) + np.abs(w[1:])) / sqrt_dt
        log_terms = 0.5 * (np.diff(w) / sqrt_dt) ** 2 + stats.norm.logsf(spread)
        return float(math.sqrt(2.0 * math.pi * dt) * np.sum(np.exp(log_terms)))
    return float(dt * np.count_nonzero(np.abs(w[:-1]) < window) / (2.0 * window))


def _stream(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _bridge_exits(rng: np.random.Generator, here: np.ndarray, there: np.ndarray,
                  a: float, b: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint hits plus bridge crossings; uniforms are drawn only where a crossing is possible."""
    hit_a = there <= a
    hit_b = there >= b
    reach = BRIDGE_REACH * math.sqrt(dt)
    near = ~(hit_a | hit_b) & (
        (np.minimum(here, there) - a < reach) | (b - np.maximum(here, there) < reach)
    )
    if np.any(near):
        x1, x2 = here[near], there[near]
        u = rng.random((2, x1.size))
        cross_a = u[0] < np.exp(-2.0 * (x1 - a) * (x2 - a) / dt)
        cross_b = ~cross_a & (u[1] < np.exp(-2.0 * (b - x1) * (b - x2) / dt))
        hit_a[near] = cross_a
        hit_b[near] = cross_b
    return hit_a, hit_b


def _local_increments(config: SimConfig, rng: np.random.Generator, here: np.ndarray, there: np.ndarray,
                      dt: float) -> np.ndarray:
    method = config.local_time_method
    if method is LocalTimeMethod.TANAKA:
        return np.abs(there) - np.abs(here) - np.sign(here) * (there - here)
    if method is LocalTimeMethod.BRIDGE:
        # P(L > l | x, y) = exp(-((|x| + |y| + l)² - (y - x)²) / 2dt) for the bridge from x to y.
        clock = rng.standard_exponential(here.shape)
        level = np.sqrt((there - here) ** 2 + 2.0 * dt * clock) - np.abs(here) - np.abs(there)
        return np.maximum(level, 0.0)
    window = config.window
    return dt * (np.abs(here) < window) / (2.0 * window)


def _simulate_chunk(config: SimConfig, chunk: int, count: int) -> PathBatch:
    """Advance `count` paths in blocks of BLOCK_STEPS steps until they exit or reach the step limit.

    local_time stops at the kill time; hazard and position keep running to t∧τ so the
    weighted estimator sees the whole path.
    """
    rng = _stream(config.seed, chunk)
    a, b, x0 = config.a, config.b, config.x0
    clock = rng.standard_exponential(count)

    if config.t_end is not None:
        step_limit = max(1, round(config.t_end / config.dt))
        dt = config.t_end / step_limit
    else:
        dt = config.dt
        step_limit = math.ceil(EXIT_TIME_CAP * (b - a) ** 2 / dt)
    sqrt_dt = math.sqrt(dt)
    killing = config.mechanism is not Mechanism.NONE

    w = np.full(count, x0)
    local_time = np.zeros(count)
    hazard = np.zeros(count)
    exit_time = np.zeros(count)
    kill_time = np.full(count, math.nan)
    status = np.full(count, _ALIVE, dtype=np.int8)

    if x0 <= a or x0 >= b:
        status[:] = _A if x0 <= a else _B
        active = np.arange(0)
    else:
        active = np.arange(count)

    steps = 0
    while active.size and steps < step_limit:
        n = min(BLOCK_STEPS, step_limit - steps)
        rows = np.arange(active.size)
        start = w[active]
        there = start[:, None] + sqrt_dt * np.cumsum(rng.standard_normal((active.size, n)), axis=1)
        here = np.concatenate([start[:, None], there[:, :-1]], axis=1)
        hit_a, hit_b = _bridge_exits(rng, here, there, a, b, dt) if config.bridge_correction else (
            there <= a, there >= b)

        hits = hit_a | hit_b
        ended = hits.any(axis=1)
        last = np.where(ended, hits.argmax(axis=1), n - 1)
        end_at_a = ended & hit_a[rows, last]
        there[rows[ended], last[ended]] = np.where(end_at_a[ended], a, b)
        taken = np.arange(n)[None, :] <= last[:, None]

        d_local = np.where(taken, _local_increments(config, rng, here, there, dt), 0.0)
        running_local = local_time[active][:, None] + np.cumsum(d_local, axis=1)
        pending = np.isnan(kill_time[active])

        if killing:
            if config.mechanism is Mechanism.INTENSITY:
                d_hazard = np.where(taken, 0.5 * dt * (config.kernel(here) + config.kernel(there)), 0.0)
            else:
                d_hazard = config.gamma * d_local
            running_hazard = hazard[active][:, None] + np.cumsum(d_hazard, axis=1)
            crossed = running_hazard > clock[active][:, None]
            newly = pending & crossed.any(axis=1)
            if np.any(newly):
                idx = crossed[newly].argmax(axis=1)
                sub = rows[newly]
                step_hazard = d_hazard[sub, idx]
                before = running_hazard[sub, idx] - step_hazard
                fraction = (clock[active[newly]] - before) / step_hazard
                kill_time[active[newly]] = (steps + idx + fraction) * dt
                local_time[active[newly]] = running_local[sub, idx] - (1.0 - fraction) * d_local[sub, idx]
                pending &= ~newly
            hazard[active] = running_hazard[:, -1]

        local_time[active[pending]] = running_local[pending, -1]
        w[active] = there[rows, last]
        finished = active[ended]
        exit_time[finished] = (steps + last[ended] + 1) * dt
        status[finished] = np.where(end_at_a[ended], _A, _B)
        active = active[~ended]
        steps += n

    exit_time[active] = steps * dt
    killed = ~np.isnan(kill_time)
    status[killed] = _KILLED
    exit_time[killed] = kill_time[killed]
    log.debug("chunk %d: %d paths, %d steps, %d killed", chunk, count, steps, int(np.count_nonzero(killed)))
    return PathBatch(status, exit_time, local_time, np.exp(-hazard), w.copy())


def simulate_batch(config: SimConfig, workers: Optional[int] = None) -> PathBatch:
    """All paths of `config`, chunked into independent streams and run on a thread pool."""
    sizes = [min(CHUNK_SIZE, config.n_paths - start) for start in range(0, config.n_paths, CHUNK_SIZE)]
    workers = max(1, workers or 1)
    if workers == 1 or len(sizes) == 1:
        parts = [_simulate_chunk(config, chunk, size) for chunk, size in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="mc") as pool:
            parts = list(pool.map(lambda item: _simulate_chunk(config, *item), enumerate(sizes)))
    return PathBatch.concatenate(parts)


def simulate(config: SimConfig, workers: Optional[int] = None) -> list[PathOutcome]:
    return simulate_batch(config, workers).outcomes()


# ---------------------------------------------------------------------------
# Estimators

@dataclass(frozen=True)
class SurvivalEstimate:
    """E_x e^{-γL₀(τ)} by the weighted and killed-path estimators, plus the endpoint split."""

    x: float
    estimate: float
    std_error: float
    killed_estimate: float
    killed_std_error: float
    at_a: float
    at_a_error: float
    at_b: float
    at_b_error: float
    n_paths: int

    def agreement(self) -> float:
        """|weighted - killed| in units of the combined standard error."""
        combined = math.hypot(self.std_error, self.killed_std_error)
        return abs(self.estimate - self.killed_estimate) / combined if combined > 0 else 0.0


def estimate_survival(
    x: float,
    p: LimitParams,
    config: SimConfig,
    workers: Optional[int] = None,
) -> SurvivalEstimate:
    run = replace(config, x0=x, a=p.a, b=p.b, gamma=p.gamma, mechanism=Mechanism.LOCAL_TIME, t_end=None)
    batch = simulate_batch(run, workers)
    estimate, error = mean_and_error(batch.weight)
    survived = (batch.status != _KILLED).astype(float)
    killed_estimate, killed_error = mean_and_error(survived)
    at_a, at_a_error = mean_and_error(batch.weight * (batch.position == p.a))
    at_b, at_b_error = mean_and_error(batch.weight * (batch.position == p.b))
    return SurvivalEstimate(
        x, estimate, error, killed_estimate, killed_error, at_a, at_a_error, at_b, at_b_error, batch.count
    )


@dataclass(frozen=True, eq=False)
class LocalTimeLaw:
    samples: np.ndarray
    ks_stat: float
    ks_pvalue: float
    mean: float
    mean_ci: tuple[float, float]
    expected_mean: float
    window_mean: float

    def ci_contains(self, value: float) -> bool:
        return self.mean_ci[0] <= value <= self.mean_ci[1]


def exponential_fit(samples: np.ndarray, expected_mean: float, window_mean: float = math.nan) -> LocalTimeLaw:
    """KS distance to Exp(mean) and a 99% normal CI for the sample mean."""
    samples = np.asarray(samples, dtype=float)
    result = stats.kstest(samples, "expon", args=(0.0, expected_mean))
    mean, error = mean_and_error(samples)
    z = float(stats.norm.ppf(0.5 + CI_LEVEL / 2.0))
    return LocalTimeLaw(
        samples, float(result.statistic), float(result.pvalue), mean,
        (mean - z * error, mean + z * error), expected_mean, window_mean,
    )


def exit_local_time_law(
    a: float,
    b: float,
    n_paths: int,
    seed: int,
    dt: float = DEFAULT_LAW_DT,
    delta: Optional[float] = None,
    method: LocalTimeMethod = LocalTimeMethod.OCCUPATION,
    workers: Optional[int] = None,
) -> LocalTimeLaw:
    """Law of L̂₀(τ) under P₀ against the exponential with mean 2(-a)b/(b-a)."""
    config = SimConfig(0.0, a, b, dt, Mechanism.NONE, n_paths, seed, delta=delta, local_time_method=method)
    batch = simulate_batch(config, workers)
    expected = exp_law_mean(a, b)
    window_mean = occupation_window_mean(a, b, config.window) if method is LocalTimeMethod.OCCUPATION else expected
    return exponential_fit(batch.local_time, expected, window_mean)


def local_time_refinement(
    a: float,
    b: float,
    dts: Sequence[float],
    n_paths: int,
    seed: int,
    workers: Optional[int] = None,
) -> list[float]:
    """Mean of L̂₀(τ) as dt and δ = 5√dt shrink together."""
    return [exit_local_time_law(a, b, n_paths, seed, dt, workers=workers).mean for dt in dts]


@dataclass(frozen=True)
class MechanismRow:
    mechanism: Mechanism
    epsilon: Optional[float]
    estimate: float
    std_error: float
    pde_value: float


@dataclass(frozen=True)
class MechanismTable:
    x: float
    t: float
    rows: tuple[MechanismRow, ...] = field(default_factory=tuple)

    @property
    def reference(self) -> MechanismRow:
        return next(row for row in self.rows if row.mechanism is not Mechanism.INTENSITY)

    def deviations(self) -> list[tuple[Optional[float], float, float, float]]:
        """(ε, |MC_ε - MC_ref|, combined SE, |PDE_ε - PDE_ref|) for each intensity row."""
        ref = self.reference
        return [
            (
                row.epsilon,
                abs(row.estimate - ref.estimate),
                math.hypot(row.std_error, ref.std_error),
                abs(row.pde_value - ref.pde_value),
            )
            for row in self.rows
            if row.mechanism is Mechanism.INTENSITY
        ]

    def agrees(self, budget: float, sigmas: float = 3.0) -> bool:
        """Pairwise MC agreement up to the ε-gap the PDE sees, and MC against PDE per row."""
        rows_ok = all(gap <= sigmas * se + budget + pde_gap for _, gap, se, pde_gap in self.deviations())
        pde_ok = all(abs(row.estimate - row.pde_value) <= sigmas * row.std_error + budget for row in self.rows)
        return rows_ok and pde_ok


def _pde_value(kind: GeneratorKind, p: LimitParams, h: float, x: float, t: float,
               kernel: Optional[ScaledKernel] = None) -> float:
    grid = Grid(p.a, p.b, h)
    M = discretize(kind, grid, kernel=kernel, gamma=p.gamma)
    ones = grid.function(np.ones(grid.size))
    final = evolve(M, ones, t, min(h, t), Scheme.CRANK_NICOLSON).final
    return float(final.interpolate(x))


def compare_mechanisms(
    x: float,
    t: float,
    p: LimitParams,
    kernel: KillingKernel,
    eps_list: Sequence[float],
    config: SimConfig,
    h: float = 1e-3,
    workers: Optional[int] = None,
) -> MechanismTable:
    """e^{tA_ε}1(x) for each ε and e^{tA}1(x) by Monte Carlo, each beside its PDE value."""
    base = replace(config, x0=x, a=p.a, b=p.b, gamma=p.gamma, t_end=t)
    rows = []
    for eps in eps_list:
        scaled = kernel.scaled(eps)
        run = replace(base, mechanism=Mechanism.INTENSITY, kernel=scaled)
        estimate, error = mean_and_error(simulate_batch(run, workers).weight)
        step = resolving_step(scaled, h)
        pde = _pde_value(GeneratorKind.A_EPS, p, step, x, t, kernel=scaled)
        rows.append(MechanismRow(Mechanism.INTENSITY, float(eps), estimate, error, pde))

    limit_mechanism = Mechanism.LOCAL_TIME if p.gamma > 0.0 else Mechanism.NONE
    estimate, error = mean_and_error(simulate_batch(replace(base, mechanism=limit_mechanism), workers).weight)
    rows.append(MechanismRow(limit_mechanism, None, estimate, error, _pde_value(GeneratorKind.A_LIMIT, p, h, x, t)))
    return MechanismTable(x, t, tuple(rows))
