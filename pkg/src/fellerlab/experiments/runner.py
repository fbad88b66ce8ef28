"""Experiment registry: each experiment maps a config to tables, a summary and checks."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
from scipy.integrate import simpson

from ..numerics.base import ConfigError
from ..numerics.closedform import (
    exp_law_mean,
    k_integral,
    k_limit,
    k_star,
    l_limit,
    l_star,
    survival_expectation,
)
from ..numerics.evolution import (
    GeneratorKind,
    block_semigroup,
    decay_rate,
    discretize,
    evolve,
    longtime_blocks,
    operator_norm_gap,
    projection_P,
)
from ..numerics.kernel import box_kernel, gaussian_kernel, resolving_step, triangle_kernel
from ..numerics.models import Grid, LimitParams
from ..numerics.montecarlo import (
    LocalTimeMethod,
    SimConfig,
    compare_mechanisms,
    estimate_survival,
    exit_local_time_law,
)
from ..numerics.picard import choose_omega, measure_contraction, shooting_pair, solve_limit_pair, solve_pair
from ..numerics.resolvent import (
    lambda_to_zero_limit,
    resolvent_dense,
    resolvent_eps,
    resolvent_identity_gap,
    resolvent_limit,
)
from .artifacts import ArtifactWriter, Check, ResultTable
from .config import ExperimentConfig, named_function
from .manager import ExperimentManager, ListenerCallable, PanelJob

log = logging.getLogger(__name__)

WRONSKIAN_TOL = 1e-4
# Relative to max(1, sup|k|): k grows like sinh(√(2λ)(x-a)).
ORACLE_TOL = 1e-6
CONTRACTION_SLACK = 1e-6
# Increments below this are rounding noise and give meaningless ratios.
RATIO_FLOOR = 1e-12
DOMAIN_FACTOR = 50.0
FIXED_POINT_TOL = 1e-10
# Floating-point noise of a second difference scales like this over h².
ROUNDOFF = 1e-15
STATIONARY_TOL = 1e-8
PROJECTION_TOL = 1e-14
BLOCK_TOL = 1e-4
BLOCK_LIMIT_TOL = 1e-8
LAW_KS_TOL = 0.02
MC_SIGMAS = 3.0
GAP_NODES = 401
GAP_TIMES = (1.0, 2.0, 4.0, 6.0)
CLOSED_FORM_PARAMS = LimitParams(-1.0, 1.0, 1.0, 0.5)


@dataclass
class RunContext:
    manager: ExperimentManager
    workers: int
    seed: int


@dataclass
class ExperimentOutput:
    tables: list[ResultTable] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def check(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(name, bool(passed), detail))


@dataclass
class RunOutcome:
    manifest: Path
    output: ExperimentOutput


Experiment = Callable[[ExperimentConfig, RunContext], ExperimentOutput]


def strictly_decreasing(values: list[float]) -> bool:
    return all(nxt < prev for prev, nxt in zip(values, values[1:]))


def _sup(values: np.ndarray) -> float:
    return float(np.max(np.abs(values)))


# ---------------------------------------------------------------------------
# Deterministic experiments

def _convergence_point(config: ExperimentConfig, eps: float) -> tuple[float, float, float]:
    kernel = config.build_kernel()
    scaled = kernel.scaled(eps)
    lam = config.lambdas[0]
    grid = config.grid()
    p = LimitParams(config.a, config.b, kernel.mass_gamma, lam)

    g = named_function(config.g, grid)
    resolvent_error = _sup(resolvent_eps(g, lam, scaled).f.values - resolvent_limit(g, p).f.values)

    fine = Grid(config.a, config.b, resolving_step(scaled, config.h))
    times = sorted(config.times)
    eps_run = evolve(discretize(GeneratorKind.A_EPS, fine, kernel=scaled), named_function(config.f0, fine),
                     times[-1], config.time_step, times=times)
    limit_run = evolve(discretize(GeneratorKind.A_LIMIT, grid, gamma=p.gamma), named_function(config.f0, grid),
                       times[-1], config.time_step, times=times)
    semigroup_error = max(
        _sup(eps_run.at(t).downsample(grid).values - limit_run.at(t).values) for t in times
    )
    return eps, resolvent_error, semigroup_error


def run_convergence(config: ExperimentConfig, ctx: RunContext) -> ExperimentOutput:
    jobs = [
        PanelJob(f"eps={eps:g}", _convergence_point, {"config": config, "eps": eps})
        for eps in config.epsilons
    ]
    table = ResultTable("convergence", ["epsilon", "resolvent_sup_error", "semigroup_sup_error"])
    for row in ctx.manager.run_all(jobs):
        table.add_row(*row)

    output = ExperimentOutput(tables=[table])
    resolvent = table.column("resolvent_sup_error")
    semigroup = table.column("semigroup_sup_error")
    output.check("resolvent error strictly decreasing in epsilon", strictly_decreasing(resolvent),
                 ", ".join(f"{v:.3e}" for v in resolvent))
    output.check("resolvent error halves across the panel", resolvent[-1] <= 0.5 * resolvent[0],
                 f"{resolvent[-1]:.3e} vs {resolvent[0]:.3e}")
    output.check("semigroup error strictly decreasing in epsilon", strictly_decreasing(semigroup),
                 ", ".join(f"{v:.3e}" for v in semigroup))
    output.summary = {"lambda": config.lambdas[0], "gamma": config.build_kernel().mass_gamma}
    return output


def _wronskian_point(config: ExperimentConfig, eps: float, lam: float) -> list[Any]:
    scaled = config.build_kernel().scaled(eps)
    grid = config.grid()
    pair = solve_pair(scaled, lam, grid)
    k_oracle, _ = shooting_pair(scaled, lam, grid)
    diff = _sup(pair.k.values - k_oracle.values)
    scale = max(1.0, pair.k.sup_norm())
    return [
        eps, lam, pair.wronskian, pair.wronskian_variation(), pair.endpoint_mismatch(),
        diff, diff / scale,
        pair.trace_k.iterations if pair.trace_k else 0,
        pair.trace_l.iterations if pair.trace_l else 0,
    ]


def run_wronskian(config: ExperimentConfig, ctx: RunContext) -> ExperimentOutput:
    jobs = [
        PanelJob(f"eps={eps:g} lambda={lam:g}", _wronskian_point, {"config": config, "eps": eps, "lam": lam})
        for eps in config.epsilons
        for lam in config.lambdas
    ]
    table = ResultTable("wronskian", ["epsilon", "lambda", "wronskian", "relative_variation",
                                      "endpoint_mismatch", "shooting_sup_diff", "shooting_scaled_diff",
                                      "iterations_k", "iterations_l"])
    for row in ctx.manager.run_all(jobs):
        table.add_row(*row)
    output = ExperimentOutput(tables=[table])
    variation = max(table.column("relative_variation"))
    mismatch = max(table.column("endpoint_mismatch"))
    oracle = max(table.column("shooting_scaled_diff"))
    output.check("Wronskian constant across nodes", variation <= WRONSKIAN_TOL, f"max variation {variation:.3e}")
    output.check("l(a) agrees with k(b)", mismatch <= WRONSKIAN_TOL, f"max mismatch {mismatch:.3e}")
    output.check("Picard matches the shooting oracle", oracle <= ORACLE_TOL,
                 f"max sup-diff / max(1, sup|k|) {oracle:.3e}")
    return output


BUILT_IN_KERNELS = {"box": box_kernel, "triangle": triangle_kernel, "gaussian": gaussian_kernel}


def _contraction_point(config: ExperimentConfig, name: str, eps: float, lam: float, seed: int) -> list[Any]:
    scaled = BUILT_IN_KERNELS[name]().scaled(eps)
    grid = Grid(config.a, config.b, resolving_step(scaled, config.h))
    ratio = measure_contraction(scaled, lam, grid, seed=seed)
    _, factor = choose_omega(lam, scaled.gamma)
    pair = solve_pair(scaled, lam, grid)
    iteration_ratio = max(pair.trace_k.ratios(RATIO_FLOOR) + pair.trace_l.ratios(RATIO_FLOOR), default=0.0)
    return [name, eps, lam, ratio, iteration_ratio, factor]


def run_contraction(config: ExperimentConfig, ctx: RunContext) -> ExperimentOutput:
    jobs = [
        PanelJob(f"{name} eps={eps:g} lambda={lam:g}", _contraction_point,
                 {"config": config, "name": name, "eps": eps, "lam": lam, "seed": ctx.seed})
        for name in BUILT_IN_KERNELS
        for eps in config.epsilons
        for lam in config.lambdas
    ]
    table = ResultTable("contraction",
                        ["kernel", "epsilon", "lambda", "observed_ratio", "iteration_ratio", "bound"])
    for row in ctx.manager.run_all(jobs):
        table.add_row(*row)
    output = ExperimentOutput(tables=[table])
    worst = max(ratio - bound for ratio, bound in zip(table.column("observed_ratio"), table.column("bound")))
    output.check("Bielecki ratios within the contraction bound", worst <= CONTRACTION_SLACK,
                 f"max(ratio - bound) = {worst:.3e}")
    worst_iteration = max(ratio - bound for ratio, bound in
                          zip(table.column("iteration_ratio"), table.column("bound")))
    output.check("Picard increments shrink at the contraction rate", worst_iteration <= CONTRACTION_SLACK,
                 f"max(iteration ratio - bound) = {worst_iteration:.3e}")
    return output


def run_closedform(config: ExperimentConfig, ctx: RunContext) -> ExperimentOutput:
    p = CLOSED_FORM_PARAMS
    nodes = np.linspace(p.a, p.b, 2001)
    rows = [
        ("k(1)", k_limit(1.0, p), math.exp(2.0) - 1.0, 1e-6),
        ("l(-1)", l_limit(-1.0, p), math.exp(2.0) - 1.0, 1e-6),
        ("k*(0)", k_star(0.0, p), 0.25, 0.0),
        ("l*(0)", l_star(0.0, p), 0.25, 0.0),
        ("survival(0)", survival_expectation(0.0, p), 0.5, 0.0),
        ("survival(0.5)", survival_expectation(0.5, p), 0.75, 0.0),
        ("exp_law_mean(-1,1)", exp_law_mean(-1.0, 1.0), 1.0, 0.0),
        ("exp_law_mean(-1,2)", exp_law_mean(-1.0, 2.0), 4.0 / 3.0, 0.0),
        ("integral of k", k_integral(p), float(simpson(k_limit(nodes, p), x=nodes)), 1e-8),
    ]
    table = ResultTable("closedform", ["quantity", "value", "expected", "abs_error", "passed"])
    output = ExperimentOutput(tables=[table])
    for name, value, expected, tol in rows:
        error = abs(value - expected)
        table.add_row(name, value, expected, error, error <= tol)
        output.check(name, error <= tol, f"{value!r} vs {expected!r}")

    picard = ResultTable("limit_picard", ["lambda", "k_sup_diff", "l_sup_diff", "iterations_k", "iterations_l"])
    grid = config.grid()
    for lam in config.lambdas:
        params = config.limit_params(lam)
        pair = solve_limit_pair(params, grid)
        k_diff = _sup(pair.k.values - np.asarray(k_limit(grid.x, params)))
        l_diff = _sup(pair.l.values - np.asarray(l_limit(grid.x, params)))
        picard.add_row(lam, k_diff, l_diff, pair.trace_k.iterations, pair.trace_l.iterations)
        output.check(f"limit Picard matches closed form at lambda={lam:g}",
                     max(k_diff, l_diff) <= 100.0 * config.h**2, f"{max(k_diff, l_diff):.3e}")
    output.tables.append(picard)
    return output


def _domain_point(config: ExperimentConfig, lam: float) -> list[Any]:
    grid = config.grid()
    p = config.limit_params(lam)
    g = named_function(config.g, grid)
    result = resolvent_limit(g, p)
    report = result.boundary_report
    dense = resolvent_dense(discretize(GeneratorKind.A_LIMIT, grid, gamma=p.gamma), g, lam)
    return [
        lam,
        report.second_derivative_a,
        report.second_derivative_b,
        report.second_derivative_jump,
        report.flux_jump_deviation,
        result.residual_sup,
        resolvent_identity_gap(g, p, lam, 2.0 * lam),
        _sup(dense.values - result.f.values),
    ]


def run_domain(config: ExperimentConfig, ctx: RunContext) -> ExperimentOutput:
    jobs = [PanelJob(f"lambda={lam:g}", _domain_point, {"config": config, "lam": lam}) for lam in config.lambdas]
    table = ResultTable("domain", ["lambda", "f2_at_a", "f2_at_b", "f2_jump_at_0", "flux_jump_deviation",
                                   "residual_sup", "resolvent_identity_gap", "dense_oracle_diff"])
    for row in ctx.manager.run_all(jobs):
        table.add_row(*row)
    output = ExperimentOutput(tables=[table])
    bound = DOMAIN_FACTOR * config.h
    worst = max(max(row[1:5]) for row in table.rows)
    output.check("domain conditions within 50h", worst <= bound, f"worst {worst:.3e}, bound {bound:.3e}")
    gap = max(table.column("resolvent_identity_gap"))
    output.check("resolvent identity", gap <= 100.0 * config.h**2, f"max gap {gap:.3e}")
    return output


def run_lambda_limit(config: ExperimentConfig, ctx: RunContext) -> ExperimentOutput:
    grid = config.grid()
    g = named_function(config.g, grid)
    p = config.limit_params()
    if len(config.lambdas) >= 2:
        study = lambda_to_zero_limit(g, p, config.lambdas)
    else:
        study = lambda_to_zero_limit(g, p)
    table = ResultTable("lambda_limit", ["lambda", "sup_error"])
    for lam, error in zip(study.lambdas, study.sup_errors):
        table.add_row(lam, error)
    output = ExperimentOutput(tables=[table])
    errors = list(study.sup_errors)
    output.check("smallest lambda beats the largest", errors[-1] < errors[0], f"{errors[-1]:.3e} vs {errors[0]:.3e}")
    output.check("limit error at smallest lambda <= 0.01", errors[-1] <= 0.01, f"{errors[-1]:.3e}")
    return output


def _gap_grid(grid: Grid, max_nodes: int = GAP_NODES) -> Grid:
    """Coarsest-needed sub-grid of `grid` with at most `max_nodes` nodes."""
    left = grid.zero_index
    right = grid.size - left - 1
    common = math.gcd(left, right)
    for divisor in range(1, common + 1):
        if common % divisor == 0 and (left + right) // divisor + 1 <= max_nodes:
            return Grid(grid.a, grid.b, grid.h * divisor)
    return Grid(grid.a, grid.b, grid.h * common)


def _fixed_point_rows(config: ExperimentConfig, p: LimitParams) -> list[tuple[str, float, float]]:
    grid = config.grid()
    M = discretize(GeneratorKind.A_LIMIT, grid, gamma=p.gamma)
    kstar = grid.function(np.asarray(k_star(grid.x, p)))
    lstar = grid.function(np.asarray(l_star(grid.x, p)))
    stationary = evolve(M, kstar, 5.0, config.time_step).final
    f0 = named_function(config.f0, grid)
    once = projection_P(f0, p)
    span = kstar.scaled(2.0) + lstar.scaled(3.0)
    return [
        (f"A k* (gamma={p.gamma:g})", M.apply(kstar).sup_norm(), FIXED_POINT_TOL + ROUNDOFF / config.h**2),
        (f"e^(5A) k* - k* (gamma={p.gamma:g})", (stationary - kstar).sup_norm(), STATIONARY_TOL),
        (f"P^2 - P (gamma={p.gamma:g})", (projection_P(once, p) - once).sup_norm(), PROJECTION_TOL),
        (f"P f - f on span (gamma={p.gamma:g})", (projection_P(span, p) - span).sup_norm(), PROJECTION_TOL),
    ]


def run_decay(config: ExperimentConfig, ctx: RunContext) -> ExperimentOutput:
    grid = config.grid()
    f0 = named_function(config.f0, grid)
    gammas = sorted({0.0, config.effective_gamma})
    fits = ResultTable("decay", ["gamma", "kappa_fit", "K_fit", "dirichlet_rate", "kappa_over_rate", "passed"])
    gaps = ResultTable("operator_gap", ["gamma", "t", "sup_norm_gap"])
    fixed = ResultTable("fixed_points", ["quantity", "value", "tolerance", "passed"])
    output = ExperimentOutput(tables=[fits, gaps, fixed])

    for gamma in gammas:
        p = LimitParams(config.a, config.b, gamma)
        fit = decay_rate(discretize(GeneratorKind.A_LIMIT, grid, gamma=gamma), f0, p)
        ratio = fit.kappa_fit / fit.dirichlet_rate
        fits.add_row(gamma, fit.kappa_fit, fit.K_fit, fit.dirichlet_rate, ratio, fit.passed)
        output.check(f"kappa_fit >= 0.95 Dirichlet rate (gamma={gamma:g})", fit.passed, f"ratio {ratio:.4f}")
        if gamma == 0.0 and not fit.degenerate:
            output.check("gamma=0 reproduces the Dirichlet rate within 2%", abs(ratio - 1.0) <= 0.02,
                         f"ratio {ratio:.4f}")

        coarse = discretize(GeneratorKind.A_LIMIT, _gap_grid(grid), gamma=gamma)
        values = [operator_norm_gap(coarse, p, t) for t in GAP_TIMES]
        for t, value in zip(GAP_TIMES, values):
            gaps.add_row(gamma, t, value)
        output.check(f"operator-norm gap decreasing (gamma={gamma:g})", strictly_decreasing(values),
                     ", ".join(f"{v:.3e}" for v in values))

        for name, value, tol in _fixed_point_rows(config, p):
            fixed.add_row(name, value, tol, value <= tol)
            output.check(name, value <= tol, f"{value:.3e} (tol {tol:.1e})")
    return output


def run_blocks(config: ExperimentConfig, ctx: RunContext) -> ExperimentOutput:
    grid = config.grid()
    gamma = config.effective_gamma
    t = max(config.times)
    f0 = named_function(config.f0, grid)
    direct = evolve(discretize(GeneratorKind.A_LIMIT, grid, gamma=gamma), f0, t, config.time_step).final
    blocks = block_semigroup(f0, t, gamma, dt=config.time_step)
    difference = (direct - blocks).sup_norm()
    limits = longtime_blocks(config.b, gamma, config.h)

    table = ResultTable("blocks", ["quantity", "value", "tolerance", "passed"])
    output = ExperimentOutput(tables=[table])
    for name, value, tol in (
        (f"block vs direct at t={t:g}", difference, BLOCK_TOL),
        ("reconstruction of k*, l*", limits.reconstruction_error, 1e-14),
        ("e^(tG1) 1 -> k1", limits.g1_limit_error, BLOCK_LIMIT_TOL),
        ("e^(tG2) 1 -> k2", limits.g2_limit_error, BLOCK_LIMIT_TOL),
    ):
        table.add_row(name, value, tol, value <= tol)
        output.check(name, value <= tol, f"{value:.3e}")
    return output


# ---------------------------------------------------------------------------
# Monte Carlo experiments

def sim_config(config: ExperimentConfig, seed: int, x0: float = 0.0, **overrides: Any) -> SimConfig:
    settings = config.mc
    options = dict(
        x0=x0, a=config.a, b=config.b, dt=settings.dt, n_paths=settings.n_paths, seed=seed,
        bridge_correction=settings.bridge_correction, delta=settings.delta,
        local_time_method=LocalTimeMethod(settings.estimator),
    )
    options.update(overrides)
    return SimConfig(**options)


def run_law(config: ExperimentConfig, ctx: RunContext) -> ExperimentOutput:
    settings = config.mc
    method = LocalTimeMethod(settings.estimator)
    law = exit_local_time_law(config.a, config.b, settings.n_paths, ctx.seed, settings.dt, settings.delta,
                              method, workers=ctx.workers)
    window = sim_config(config, ctx.seed).window
    bias = law.expected_mean - law.window_mean

    table = ResultTable("law", ["a", "b", "n_paths", "mean", "ci_low", "ci_high", "expected_mean",
                                "window_mean", "corrected_mean", "ks_stat", "ks_pvalue"])
    table.add_row(config.a, config.b, settings.n_paths, law.mean, law.mean_ci[0], law.mean_ci[1],
                  law.expected_mean, law.window_mean, law.mean + bias, law.ks_stat, law.ks_pvalue)
    output = ExperimentOutput(tables=[table])
    if settings.dump_samples:
        output.tables.append(ResultTable("law_samples", ["local_time"], [[v] for v in law.samples.tolist()]))
    output.check("99% CI of the window-corrected mean contains the exponential mean",
                 law.ci_contains(law.window_mean),
                 f"corrected mean {law.mean + bias:.5f}, CI [{law.mean_ci[0] + bias:.5f}, {law.mean_ci[1] + bias:.5f}]")
    ks_bound = max(LAW_KS_TOL, 1.63 / math.sqrt(settings.n_paths))
    output.check("KS distance to the exponential law", law.ks_stat <= ks_bound,
                 f"{law.ks_stat:.4f} (bound {ks_bound:.4f})")
    output.summary = {"ci_contains_expected_mean": law.ci_contains(law.window_mean), "window": window,
                      "window_bias": bias, "estimator": method}
    return output


def _survival_row(config: ExperimentConfig, p: LimitParams, x: float, seed: int, workers: int) -> list[Any]:
    estimate = estimate_survival(x, p, sim_config(config, seed, x0=x), workers=workers)
    analytic = float(survival_expectation(x, p))
    z = (estimate.estimate - analytic) / estimate.std_error if estimate.std_error > 0 else 0.0
    return [
        x, estimate.estimate, estimate.std_error, analytic, z,
        estimate.killed_estimate, estimate.killed_std_error,
        estimate.at_a, estimate.at_a_error, float(l_star(x, p)),
        estimate.at_b, estimate.at_b_error, float(k_star(x, p)), estimate.agreement(),
    ]


def run_survival(config: ExperimentConfig, ctx: RunContext) -> ExperimentOutput:
    p = config.limit_params()
    jobs = [
        PanelJob(f"x={x:g}", _survival_row, {"config": config, "p": p, "x": x, "seed": ctx.seed, "workers": ctx.workers})
        for x in config.mc.x
    ]
    table = ResultTable("survival", ["x", "estimate", "std_error", "analytic", "z_score",
                                     "killed_estimate", "killed_std_error", "at_a", "at_a_error", "l_star",
                                     "at_b", "at_b_error", "k_star", "weighted_killed_z"])
    for row in ctx.manager.run_all(jobs):
        table.add_row(*row)

    output = ExperimentOutput(tables=[table])
    for row in table.rows:
        x, est, se, analytic = row[0], row[1], row[2], row[3]
        killed, killed_se = row[5], row[6]
        output.check(f"weighted estimate at x={x:g}", abs(est - analytic) <= MC_SIGMAS * se,
                     f"{est:.5f} vs {analytic:.5f} (se {se:.2e})")
        output.check(f"killed estimate at x={x:g}",
                     abs(killed - analytic) <= MC_SIGMAS * killed_se,
                     f"{killed:.5f} vs {analytic:.5f} (se {killed_se:.2e})")
        output.check(f"capture at a from x={x:g}", abs(row[7] - row[9]) <= MC_SIGMAS * row[8],
                     f"{row[7]:.5f} vs {row[9]:.5f}")
        output.check(f"capture at b from x={x:g}", abs(row[10] - row[12]) <= MC_SIGMAS * row[11],
                     f"{row[10]:.5f} vs {row[12]:.5f}")
        output.check(f"weighted and killed estimators agree at x={x:g}", row[13] <= MC_SIGMAS,
                     f"z = {row[13]:.2f}")
    return output


def run_mechanisms(config: ExperimentConfig, ctx: RunContext) -> ExperimentOutput:
    kernel = config.build_kernel()
    p = LimitParams(config.a, config.b, kernel.mass_gamma)
    x = config.mc.x[0]
    t = max(config.times)
    result = compare_mechanisms(x, t, p, kernel, config.epsilons, sim_config(config, ctx.seed, x0=x),
                                h=config.h, workers=ctx.workers)
    table = ResultTable("mechanisms", ["mechanism", "epsilon", "estimate", "std_error", "pde_value"])
    for row in result.rows:
        table.add_row(row.mechanism, row.epsilon, row.estimate, row.std_error, row.pde_value)
    output = ExperimentOutput(tables=[table])
    settings = sim_config(config, ctx.seed)
    bias = p.gamma * 0.5 * settings.window if settings.local_time_method is LocalTimeMethod.OCCUPATION else 0.0
    budget = bias + config.h**2
    output.check("mechanisms agree with each other and with the PDE", result.agrees(budget, MC_SIGMAS),
                 f"budget {budget:.4f}")
    return output


EXPERIMENTS: dict[str, Experiment] = {
    "convergence": run_convergence,
    "wronskian": run_wronskian,
    "contraction": run_contraction,
    "closedform": run_closedform,
    "domain": run_domain,
    "lambda_limit": run_lambda_limit,
    "decay": run_decay,
    "blocks": run_blocks,
    "law": run_law,
    "locality": run_law,
    "survival": run_survival,
    "mechanisms": run_mechanisms,
}


def run_experiment(
    config: ExperimentConfig,
    out_dir: Path,
    workers: int = 1,
    seed: int = 0,
    listener: Optional[ListenerCallable] = None,
) -> RunOutcome:
    """Run one experiment and write its CSV/JSON artifacts plus the manifest."""
    experiment = EXPERIMENTS.get(config.experiment)
    if experiment is None:
        raise ConfigError(f"experiment: unknown experiment {config.experiment!r}; "
                          f"expected one of {', '.join(sorted(EXPERIMENTS))}")
    writer = ArtifactWriter(out_dir)
    started = time.perf_counter()
    with ExperimentManager(max_workers=workers) as manager:
        if listener is not None:
            manager.add_listener(listener)
        output = experiment(config, RunContext(manager, workers, seed))
    elapsed = time.perf_counter() - started
    log.info("experiment %s finished in %.2fs", config.experiment, elapsed)

    for table in output.tables:
        writer.write_table(table)
    writer.write_json(f"{config.experiment}.json", {
        "experiment": config.experiment,
        "seed": seed,
        "summary": output.summary,
        "checks": output.checks,
    })
    manifest = writer.write_manifest(config.experiment, config.to_dict(), seed, output.checks,
                                     {"total": elapsed})
    return RunOutcome(manifest, output)
