"""Command-line entry point for the fellerlab numerical laboratory."""
from __future__ import annotations

import argparse
import json
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np
from rich.console import Console
from termcolor import colored

from .environment import (
    configure_logging,
    get_default_seed,
    load_dotenv,
    resolve_output_dir,
    resolve_workers,
)
from .experiments import ExperimentConfig, MonteCarloSettings, PanelStatus, PanelUpdate, run_experiment
from .experiments.artifacts import ArtifactWriter, render_csv
from .experiments.config import TEST_FUNCTIONS, named_function
from .numerics.base import ConfigError, LabError, NumericalCheckError
from .numerics.closedform import (
    k_limit,
    k_star,
    l_limit,
    l_star,
    local_time_mean,
    survival_expectation,
)
from .numerics.evolution import (
    GeneratorKind,
    Scheme,
    block_semigroup,
    decay_rate,
    discretize,
    evolve,
    longtime_blocks,
)
from .numerics.kernel import kernel_from_spec, resolving_step
from .numerics.models import Grid, LimitParams
from .numerics.picard import choose_omega, measure_contraction, shooting_pair, solve_pair
from .numerics.resolvent import resolvent_eps, resolvent_limit
from .report import render_checks, render_fields, render_manifest, render_rows, render_table

LabAction = Callable[[argparse.Namespace], None]

console = Console()

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_CHECK_FAILED = 3

LIMIT = "limit"

MONTE_CARLO_EXPERIMENTS = ("survival", "law", "mechanisms")

CLOSED_FORMS = {
    "k": k_limit,
    "l": l_limit,
    "kstar": k_star,
    "lstar": l_star,
    "survival": survival_expectation,
    "mean": lambda x, p: local_time_mean(x, p.a, p.b),
}


def run_action(args: argparse.Namespace, action: LabAction) -> int:
    try:
        action(args)
        return EXIT_OK
    except NumericalCheckError as exc:
        console.print(colored(str(exc) or "numerical check failed", "red"))
        return EXIT_CHECK_FAILED
    except (ConfigError, ValueError) as exc:
        message = str(exc) or exc.__class__.__name__
        console.print(colored(message, "red"))
        return EXIT_INVALID
    except LabError as exc:
        message = str(exc) or exc.__class__.__name__
        console.print(colored(message, "red"))
        return EXIT_FAILURE


# ----------------------------------------------------------------------
# Shared helpers

def _kernel(args: argparse.Namespace):
    return kernel_from_spec({"kind": args.kernel, "params": {}})


def _seed(args: argparse.Namespace, config: Optional[ExperimentConfig] = None) -> int:
    if args.seed is not None:
        return args.seed
    if config is not None and config.seed is not None:
        return config.seed
    return get_default_seed()


def _output_dir(args: argparse.Namespace, config: Optional[ExperimentConfig] = None) -> Path:
    if args.out is None and config is not None and config.output_dir:
        return Path(config.output_dir)
    return resolve_output_dir(args.out)


def _progress(update: PanelUpdate) -> None:
    if update.status is PanelStatus.SUCCEEDED:
        console.print(colored(f"  done {update.label}", "green"))
    elif update.status is PanelStatus.FAILED:
        console.print(colored(f"  failed {update.label}: {update.error}", "red"))


def _run_config(args: argparse.Namespace, config: ExperimentConfig) -> None:
    outcome = run_experiment(
        config,
        _output_dir(args, config),
        workers=resolve_workers(args.threads),
        seed=_seed(args, config),
        listener=_progress,
    )
    for table in outcome.output.tables:
        if len(table.rows) <= 50:
            render_table(console, table)
    render_checks(console, outcome.output.checks)
    console.print(f"Manifest written to {outcome.manifest}")
    failed = [check.name for check in outcome.output.checks if not check.passed]
    if failed:
        raise NumericalCheckError("failed checks: " + "; ".join(failed))
    console.print(colored("All checks passed.", "green"))


def _print_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    console.print(render_csv(header, list(rows)), end="", markup=False, highlight=False, soft_wrap=True)


def _raise_on_failures(checks: Sequence[tuple[str, bool]]) -> None:
    failed = [name for name, ok in checks if not ok]
    if failed:
        raise NumericalCheckError("failed checks: " + "; ".join(failed))


# ----------------------------------------------------------------------
# Command handlers

def handle_fixedpoint(args: argparse.Namespace) -> None:
    scaled = _kernel(args).scaled(args.eps)
    grid = Grid(args.a, args.b, args.h)
    rows = []
    for lam in args.lam:
        pair = solve_pair(scaled, lam, grid)
        fine = Grid(args.a, args.b, resolving_step(scaled, args.h))
        ratio = measure_contraction(scaled, lam, fine, seed=_seed(args))
        _, bound = choose_omega(lam, scaled.gamma)
        row = [
            f"{lam:g}", f"{pair.wronskian:.10g}", f"{pair.wronskian_variation():.3e}",
            f"{pair.endpoint_mismatch():.3e}", str(pair.trace_k.iterations if pair.trace_k else "-"),
            f"{ratio:.4f}", f"{bound:.4f}",
        ]
        if args.oracle:
            k_oracle, _ = shooting_pair(scaled, lam, grid)
            row.append(f"{float(np.max(np.abs(pair.k.values - k_oracle.values))):.3e}")
        rows.append(row)
    header = ["lambda", "W", "variation", "l(a)-k(b)", "iterations", "ratio", "bound"]
    if args.oracle:
        header.append("shooting diff")
    render_rows(console, f"Eigenfunctions for {scaled.name} (gamma={scaled.gamma:.10g})", header, rows)


def handle_closedform(args: argparse.Namespace) -> None:
    p = LimitParams(args.a, args.b, args.gamma, args.lam)
    x = np.asarray(args.x, dtype=float) if args.x is not None else Grid(args.a, args.b, args.h).x
    values = np.broadcast_to(CLOSED_FORMS[args.what](x, p), x.shape)
    _print_csv(["x", "value"], zip(x, values))


def handle_resolvent(args: argparse.Namespace) -> None:
    grid = Grid(args.a, args.b, args.h)
    g = named_function(args.g, grid)
    kernel = _kernel(args)
    if args.eps == LIMIT:
        gamma = args.gamma if args.gamma is not None else kernel.mass_gamma
        result = resolvent_limit(g, LimitParams(args.a, args.b, gamma, args.lam))
        checks = [("domain conditions within 50h", result.boundary_report.worst() <= 50.0 * args.h)]
    else:
        result = resolvent_eps(g, args.lam, kernel.scaled(args.eps))
        checks = []
    _print_csv(["x", "f", "residual"], zip(grid.x, result.f.values, result.residual.values))
    _raise_on_failures(checks)


def handle_evolve(args: argparse.Namespace) -> None:
    kind = GeneratorKind(args.kind)
    kernel = _kernel(args)
    scaled = kernel.scaled(args.eps) if kind is GeneratorKind.A_EPS else None
    h = resolving_step(scaled, args.h) if scaled is not None else args.h
    grid = Grid(args.a, args.b, h)
    gamma = args.gamma if args.gamma is not None else kernel.mass_gamma
    M = discretize(kind, grid, kernel=scaled, gamma=gamma)
    f0 = named_function(args.f0, grid)
    times = sorted(args.t)
    dt = args.dt if args.dt is not None else min(h, times[0])
    result = evolve(M, f0, times[-1], dt, Scheme(args.scheme), times=times)

    header = ["t", "x", "value"]
    rows = [[t, x, value] for t, snap in zip(result.times, result.snapshots) for x, value in zip(grid.x, snap.values)]
    _print_csv(header, rows)
    if args.out is not None:
        ArtifactWriter(resolve_output_dir(args.out)).write_csv("evolve.csv", header, rows)
    _raise_on_failures([
        ("positivity", result.is_positive() or float(np.min(f0.values)) < 0.0),
        ("contractivity", result.is_contractive()),
    ])


def handle_decay(args: argparse.Namespace) -> None:
    grid = Grid(args.a, args.b, args.h)
    f0 = named_function(args.f0, grid)
    M = discretize(GeneratorKind.A_LIMIT, grid, gamma=args.gamma)
    fit = decay_rate(M, f0, LimitParams(args.a, args.b, args.gamma))
    payload = {"kappa_fit": fit.kappa_fit, "K_fit": fit.K_fit, "dirichlet_rate": fit.dirichlet_rate}
    console.print_json(json.dumps(payload))
    _raise_on_failures([(f"kappa >= 0.95 rate at gamma={args.gamma:g}", fit.passed)])


def handle_blocks(args: argparse.Namespace) -> None:
    grid = Grid(-args.b, args.b, args.h)
    f0 = named_function(args.f0, grid)
    dt = args.dt if args.dt is not None else args.h
    direct = evolve(discretize(GeneratorKind.A_LIMIT, grid, gamma=args.gamma), f0, args.t, dt).final
    blocks = block_semigroup(f0, args.t, args.gamma, dt=dt)
    limits = longtime_blocks(args.b, args.gamma, args.h)
    difference = (direct - blocks).sup_norm()
    render_fields(console, f"Odd/even blocks (b={args.b:g}, gamma={args.gamma:g}, t={args.t:g})", {
        "sup |block - direct|": difference,
        "reconstruction error": limits.reconstruction_error,
        "e^(tG1)1 - k1": limits.g1_limit_error,
        "e^(tG2)1 - k2": limits.g2_limit_error,
    })
    _raise_on_failures([
        ("block route matches direct route", difference <= 1e-4),
        ("long-time block limits", max(limits.g1_limit_error, limits.g2_limit_error) <= 1e-8),
    ])


def handle_mc(args: argparse.Namespace) -> None:
    settings = MonteCarloSettings(
        n_paths=args.paths,
        dt=args.dt if args.dt is not None else MonteCarloSettings.dt,
        delta=args.delta,
        bridge_correction=not args.no_bridge,
        estimator=args.estimator,
        x=args.x,
        dump_samples=args.dump_samples,
    )
    config = ExperimentConfig(
        experiment=args.experiment,
        a=args.a,
        b=args.b,
        kernel={"kind": args.kernel, "params": {}},
        gamma=args.gamma,
        epsilons=args.eps,
        h=args.h,
        times=[args.t],
        mc=settings,
    )
    _run_config(args, config)


def handle_run(args: argparse.Namespace) -> None:
    config = ExperimentConfig.load(args.config)
    data = config.to_dict()
    if args.h_override is not None:
        data["h"] = args.h
    if args.dt is not None:
        # Path step for Monte Carlo runs, time step everywhere else.
        if config.experiment in MONTE_CARLO_EXPERIMENTS:
            data["mc"] = {**data["mc"], "dt": args.dt}
        else:
            data["dt"] = args.dt
    config = ExperimentConfig.from_dict(data)
    _run_config(args, config)


def handle_report(args: argparse.Namespace) -> None:
    if not render_manifest(console, args.manifest):
        raise NumericalCheckError("the recorded run has failed checks")


# ----------------------------------------------------------------------
# CLI wiring

def _floats(text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from exc


def _epsilon(text: str) -> float | str:
    if text == LIMIT:
        return LIMIT
    value = _floats(text)
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"epsilon must be positive or 'limit', got {text!r}")
    return value


def _add_interval(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--a", type=_floats, default=-1.0, help="Left end (negative)")
    parser.add_argument("--b", type=_floats, default=1.0, help="Right end (positive)")


def _add_kernel(parser: argparse.ArgumentParser, default: str = "box") -> None:
    parser.add_argument("--kernel", choices=["box", "triangle", "gaussian", "zero"], default=default,
                        help="Built-in killing kernel")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labcli",
        description="Numerical laboratory for killed Brownian motion and its limit Feller semigroup",
    )
    parser.add_argument("--out", help="Artifact directory (defaults to $LAB_OUT or ./lab-out)")
    parser.add_argument("--seed", type=int, help="Random seed (defaults to $LAB_SEED)")
    parser.add_argument("--threads", type=int, help="Worker threads (LAB_DETERMINISTIC=1 forces 1)")
    parser.add_argument("--h", type=_floats, default=None, dest="h_override", help="Grid step")
    parser.add_argument("--dt", type=_floats, help="Time step (PDE) or path step (Monte Carlo)")
    parser.add_argument("--log-level", help="Logging level (defaults to $LAB_LOG_LEVEL)")

    sub = parser.add_subparsers(dest="cmd", required=True)

    fixed = sub.add_parser("fixedpoint", help="Solve k_eps, l_eps by Picard iteration")
    _add_interval(fixed)
    _add_kernel(fixed)
    fixed.add_argument("--eps", type=_floats, default=0.1, help="Kernel scale epsilon")
    fixed.add_argument("--lam", type=_floats, nargs="+", default=[0.5, 1.0, 2.0], help="Lambda values")
    fixed.add_argument("--oracle", action="store_true", help="Compare against the shooting ODE solve")
    fixed.set_defaults(func=handle_fixedpoint)

    closed = sub.add_parser("closedform", help="Evaluate the closed-form limit functions")
    _add_interval(closed)
    closed.add_argument("--gamma", type=_floats, default=1.0, help="Interface killing mass")
    closed.add_argument("--lambda", "--lam", type=_floats, default=0.5, dest="lam", help="Lambda")
    closed.add_argument("--what", choices=list(CLOSED_FORMS), default="k", help="Function to tabulate")
    closed.add_argument("--x", type=_floats, nargs="+", help="Points (defaults to the grid of step --h)")
    closed.set_defaults(func=handle_closedform)

    resolvent = sub.add_parser("resolvent", help="Resolvent of the limit generator (and of A_eps)")
    _add_interval(resolvent)
    _add_kernel(resolvent)
    resolvent.add_argument("--eps", type=_epsilon, default=LIMIT,
                           help="Kernel scale, or 'limit' for the limit generator")
    resolvent.add_argument("--gamma", type=_floats, help="Limit gamma (defaults to the kernel mass)")
    resolvent.add_argument("--lambda", "--lam", type=_floats, default=1.0, dest="lam", help="Lambda")
    resolvent.add_argument("--g", choices=sorted(TEST_FUNCTIONS), default="cos", help="Right-hand side")
    resolvent.set_defaults(func=handle_resolvent)

    evolve_parser = sub.add_parser("evolve", help="Evolve f0 under a discretised generator")
    _add_interval(evolve_parser)
    _add_kernel(evolve_parser)
    evolve_parser.add_argument("--kind", choices=["A_eps", "A_limit", "B_dirichlet"], default="A_limit",
                               help="Generator to exponentiate")
    evolve_parser.add_argument("--eps", type=_floats, default=0.1, help="Kernel scale for A_eps")
    evolve_parser.add_argument("--gamma", type=_floats, help="Limit gamma (defaults to the kernel mass)")
    evolve_parser.add_argument("--f0", choices=sorted(TEST_FUNCTIONS), default="one", help="Initial data")
    evolve_parser.add_argument("--t", type=_floats, nargs="+", default=[0.1, 0.5, 1.0], help="Snapshot times")
    evolve_parser.add_argument("--scheme", choices=[s.value for s in Scheme], default=Scheme.CRANK_NICOLSON.value)
    evolve_parser.set_defaults(func=handle_evolve)

    decay = sub.add_parser("decay", help="Fit the exponential approach to the projection P")
    _add_interval(decay)
    decay.add_argument("--gamma", type=_floats, default=0.0, help="Interface killing mass")
    decay.add_argument("--f0", choices=sorted(TEST_FUNCTIONS), default="sin_dirichlet", help="Initial data")
    decay.set_defaults(func=handle_decay)

    blocks = sub.add_parser("blocks", help="Odd/even block decomposition on [-b, b]")
    blocks.add_argument("--b", type=_floats, default=1.0, help="Half-width")
    blocks.add_argument("--gamma", type=_floats, default=1.0, help="Interface killing mass")
    blocks.add_argument("--t", type=_floats, default=1.0, help="Time")
    blocks.add_argument("--f0", choices=sorted(TEST_FUNCTIONS), default="one", help="Initial data")
    blocks.set_defaults(func=handle_blocks)

    mc = sub.add_parser("mc", help="Monte Carlo experiments")
    _add_interval(mc)
    _add_kernel(mc)
    mc.add_argument("--experiment", choices=["survival", "law", "mechanisms"], required=True)
    mc.add_argument("--paths", type=int, default=10_000, help="Number of paths")
    mc.add_argument("--x", type=_floats, nargs="+", default=[0.0, 0.5], help="Starting points")
    mc.add_argument("--gamma", type=_floats, help="Limit gamma (defaults to the kernel mass)")
    mc.add_argument("--eps", type=_floats, nargs="+", default=[0.2, 0.1, 0.05], help="Kernel scales")
    mc.add_argument("--t", type=_floats, default=1.0, help="Horizon for the mechanisms comparison")
    mc.add_argument("--delta", type=_floats, help="Local-time window (defaults to 5 sqrt(dt))")
    mc.add_argument("--estimator", choices=["occupation", "tanaka", "bridge"], default="occupation")
    mc.add_argument("--no-bridge", action="store_true", help="Disable the Brownian-bridge exit correction")
    mc.add_argument("--dump-samples", action="store_true", help="Write raw local-time samples to CSV")
    mc.set_defaults(func=handle_mc)

    run = sub.add_parser("run", help="Run an experiment from a JSON config")
    run.add_argument("config", help="Path to the JSON config")
    run.set_defaults(func=handle_run)

    report = sub.add_parser("report", help="Render the tables of a saved run")
    report.add_argument("manifest", help="manifest.json or the run directory")
    report.set_defaults(func=handle_report)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    args.h = args.h_override if args.h_override is not None else 1e-3
    func: LabAction = args.func  # type: ignore[attr-defined]
    return run_action(args, func)


if __name__ == "__main__":  # Allows `python src/fellerlab/cli.py` for quick tests
    raise SystemExit(main())
