"""JSON experiment configuration with field-level validation."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np

from ..numerics.base import ConfigError, GridError
from ..numerics.kernel import KillingKernel, kernel_from_spec
from ..numerics.models import Grid, GridFunction, LimitParams

# Named test functions g / f0 on [a, b].
TEST_FUNCTIONS = {
    "one": lambda x, a, b: np.ones_like(x),
    "cos": lambda x, a, b: np.cos(x),
    "sin_dirichlet": lambda x, a, b: np.sin(math.pi * (x - a) / (b - a)),
    "linear": lambda x, a, b: (x - a) / (b - a),
}


def named_function(name: str, grid: Grid) -> GridFunction:
    try:
        fn = TEST_FUNCTIONS[name]
    except KeyError:
        raise ConfigError(f"unknown test function {name!r}; expected one of {', '.join(sorted(TEST_FUNCTIONS))}") from None
    return grid.function(np.asarray(fn(grid.x, grid.a, grid.b), dtype=float))


@dataclass
class MonteCarloSettings:
    n_paths: int = 10_000
    dt: float = 1e-4
    delta: Optional[float] = None
    bridge_correction: bool = True
    estimator: str = "occupation"
    x: list[float] = field(default_factory=lambda: [0.0, 0.5])
    dump_samples: bool = False


@dataclass
class ExperimentConfig:
    experiment: str
    a: float = -1.0
    b: float = 1.0
    kernel: dict[str, Any] = field(default_factory=lambda: {"kind": "box", "params": {}})
    gamma: Optional[float] = None
    lambdas: list[float] = field(default_factory=lambda: [1.0])
    epsilons: list[float] = field(default_factory=lambda: [0.2, 0.1, 0.05])
    h: float = 1e-3
    dt: Optional[float] = None
    times: list[float] = field(default_factory=lambda: [0.1, 0.5, 1.0])
    g: str = "cos"
    f0: str = "one"
    mc: MonteCarloSettings = field(default_factory=MonteCarloSettings)
    output_dir: Optional[str] = None
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        self.validate()

    # ------------------------------------------------------------------
    def validate(self) -> None:
        def fail(name: str, message: str) -> None:
            raise ConfigError(f"{name}: {message}")

        if not self.experiment or not isinstance(self.experiment, str):
            fail("experiment", "must be a non-empty string")
        if not self.a < 0.0:
            fail("a", f"must be negative, got {self.a}")
        if not self.b > 0.0:
            fail("b", f"must be positive, got {self.b}")
        if not self.h > 0.0:
            fail("h", f"must be positive, got {self.h}")
        try:
            Grid(self.a, self.b, self.h)
        except GridError as exc:
            fail("h", str(exc))
        if self.dt is not None and not self.dt > 0.0:
            fail("dt", f"must be positive, got {self.dt}")
        if self.gamma is not None and self.gamma < 0.0:
            fail("gamma", f"must be nonnegative, got {self.gamma}")
        if not self.lambdas or any(lam <= 0.0 for lam in self.lambdas):
            fail("lambdas", f"must be a non-empty list of positive values, got {self.lambdas}")
        if not self.epsilons or any(not 0.0 < eps <= 1.0 for eps in self.epsilons):
            fail("epsilons", f"must be a non-empty list in (0, 1], got {self.epsilons}")
        if not self.times or any(t <= 0.0 for t in self.times):
            fail("times", f"must be a non-empty list of positive times, got {self.times}")
        for name in ("g", "f0"):
            if getattr(self, name) not in TEST_FUNCTIONS:
                fail(name, f"unknown test function {getattr(self, name)!r}")
        if self.mc.n_paths < 1:
            fail("mc.n_paths", f"must be at least 1, got {self.mc.n_paths}")
        if not self.mc.dt > 0.0:
            fail("mc.dt", f"must be positive, got {self.mc.dt}")
        if self.mc.estimator not in ("occupation", "tanaka", "bridge"):
            fail("mc.estimator", f"must be 'occupation', 'tanaka' or 'bridge', got {self.mc.estimator!r}")
        if any(not self.a <= x <= self.b for x in self.mc.x):
            fail("mc.x", f"starting points must lie in [a, b], got {self.mc.x}")
        if not isinstance(self.kernel, Mapping):
            fail("kernel", "must be an object with 'kind' and 'params'")
        try:
            self.build_kernel()
        except ConfigError as exc:
            fail("kernel", str(exc))

    # ------------------------------------------------------------------
    def build_kernel(self) -> KillingKernel:
        return kernel_from_spec(self.kernel)

    @property
    def effective_gamma(self) -> float:
        """The limit γ: explicit, or the mass of the configured kernel."""
        return self.gamma if self.gamma is not None else self.build_kernel().mass_gamma

    def limit_params(self, lam: Optional[float] = None) -> LimitParams:
        return LimitParams(self.a, self.b, self.effective_gamma, lam)

    def grid(self) -> Grid:
        return Grid(self.a, self.b, self.h)

    @property
    def time_step(self) -> float:
        return self.dt if self.dt is not None else self.h

    # ------------------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "ExperimentConfig":
        if not isinstance(payload, Mapping):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown field")
        if "experiment" not in payload:
            raise ConfigError("experiment: required field is missing")
        data = dict(payload)
        mc = data.pop("mc", None) or {}
        if not isinstance(mc, Mapping):
            raise ConfigError("mc: must be an object")
        mc_known = {f.name for f in fields(MonteCarloSettings)}
        mc_unknown = sorted(set(mc) - mc_known)
        if mc_unknown:
            raise ConfigError(f"mc.{mc_unknown[0]}: unknown field")
        try:
            return cls(mc=MonteCarloSettings(**mc), **data)
        except TypeError as exc:
            raise ConfigError(f"config: {exc}") from None

    @classmethod
    def load(cls, path: Path | str) -> "ExperimentConfig":
        config_path = Path(path)
        try:
            payload = json.loads(config_path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file {config_path} does not exist") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_path} is not valid JSON: {exc}") from None
        return cls.from_dict(payload)
