import json
import unittest
from pathlib import Path
from tempfile import TemporaryDirectory

from fellerlab.experiments import ExperimentConfig
from fellerlab.experiments.config import named_function
from fellerlab.numerics import ConfigError, Grid


class ExperimentConfigTests(unittest.TestCase):
    def test_defaults(self) -> None:
        config = ExperimentConfig.from_dict({"experiment": "wronskian"})
        self.assertEqual((config.a, config.b, config.h), (-1.0, 1.0, 1e-3))
        self.assertEqual(config.kernel["kind"], "box")
        self.assertEqual(config.mc.estimator, "occupation")
        self.assertEqual(config.time_step, config.h)
        self.assertIsNone(config.seed)

    def test_effective_gamma(self) -> None:
        config = ExperimentConfig.from_dict({"experiment": "x"})
        self.assertAlmostEqual(config.effective_gamma, 2.0, places=10)
        explicit = ExperimentConfig.from_dict({"experiment": "x", "gamma": 0.5, "dt": 0.01})
        self.assertEqual(explicit.effective_gamma, 0.5)
        self.assertEqual(explicit.time_step, 0.01)
        self.assertEqual(explicit.limit_params(2.0).lam, 2.0)

    def test_field_errors_name_the_field(self) -> None:
        cases = [
            ({"experiment": "x", "b": 0.0}, "b:"),
            ({"experiment": "x", "h": 0.3}, "h:"),
            ({"experiment": "x", "lambdas": []}, "lambdas:"),
            ({"experiment": "x", "epsilons": [2.0]}, "epsilons:"),
            ({"experiment": "x", "g": "tan"}, "g:"),
            ({"experiment": "x", "kernel": {"kind": "wedge"}}, "kernel:"),
            ({"experiment": "x", "mc": {"estimator": "exact"}}, "mc.estimator:"),
            ({"experiment": "x", "mc": {"x": [5.0]}}, "mc.x:"),
            ({"experiment": "x", "x": 1}, "x: unknown field"),
            ({"experiment": "x", "mc": {"x0": 1}}, "mc.x0: unknown field"),
            ({"a": -1.0}, "experiment:"),
        ]
        for payload, prefix in cases:
            with self.subTest(payload=payload):
                with self.assertRaises(ConfigError) as ctx:
                    ExperimentConfig.from_dict(payload)
                self.assertTrue(str(ctx.exception).startswith(prefix), str(ctx.exception))

    def test_round_trip_through_dict(self) -> None:
        config = ExperimentConfig.from_dict({"experiment": "law", "mc": {"n_paths": 50}})
        again = ExperimentConfig.from_dict(config.to_dict())
        self.assertEqual(again, config)

    def test_load(self) -> None:
        with TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "run.json"
            path.write_text(json.dumps({"experiment": "closedform", "h": 0.01}), encoding="utf-8")
            self.assertEqual(ExperimentConfig.load(path).h, 0.01)

            bad = Path(tmpdir) / "bad.json"
            bad.write_text("{not json", encoding="utf-8")
            with self.assertRaises(ConfigError):
                ExperimentConfig.load(bad)
            with self.assertRaises(ConfigError):
                ExperimentConfig.load(Path(tmpdir) / "missing.json")

    def test_named_functions(self) -> None:
        grid = Grid(-1.0, 1.0, 0.5)
        self.assertEqual(named_function("linear", grid).values.tolist(), [0.0, 0.25, 0.5, 0.75, 1.0])
        with self.assertRaises(ConfigError):
            named_function("tan", grid)


if __name__ == "__main__":  # pragma: no cover
    unittest.main()
