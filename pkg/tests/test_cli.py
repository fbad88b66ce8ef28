import io
import json
import os
import unittest
from pathlib import Path
from tempfile import TemporaryDirectory
from unittest.mock import patch

from rich.console import Console

from fellerlab.cli import EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_OK, main


def write_config(root: Path, name: str, payload: dict) -> str:
    path = root / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


class CliTests(unittest.TestCase):
    def setUp(self) -> None:
        self.output = io.StringIO()
        patches = [
            patch("fellerlab.cli.console", Console(file=self.output, width=160)),
            patch.dict(os.environ, {"LAB_DETERMINISTIC": "1"}, clear=True),
        ]
        for item in patches:
            item.start()
            self.addCleanup(item.stop)

    def test_closedform_prints_csv(self) -> None:
        self.assertEqual(main(["closedform", "--what", "survival", "--gamma", "1", "--x", "0", "0.5"]), EXIT_OK)
        lines = self.output.getvalue().splitlines()
        self.assertEqual(lines[0], "x,value")
        self.assertEqual(lines[1:], ["0,0.5", "0.5,0.75"])

    def test_closedform_mean_defaults_to_the_grid(self) -> None:
        self.assertEqual(main(["--h", "0.5", "closedform", "--what", "mean"]), EXIT_OK)
        rows = [line.split(",") for line in self.output.getvalue().splitlines()[1:]]
        self.assertEqual([float(x) for x, _ in rows], [-1.0, -0.5, 0.0, 0.5, 1.0])
        self.assertEqual([float(value) for _, value in rows], [0.0, 0.5, 1.0, 0.5, 0.0])

    def test_resolvent_prints_solution_and_residual(self) -> None:
        code = main(["--h", "0.01", "resolvent", "--eps", "limit", "--lambda", "1", "--g", "cos"])
        self.assertEqual(code, EXIT_OK)
        lines = self.output.getvalue().splitlines()
        self.assertEqual(lines[0], "x,f,residual")
        self.assertEqual(len(lines), 202)
        self.assertTrue(all(float(line.split(",")[1]) >= 0.0 for line in lines[1:]))

    def test_resolvent_rejects_a_bad_epsilon(self) -> None:
        with self.assertRaises(SystemExit), patch("sys.stderr", io.StringIO()):
            main(["resolvent", "--eps", "-0.1"])

    def test_decay_prints_json(self) -> None:
        self.assertEqual(main(["--h", "0.02", "decay", "--gamma", "0", "--f0", "sin_dirichlet"]), EXIT_OK)
        payload = json.loads(self.output.getvalue())
        self.assertEqual(set(payload), {"kappa_fit", "K_fit", "dirichlet_rate"})
        self.assertGreaterEqual(payload["kappa_fit"], 0.95 * payload["dirichlet_rate"])

    def test_run_routes_dt_to_the_path_step_for_monte_carlo(self) -> None:
        seen = []
        with TemporaryDirectory() as tmpdir, patch("fellerlab.cli._run_config", lambda args, config: seen.append(config)):
            root = Path(tmpdir)
            mc = write_config(root, "mc.json", {"experiment": "survival", "h": 0.01})
            pde = write_config(root, "pde.json", {"experiment": "closedform", "h": 0.01})
            self.assertEqual(main(["--dt", "2e-4", "run", mc]), EXIT_OK)
            self.assertEqual(main(["--dt", "2e-4", "run", pde]), EXIT_OK)
        self.assertEqual(seen[0].mc.dt, 2e-4)
        self.assertIsNone(seen[0].dt)
        self.assertEqual(seen[1].dt, 2e-4)

    def test_run_writes_manifest_and_report_reads_it(self) -> None:
        with TemporaryDirectory() as tmpdir:
            root = Path(tmpdir)
            config = write_config(root, "cf.json", {"experiment": "closedform", "h": 0.01, "lambdas": [0.5]})
            out = root / "out"
            self.assertEqual(main(["--out", str(out), "run", config]), EXIT_OK)
            self.assertTrue((out / "manifest.json").exists())
            self.assertTrue((out / "closedform.csv").exists())
            self.assertEqual(main(["report", str(out)]), EXIT_OK)

    def test_reruns_are_byte_identical(self) -> None:
        with TemporaryDirectory() as tmpdir:
            root = Path(tmpdir)
            config = write_config(root, "cf.json", {"experiment": "closedform", "h": 0.01, "lambdas": [0.5]})
            for name in ("first", "second"):
                self.assertEqual(main(["--out", str(root / name), "--seed", "5", "run", config]), EXIT_OK)
            for artifact in ("closedform.csv", "limit_picard.csv", "closedform.json"):
                self.assertEqual((root / "first" / artifact).read_bytes(), (root / "second" / artifact).read_bytes())

    def test_invalid_config_exits_with_usage_code(self) -> None:
        with TemporaryDirectory() as tmpdir:
            root = Path(tmpdir)
            bad_interval = write_config(root, "bad.json", {"experiment": "closedform", "b": 0.0})
            self.assertEqual(main(["--out", str(root / "out"), "run", bad_interval]), EXIT_INVALID)
            self.assertIn("b:", self.output.getvalue())
            unknown = write_config(root, "unknown.json", {"experiment": "nope"})
            self.assertEqual(main(["--out", str(root / "out"), "run", unknown]), EXIT_INVALID)

    def test_failed_check_exits_with_check_code(self) -> None:
        with TemporaryDirectory() as tmpdir:
            root = Path(tmpdir)
            config = write_config(root, "ll.json", {
                "experiment": "lambda_limit", "lambdas": [1.0, 0.5], "g": "one", "h": 0.01,
            })
            self.assertEqual(main(["--out", str(root / "out"), "run", config]), EXIT_CHECK_FAILED)

    def test_report_without_artifacts(self) -> None:
        with TemporaryDirectory() as tmpdir:
            manifest = Path(tmpdir) / "manifest.json"
            manifest.write_text(json.dumps({"experiment": "x", "artifacts": []}), encoding="utf-8")
            self.assertEqual(main(["report", str(manifest)]), EXIT_INVALID)

    def test_evolve_writes_snapshots(self) -> None:
        with TemporaryDirectory() as tmpdir:
            code = main(["--out", tmpdir, "--h", "0.1", "evolve", "--scheme", "dense_exponential", "--t", "0.5", "1.0"])
            self.assertEqual(code, EXIT_OK)
            lines = (Path(tmpdir) / "evolve.csv").read_text(encoding="utf-8").splitlines()
            self.assertEqual(lines[0], "t,x,value")
            self.assertEqual(len(lines), 1 + 2 * 21)
            self.assertTrue(lines[1].startswith("0.5,-1,"))
            self.assertEqual(self.output.getvalue().splitlines(), lines)


if __name__ == "__main__":  # pragma: no cover
    unittest.main()
