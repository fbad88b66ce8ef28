import logging
import os
import unittest
from pathlib import Path
from tempfile import TemporaryDirectory
from unittest.mock import patch

from rich.logging import RichHandler

from fellerlab.environment import (
    DEFAULT_SEED,
    configure_logging,
    get_default_seed,
    get_log_level,
    is_deterministic,
    load_dotenv,
    resolve_output_dir,
    resolve_workers,
)


class EnvironmentTests(unittest.TestCase):
    def test_load_dotenv_sets_missing_values(self) -> None:
        with TemporaryDirectory() as tmp, patch.dict(os.environ, {}, clear=True):
            env_path = Path(tmp) / ".env"
            env_path.write_text("# lab settings\nLAB_SEED=7\nLAB_OUT='runs'\n")
            load_dotenv(env_path)
            self.assertEqual(os.environ["LAB_SEED"], "7")
            self.assertEqual(os.environ["LAB_OUT"], "runs")

    def test_load_dotenv_does_not_override_existing(self) -> None:
        with TemporaryDirectory() as tmp, patch.dict(os.environ, {"LAB_SEED": "1"}, clear=True):
            env_path = Path(tmp) / ".env"
            env_path.write_text("LAB_SEED=2\nLAB_THREADS=3\n")
            load_dotenv(env_path)
            self.assertEqual(os.environ["LAB_SEED"], "1")
            self.assertEqual(os.environ["LAB_THREADS"], "3")

    def test_load_dotenv_ignores_missing_file(self) -> None:
        with TemporaryDirectory() as tmp, patch.dict(os.environ, {}, clear=True):
            load_dotenv(Path(tmp) / "absent.env")
            self.assertEqual(dict(os.environ), {})

    def test_deterministic_mode_forces_one_worker(self) -> None:
        with patch.dict(os.environ, {"LAB_DETERMINISTIC": "1", "LAB_THREADS": "8"}, clear=True):
            self.assertTrue(is_deterministic())
            self.assertEqual(resolve_workers(None), 1)
            self.assertEqual(resolve_workers(4), 1)

    def test_resolve_workers_from_env_and_override(self) -> None:
        with patch.dict(os.environ, {"LAB_THREADS": "3"}, clear=True):
            self.assertFalse(is_deterministic())
            self.assertEqual(resolve_workers(None), 3)
            self.assertEqual(resolve_workers(2), 2)

    def test_resolve_workers_rejects_invalid(self) -> None:
        with patch.dict(os.environ, {"LAB_THREADS": "many"}, clear=True):
            with self.assertRaises(ValueError):
                resolve_workers(None)
        with patch.dict(os.environ, {}, clear=True):
            with self.assertRaises(ValueError):
                resolve_workers(0)

    def test_output_dir(self) -> None:
        with patch.dict(os.environ, {}, clear=True):
            self.assertEqual(resolve_output_dir(None), Path("lab-out"))
            self.assertEqual(resolve_output_dir("here"), Path("here"))
        with patch.dict(os.environ, {"LAB_OUT": "/tmp/lab"}, clear=True):
            self.assertEqual(resolve_output_dir(None), Path("/tmp/lab"))

    def test_seed(self) -> None:
        with patch.dict(os.environ, {}, clear=True):
            self.assertEqual(get_default_seed(), DEFAULT_SEED)
        with patch.dict(os.environ, {"LAB_SEED": "42"}, clear=True):
            self.assertEqual(get_default_seed(), 42)
        with patch.dict(os.environ, {"LAB_SEED": "x"}, clear=True):
            with self.assertRaises(ValueError):
                get_default_seed()

    def test_log_level(self) -> None:
        with patch.dict(os.environ, {}, clear=True):
            self.assertEqual(get_log_level(), "WARNING")
        with patch.dict(os.environ, {"LAB_LOG_LEVEL": "debug"}, clear=True):
            self.assertEqual(get_log_level(), "DEBUG")

    def test_configure_logging_installs_one_rich_handler(self) -> None:
        logger = logging.getLogger("fellerlab")
        saved = list(logger.handlers)
        try:
            configure_logging("info")
            configure_logging("debug")
            handlers = [h for h in logger.handlers if isinstance(h, RichHandler)]
            self.assertEqual(len(handlers), 1)
            self.assertTrue(handlers[0].console.stderr)
            self.assertEqual(logger.level, logging.DEBUG)
            self.assertFalse(logger.propagate)
        finally:
            logger.handlers[:] = saved
            logger.setLevel(logging.NOTSET)
            logger.propagate = True


if __name__ == "__main__":  # pragma: no cover
    unittest.main()
