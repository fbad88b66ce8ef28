"""Central environment and configuration helpers for the labcli."""
from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

DEFAULT_ENV_PATH = Path.cwd() / ".env"
DEFAULT_OUTPUT_DIR = "lab-out"
DEFAULT_SEED = 20240917
DEFAULT_LOG_LEVEL = "WARNING"

_TRUTHY = {"1", "true", "yes", "on"}


def load_dotenv(path: Optional[Path] = None) -> None:
    """Load environment variables from a simple KEY=VALUE .env file."""
    env_path = Path(path or DEFAULT_ENV_PATH)
    if not env_path.exists():
        return

    for raw in env_path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if (value.startswith("\"") and value.endswith("\"")) or (
            value.startswith("'") and value.endswith("'")
        ):
            value = value[1:-1]
        os.environ.setdefault(key, value)


def is_deterministic() -> bool:
    """LAB_DETERMINISTIC=1 forces single-worker execution."""
    return os.environ.get("LAB_DETERMINISTIC", "").strip().lower() in _TRUTHY


def resolve_workers(override: Optional[int] = None) -> int:
    """Worker count from --threads, then LAB_THREADS, then the CPU count."""
    if is_deterministic():
        return 1
    if override is not None:
        choice = override
    else:
        raw = os.environ.get("LAB_THREADS", "").strip()
        try:
            choice = int(raw) if raw else (os.cpu_count() or 1)
        except ValueError:
            raise ValueError(f"LAB_THREADS must be an integer, got {raw!r}") from None
    if choice < 1:
        raise ValueError("Worker count must be at least 1.")
    return choice


def resolve_output_dir(override: Optional[str] = None) -> Path:
    """Return the artifact directory from --out or LAB_OUT."""
    return Path(override or os.environ.get("LAB_OUT") or DEFAULT_OUTPUT_DIR)


def get_default_seed() -> int:
    raw = os.environ.get("LAB_SEED", "").strip()
    if not raw:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"LAB_SEED must be an integer, got {raw!r}") from None


def get_log_level() -> str:
    return os.environ.get("LAB_LOG_LEVEL", DEFAULT_LOG_LEVEL).strip().upper() or DEFAULT_LOG_LEVEL


def configure_logging(level: Optional[str] = None) -> None:
    """Route fellerlab loggers through a rich handler on stderr."""
    logger = logging.getLogger("fellerlab")
    logger.setLevel((level or get_log_level()).upper())
    if not any(isinstance(handler, RichHandler) for handler in logger.handlers):
        handler = RichHandler(console=Console(stderr=True), show_path=False, markup=False, rich_tracebacks=False)
        logger.addHandler(handler)
    logger.propagate = False
