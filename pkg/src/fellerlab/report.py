"""Rich table rendering for labcli results and saved manifests."""
from __future__ import annotations

from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from rich.console import Console
from rich.table import Table
from termcolor import colored

from .experiments.artifacts import Check, ResultTable, load_manifest, read_csv

PASS = "PASS"
FAIL = "FAIL"


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return PASS if value else FAIL
    if isinstance(value, float):
        return f"{value:.6g}"
    if value is None:
        return "-"
    return str(getattr(value, "value", value))


def _format_cell(text: str) -> str:
    """CSV text back into display form: booleans as PASS/FAIL, long floats shortened."""
    if text in ("true", "false"):
        return PASS if text == "true" else FAIL
    try:
        number = float(text)
    except ValueError:
        return text or "-"
    return text if text.lstrip("-").isdigit() else f"{number:.6g}"


# ---------------------------------------------------------------------------
# Shared render helpers (also used by the CLI commands)

def render_rows(console: Console, title: str, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    table = Table(title=title)
    for index, name in enumerate(header):
        table.add_column(name, justify="left" if index == 0 else "right")
    count = 0
    for row in rows:
        count += 1
        table.add_row(*row)
    if count == 0:
        console.print(colored(f"{title}: no rows.", "yellow"))
    else:
        console.print(table)


def render_table(console: Console, table: ResultTable) -> None:
    render_rows(console, table.name, table.header, ([format_value(v) for v in row] for row in table.rows))


def render_fields(console: Console, title: str, values: Mapping[str, Any]) -> None:
    table = Table(title=title)
    table.add_column("Field")
    table.add_column("Value", justify="right")
    for key, value in values.items():
        table.add_row(key, format_value(value))
    console.print(table)


def render_checks(console: Console, checks: Sequence[Check | Mapping[str, Any]]) -> bool:
    """Print one PASS/FAIL row per check; True when all passed."""
    table = Table(title="Checks")
    table.add_column("Check")
    table.add_column("Result")
    table.add_column("Detail")
    all_passed = True
    for check in checks:
        item = check if isinstance(check, Check) else Check(check["name"], bool(check["passed"]), check.get("detail", ""))
        all_passed &= item.passed
        table.add_row(item.name, PASS if item.passed else FAIL, item.detail)
    if checks:
        console.print(table)
    return all_passed


def render_manifest(console: Console, path: Path | str) -> bool:
    """Render every CSV artifact of a run and its checks; True when all checks passed."""
    manifest = load_manifest(path)
    root = Path(manifest["_root"])
    # Read everything before printing so a bad artifact leaves no partial table.
    tables = [
        (item["name"], *read_csv(root / item["name"]))
        for item in manifest["artifacts"]
        if item.get("kind") == "csv"
    ]
    console.print(f"Experiment: {manifest.get('experiment', '?')}  seed={manifest.get('seed', '?')}")
    for name, header, rows in tables:
        render_rows(console, name, header, ([_format_cell(cell) for cell in row] for row in rows))
    passed = render_checks(console, manifest.get("checks", []))
    console.print(colored("All checks passed." if passed else "Some checks failed.", "green" if passed else "red"))
    return passed
