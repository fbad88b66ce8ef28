"""Experiment configs, the panel job manager and artifact output."""
from .artifacts import ArtifactWriter, Check, ResultTable, load_manifest
from .config import ExperimentConfig, MonteCarloSettings
from .manager import ExperimentManager, PanelJob, PanelStatus, PanelUpdate
from .runner import EXPERIMENTS, ExperimentOutput, RunOutcome, run_experiment

__all__ = [
    "ArtifactWriter",
    "Check",
    "EXPERIMENTS",
    "ExperimentConfig",
    "ExperimentManager",
    "ExperimentOutput",
    "MonteCarloSettings",
    "PanelJob",
    "PanelStatus",
    "PanelUpdate",
    "ResultTable",
    "RunOutcome",
    "load_manifest",
    "run_experiment",
]
