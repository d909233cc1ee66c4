"""Experiment runner, artifact writers, acceptance suite and command line."""

from .acceptance import CRITERIA, CriterionResult, run_acceptance_suite
from .config import ConfigError, ExperimentConfig, SolverSpec, build_config, read_config_file
from .runner import RunArtifact, build_problem, check_traces, read_trace_csv, run

__all__ = [
    "CRITERIA",
    "ConfigError",
    "CriterionResult",
    "ExperimentConfig",
    "RunArtifact",
    "SolverSpec",
    "build_config",
    "build_problem",
    "check_traces",
    "read_config_file",
    "read_trace_csv",
    "run",
    "run_acceptance_suite",
]
