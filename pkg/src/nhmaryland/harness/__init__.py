"""Experiment runner, verification suite and CLI."""

from .config import ExperimentConfig, Kind, build_config
from .experiments import (run_lyapunov_experiment, run_phase_diagram, run_rotation_experiment,
                          run_spectrum_experiment, run_winding_sweep)


def run_verify_suite(cfg: ExperimentConfig):
    """Run the selected checks; returns the list of CheckResult objects."""
    from . import checks

    return [c.run(cfg.tolerances) for c in checks.select(cfg.only)]


__all__ = [
    "ExperimentConfig", "Kind", "build_config", "run_spectrum_experiment", "run_winding_sweep",
    "run_phase_diagram", "run_lyapunov_experiment", "run_rotation_experiment", "run_verify_suite",
]
