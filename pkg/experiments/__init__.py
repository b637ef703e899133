from experiments.registry import ExperimentOutcome, ExperimentRegistry, RunContext, experiment_registry
from experiments import suites  # noqa: F401  registers the named experiments
from experiments.runner import run

__all__ = ["ExperimentOutcome", "ExperimentRegistry", "RunContext", "experiment_registry", "run"]
