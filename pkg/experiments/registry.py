import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from pydantic import ValidationError

from config.settings import OUTPUT_CONFIG
from reporting.results_logger import ResultRow, ResultsJournal
from schemas.experiment_schema import ExperimentConfig
from utils.errors import ConfigurationError
from utils.file_utils import to_plain
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class ExperimentOutcome:
    experiment: str
    rows: List[ResultRow] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.holds for r in self.rows)

    def to_dict(self) -> Dict[str, Any]:
        return {"experiment": self.experiment, "passed": self.passed, "rows": [r.to_dict() for r in self.rows],
                "artifacts": list(self.artifacts), "summary": to_plain(self.summary)}


@dataclass
class RunContext:
    """Where an experiment writes, and the journal it flushes progress to."""

    config: ExperimentConfig
    out: Path
    journal: ResultsJournal

    def path(self, name: str) -> Path:
        return self.out / name

    def flush(self, stage: str) -> Callable[[int, Any], None]:
        """Callback journaling each finished replication of ``stage``."""
        def record(index: int, _result: Any) -> None:
            self.journal.log_event(self.config.experiment, "replication", {"stage": stage, "index": index})
        return record

    def row(self, check: str, estimate: float, threshold: Optional[float], holds: bool, n: Optional[int] = None,
            reps: Optional[int] = None, se: Optional[float] = None) -> ResultRow:
        return ResultRow(experiment=f"{self.config.experiment}[{check}]", n=n, reps=reps, estimate=float(estimate),
                         se=None if se is None else float(se),
                         threshold=None if threshold is None else float(threshold), holds=bool(holds))


ExperimentFn = Callable[[ExperimentConfig, RunContext], ExperimentOutcome]


@dataclass
class ExperimentEntry:
    name: str
    description: str
    runner: ExperimentFn


class ExperimentRegistry:
    """Named experiments and their default configs."""

    def __init__(self, config_file: str = OUTPUT_CONFIG["experiment_config_file"]):
        self.config_file = config_file
        self.entries: Dict[str, ExperimentEntry] = {}
        self.defaults: Dict[str, Dict[str, Any]] = {}
        self.load_defaults()

    def load_defaults(self):
        """Load per-experiment defaults from the JSON config file."""
        path = self.config_file
        if not os.path.isabs(path):
            path = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), path)
        try:
            if os.path.exists(path):
                with open(path, "r", encoding="utf-8") as f:
                    self.defaults = json.load(f)
                logger.debug(f"Loaded defaults for {len(self.defaults)} experiments from {path}")
            else:
                logger.warning(f"Experiment config file not found: {path}")
                self.defaults = {}
        except json.JSONDecodeError as e:
            logger.error(f"Error loading experiment configs: {e}")
            raise ConfigurationError(f"{path} is not valid JSON: {e}", module="experiments")

    def register(self, name: str, description: str) -> Callable[[ExperimentFn], ExperimentFn]:
        def decorator(fn: ExperimentFn) -> ExperimentFn:
            self.entries[name] = ExperimentEntry(name=name, description=description, runner=fn)
            return fn
        return decorator

    def get(self, name: str) -> ExperimentEntry:
        entry = self.entries.get(name)
        if entry is None:
            raise ConfigurationError(f"unknown experiment '{name}'", module="experiments")
        return entry

    def list_experiments(self) -> List[Dict[str, str]]:
        """Names and one-line descriptions, in registration order."""
        return [{"name": e.name, "description": e.description} for e in self.entries.values()]

    def is_registered(self, name: str) -> bool:
        return name in self.entries

    def build_config(self, name: str, file_values: Optional[Dict[str, Any]] = None,
                     overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
        """
        Merge registry defaults, file values and command-line overrides (later wins).

        Raises:
            ConfigurationError: unknown experiment or a value the schema rejects.
        """
        self.get(name)
        merged: Dict[str, Any] = {}
        params: Dict[str, Any] = {}
        for layer in (self.defaults.get(name, {}), file_values or {}, overrides or {}):
            layer = {k: v for k, v in layer.items() if v is not None}
            params.update(layer.get("params", {}))
            merged.update({k: v for k, v in layer.items() if k != "params"})
        merged["experiment"] = name
        merged["params"] = params
        try:
            return ExperimentConfig(**merged)
        except ValidationError as e:
            raise ConfigurationError(f"invalid config for '{name}': {e}", module="schemas") from e


# Global experiment registry instance
experiment_registry = ExperimentRegistry()
