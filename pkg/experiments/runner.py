"""
Run one named experiment end to end: validate, execute, persist, journal.
"""
from pathlib import Path
from typing import Optional

from experiments.registry import ExperimentOutcome, ExperimentRegistry, RunContext, experiment_registry
from reporting.results_logger import RESULT_COLUMNS, ResultsJournal
from schemas.experiment_schema import ExperimentConfig
from utils.errors import LabError
from utils.file_utils import write_csv, write_json
from utils.logger import get_logger

logger = get_logger(__name__)


def run(config: ExperimentConfig, registry: Optional[ExperimentRegistry] = None) -> ExperimentOutcome:
    """
    Execute ``config.experiment`` and write its artifacts under out_dir/<experiment>/.

    The run directory gets config.json, results.csv and summary.json next to the
    experiment's own CSV/JSON files; none of them carries a timestamp. Progress
    and results are also appended to the hash-chained journal of out_dir.

    Raises:
        ConfigurationError: unknown experiment or a config the modules reject.
        LabError: any module failure, after it has been journaled.
    """
    registry = registry or experiment_registry
    entry = registry.get(config.experiment)
    out = Path(config.out_dir) / config.experiment
    out.mkdir(parents=True, exist_ok=True)
    journal = ResultsJournal(config.out_dir)

    journal.log_event(config.experiment, "start", {"seed": config.seed, "reps": config.reps, "n": config.n})
    write_json(out / "config.json", config.model_dump())
    logger.info(f"Running experiment '{config.experiment}' into {out}")

    try:
        outcome = entry.runner(config, RunContext(config=config, out=out, journal=journal))
    except LabError as e:
        logger.error(f"Experiment '{config.experiment}' failed: {e}")
        journal.log_event(config.experiment, "error", {"kind": e.kind, "module": e.module,
                                                       "replication": e.replication, "message": e.message},
                          status="error")
        raise

    outcome.artifacts = [Path(a).name for a in outcome.artifacts]
    write_csv(out / "results.csv", RESULT_COLUMNS, [r.to_dict() for r in outcome.rows])
    write_json(out / "summary.json", outcome.to_dict())
    journal.record_results(outcome.rows)
    for name in outcome.artifacts:
        journal.log_event(config.experiment, "artifact", {"file": name})

    status = "success" if outcome.passed else "failed"
    journal.log_event(config.experiment, "finish", {"passed": outcome.passed, "checks": len(outcome.rows)},
                      status=status)
    logger.info(f"Experiment '{config.experiment}' finished: {len(outcome.rows)} checks, "
                f"{'all passed' if outcome.passed else 'some failed'}")
    return outcome
