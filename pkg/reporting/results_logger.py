"""
Append-only results journal for experiment runs.

Every record is chained to the previous one by a SHA-256 hash, so edits or
deletions inside journal.jsonl are detectable. Numeric results also go to
results.csv, which carries no timestamps and is byte-identical across
reruns of the same config and seed.
"""
import hashlib
import json
import uuid
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from config.settings import OUTPUT_CONFIG
from utils.errors import LedgerCorruptionError
from utils.file_utils import append_csv, to_plain
from utils.logger import get_logger

logger = get_logger(__name__)

RESULT_COLUMNS = ["experiment", "n", "reps", "estimate", "se", "threshold", "holds"]


@dataclass
class ResultRow:
    """One numeric outcome: an estimate, its standard error and the threshold it was checked against."""

    experiment: str
    n: Optional[int]
    reps: Optional[int]
    estimate: float
    se: Optional[float]
    threshold: Optional[float]
    holds: bool

    def to_dict(self) -> Dict[str, Any]:
        return to_plain(asdict(self))


class ResultsJournal:
    """Hash-chained journal plus the results table of one output directory."""

    def __init__(self, out_dir: Union[str, Path] = OUTPUT_CONFIG["out_dir"]):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(exist_ok=True, parents=True)
        self.journal_file = self.out_dir / OUTPUT_CONFIG["journal_file"]
        self.results_file = self.out_dir / OUTPUT_CONFIG["results_csv"]
        logger.debug(f"Results journal at {self.journal_file}")

    @staticmethod
    def _compute_hash(prev_hash: Optional[str], entry: Dict[str, Any]) -> str:
        """SHA-256 over the previous hash and the entry's sorted-key JSON."""
        hasher = hashlib.sha256()
        if prev_hash:
            hasher.update(prev_hash.encode("utf-8"))
        hasher.update(json.dumps(entry, sort_keys=True).encode("utf-8"))
        return hasher.hexdigest()

    def _get_last_hash(self) -> Optional[str]:
        if not self.journal_file.exists():
            return None
        last_line = None
        with open(self.journal_file, "r", encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    last_line = line.strip()
        if not last_line:
            return None
        try:
            return json.loads(last_line).get("hash")
        except json.JSONDecodeError:
            raise LedgerCorruptionError(f"last journal line is not JSON: {self.journal_file}", module="reporting")

    def log_event(self, experiment: str, action: str, details: Optional[Dict[str, Any]] = None,
                  status: str = "success") -> str:
        """
        Append one record to the journal.

        Args:
            experiment: Experiment name the record belongs to.
            action: What happened ("start", "replication", "result", "artifact", "finish", "error").
            details: JSON-serializable payload.
            status: "success", "failed" or "error".

        Returns:
            The record's event_id.
        """
        event_id = str(uuid.uuid4())
        entry = {
            "event_id": event_id,
            "timestamp": datetime.now().isoformat(),
            "experiment": experiment,
            "action": action,
            "status": status,
            "details": to_plain(details or {}),
        }
        try:
            prev_hash = self._get_last_hash()
            entry["prev_hash"] = prev_hash
            entry["hash"] = self._compute_hash(prev_hash, entry)
            with open(self.journal_file, "a", encoding="utf-8") as f:
                f.write(json.dumps(entry) + "\n")
        except OSError as e:
            logger.error(f"Failed to write journal record: {e}")
            raise
        logger.debug(f"Journal record {action} for {experiment}: {event_id}")
        return event_id

    def record_results(self, rows: Iterable[ResultRow]) -> int:
        """Append rows to results.csv and journal each one."""
        rows = list(rows)
        append_csv(self.results_file, RESULT_COLUMNS, [r.to_dict() for r in rows])
        for r in rows:
            self.log_event(r.experiment, "result", r.to_dict(), status="success" if r.holds else "failed")
        return len(rows)

    def get_records(self, experiment: Optional[str] = None, action: Optional[str] = None,
                    status: Optional[str] = None, limit: int = 1000) -> List[Dict[str, Any]]:
        records: List[Dict[str, Any]] = []
        if not self.journal_file.exists():
            return records
        with open(self.journal_file, "r", encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError:
                    logger.warning(f"Invalid JSON in journal {self.journal_file}")
                    continue
                if experiment and entry.get("experiment") != experiment:
                    continue
                if action and entry.get("action") != action:
                    continue
                if status and entry.get("status") != status:
                    continue
                records.append(entry)
                if len(records) >= limit:
                    break
        return records

    def verify_chain(self) -> Dict[str, Any]:
        """
        Recompute every hash in order.

        Returns:
            {"valid": bool, "records": int, "first_bad": line number or None}
        """
        prev_hash = None
        count = 0
        if not self.journal_file.exists():
            return {"valid": True, "records": 0, "first_bad": None}
        with open(self.journal_file, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError:
                    return {"valid": False, "records": count, "first_bad": lineno}
                stored = entry.pop("hash", None)
                if entry.get("prev_hash") != prev_hash or self._compute_hash(prev_hash, entry) != stored:
                    logger.warning(f"Journal chain breaks at line {lineno}")
                    return {"valid": False, "records": count, "first_bad": lineno}
                prev_hash = stored
                count += 1
        return {"valid": True, "records": count, "first_bad": None}
