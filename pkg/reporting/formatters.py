import csv
import io
import json
from typing import Any, Dict, List

from reporting.results_logger import RESULT_COLUMNS
from utils.file_utils import to_plain


class OutputFormatter:
    """Render experiment outcomes for the command line."""

    @staticmethod
    def format_json(outcomes: List[Dict[str, Any]], pretty: bool = True) -> str:
        if pretty:
            return json.dumps(to_plain(outcomes), indent=2, sort_keys=True, default=str)
        return json.dumps(to_plain(outcomes), sort_keys=True, default=str)

    @staticmethod
    def format_text(outcomes: List[Dict[str, Any]]) -> str:
        output = []
        for outcome in outcomes:
            output.append(f"=== {outcome.get('experiment', 'N/A')} ===")
            output.append(f"Status: {'PASS' if outcome.get('passed') else 'FAIL'}")
            for row in outcome.get("rows", []):
                se = row.get("se")
                thr = row.get("threshold")
                se_txt = f" +- {se:.3g}" if isinstance(se, (int, float)) else ""
                thr_txt = f" (threshold {thr:.4g})" if isinstance(thr, (int, float)) else ""
                mark = "ok" if row.get("holds") else "FAIL"
                label = f"n={row['n']}" if row.get("n") is not None else "-"
                output.append(f"  [{mark}] {label}: {row.get('estimate', float('nan')):.6g}{se_txt}{thr_txt}")
            for path in outcome.get("artifacts", []):
                output.append(f"  artifact: {path}")
            output.append("")
        return "\n".join(output)

    @staticmethod
    def format_csv(outcomes: List[Dict[str, Any]]) -> str:
        if not outcomes:
            return ""
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for outcome in outcomes:
            for row in outcome.get("rows", []):
                writer.writerow({k: row.get(k) for k in RESULT_COLUMNS})
        return buffer.getvalue()

    @classmethod
    def render(cls, outcomes: List[Dict[str, Any]], fmt: str = "text") -> str:
        if fmt == "json":
            return cls.format_json(outcomes)
        if fmt == "csv":
            return cls.format_csv(outcomes)
        return cls.format_text(outcomes)
