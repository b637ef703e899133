"""
Empirical tail frequencies of centered interval-localized sums across
replications, with Wilson intervals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import stats

from coupling.embedding import CouplingLedger, subtree_sums
from haar.expansion import tree_indices
from utils.errors import InvalidArgumentError
from utils.file_utils import write_csv
from utils.logger import get_logger

logger = get_logger(__name__)

MIN_REPS = 100
TAIL_COLUMNS = ["j", "k", "threshold", "exceed", "reps", "frequency", "wilson_low", "wilson_high"]


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple:
    if trials < 1:
        return 0.0, 1.0
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def stopping_time_sums(ledger: CouplingLedger) -> np.ndarray:
    """sum_i tau^(i) 1(X_{i-1} in I_{j,k}) for every node, indexed by node id."""
    depth = ledger.depth
    k = ledger.leaf_positions()
    inside = k > 0
    per_leaf = np.bincount(k[inside] - 1, weights=ledger.times[inside], minlength=2 ** depth)
    sums = subtree_sums(per_leaf, depth)
    return np.array([sums[n] for n in range(2 ** (depth + 1) - 1)])


@dataclass
class TailRow:
    j: int
    k: int
    threshold: float
    exceed: int
    reps: int

    @property
    def frequency(self) -> float:
        return self.exceed / self.reps

    @property
    def wilson(self) -> tuple:
        return wilson_interval(self.exceed, self.reps)

    def as_list(self) -> List[Any]:
        low, high = self.wilson
        return [self.j, self.k, self.threshold, self.exceed, self.reps, self.frequency, low, high]


@dataclass
class TailReport:
    rows: List[TailRow] = field(default_factory=list)

    @property
    def max_frequency(self) -> float:
        return max((r.frequency for r in self.rows), default=0.0)

    def to_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(path, TAIL_COLUMNS, [dict(zip(TAIL_COLUMNS, r.as_list())) for r in self.rows])

    def to_dict(self) -> Dict[str, Any]:
        return {"cells": len(self.rows), "max_frequency": self.max_frequency,
                "rows": [dict(zip(TAIL_COLUMNS, r.as_list())) for r in self.rows]}


def mixing_tail_check(sums: np.ndarray, m: int, c_lambda: float, depth: Optional[int] = None,
                      expectations: Optional[Sequence[float]] = None) -> TailReport:
    """
    Frequency over replications of |sum - E sum| > c_lambda sqrt(m 2^-j) log m, per node.

    Args:
        sums: (reps, nodes) array of per-replication sums, nodes in breadth-first order.
        expectations: Known means per node; the replication mean is used when omitted.

    Raises:
        InvalidArgumentError: fewer than 100 replications.
    """
    sums = np.atleast_2d(np.asarray(sums, dtype=float))
    reps, nodes = sums.shape
    if reps < MIN_REPS:
        raise InvalidArgumentError(f"tail frequencies need at least {MIN_REPS} replications, got {reps}",
                                   module="bounds")
    if depth is None:
        depth = int(round(math.log2(nodes + 1))) - 1
    if 2 ** (depth + 1) - 1 != nodes:
        raise InvalidArgumentError(f"{nodes} columns do not form a dyadic tree", module="bounds")
    centre = sums.mean(axis=0) if expectations is None else np.asarray(expectations, dtype=float)
    dev = np.abs(sums - centre[None, :])
    log_m = math.log(m) if m > 1 else 0.0

    report = TailReport()
    for idx in tree_indices(depth):
        n = idx.node_id
        thr = c_lambda * math.sqrt(m * 2.0 ** -idx.j) * log_m
        report.rows.append(TailRow(j=idx.j, k=idx.k, threshold=thr, exceed=int(np.sum(dev[:, n] > thr)),
                                   reps=reps))
    logger.info(f"Tail check at c = {c_lambda:g}: largest exceedance frequency {report.max_frequency:.4f}")
    return report


def exceedance_curve(sums: np.ndarray, m: int, constants: Sequence[float], depth: Optional[int] = None) -> List[float]:
    """Largest exceedance frequency for each constant of a grid."""
    return [mixing_tail_check(sums, m, c, depth).max_frequency for c in constants]
