"""
Blockwise rearrangement of regular design points.

Within block l the i-th point should sit near the (i - 1/2)/m_l quantile of
the center's stationary law. The per-block targets are merged into one sorted
list (ties broken by block) and the sorted design points are dealt out in that
order, which interleaves blocks round-robin when they have equal sizes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from likelihood.partition import BlockPartition
from stationary.transfer import StationaryDensity
from utils.errors import RearrangementError
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class Rearrangement:
    t: np.ndarray
    permutation: np.ndarray
    constant: float

    def to_dict(self) -> Dict[str, Any]:
        return {"constant": self.constant, "permutation": self.permutation.tolist()}


def rearrange_blocks(t: np.ndarray, sd0: StationaryDensity, partition: BlockPartition) -> Rearrangement:
    """
    Returns:
        Rearrangement with the permuted points, the permutation into ``t`` and
        the achieved constant C = max_l max_i m_l |CDF(t_l,i) - (i - 1/2)/m_l|.

    Raises:
        RearrangementError: the partition does not cover exactly len(t) points.
    """
    t = np.asarray(t, dtype=float)
    if sum(partition.sizes) != t.size or partition.n != t.size:
        raise RearrangementError(
            f"partition of {partition.n} indices cannot hold {t.size} design points", module="simulate")

    order = np.argsort(t, kind="stable")
    targets = np.concatenate([(np.arange(1, m + 1) - 0.5) / m for m in partition.sizes])
    block_ids = np.concatenate([np.full(m, l) for l, m in enumerate(partition.sizes)])
    positions = np.concatenate([np.arange(s - 1, s - 1 + m) for s, m in zip(partition.starts, partition.sizes)])
    deal = np.lexsort((block_ids, targets))

    permutation = np.empty(t.size, dtype=np.int64)
    permutation[positions[deal]] = order
    out = t[permutation]

    constant = 0.0
    if t.size:
        sizes = np.concatenate([np.full(m, m) for m in partition.sizes]).astype(float)
        dev = sizes * np.abs(np.asarray(sd0.cdf(out[positions])) - targets)
        constant = float(np.max(dev))
    if partition.K > 1:
        logger.info(f"Rearranged {t.size} design points into {partition.K} blocks, constant C = {constant:.4f}")
    return Rearrangement(t=out, permutation=permutation, constant=constant)
