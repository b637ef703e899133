"""
Localized score sums Z_{j,k} of both sides, their gaps, and the block-level
gap of the first-order likelihood terms through the Haar expansion of g.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from config.settings import COUPLING_CONFIG
from coupling.embedding import CouplingLedger
from coupling.wiener import WienerFamily
from haar.expansion import DyadicIndex, HaarExpansion, haar_reconstruct, tree_indices
from models.function_class import PerturbedFunction
from utils.errors import InvalidArgumentError, LedgerCorruptionError
from utils.file_utils import write_csv, write_json
from utils.logger import get_logger

logger = get_logger(__name__)

GAP_COLUMNS = ["j", "k", "z1", "z2", "gap", "threshold", "pass"]


def z_threshold_base(m: int, j: int) -> float:
    """(m 2^-j)^(1/4) log m."""
    if m < 2:
        return 0.0
    return (m * 2.0 ** -j) ** 0.25 * math.log(m)


def r_n(gamma_n: float, gamma_prime_n: float, m: int, lam: float) -> float:
    """gamma_n^(1/4) gamma'_n^(3/4) m^(1/4) log m + m^-lam."""
    if m < 2:
        return 1.0
    return gamma_n ** 0.25 * gamma_prime_n ** 0.75 * m ** 0.25 * math.log(m) + m ** -lam


def direct_z(ledger: CouplingLedger) -> np.ndarray:
    """Z_{j,k} = sum of embedded scores of steps whose covariate lies in I_{j,k}, by node id."""
    depth = ledger.depth
    out = np.zeros(2 ** (depth + 1) - 1)
    k = ledger.leaf_positions()
    inside = k > 0
    per_leaf = np.bincount(k[inside] - 1, weights=ledger.values[inside], minlength=2 ** depth)
    level = per_leaf
    for j in range(depth, -1, -1):
        out[2 ** j - 1:2 ** (j + 1) - 1] = level
        if j:
            level = level.reshape(-1, 2).sum(axis=1)
    return out


def ledger_z(ledger: CouplingLedger) -> np.ndarray:
    """
    Z_{j,k} rebuilt from the path increments: what the processes of the
    subtree of (j,k) gave out, plus what steps from inside I_{j,k} took from
    coarser processes.
    """
    depth = ledger.depth
    size = 2 ** (depth + 1) - 1
    inner = ledger.nodes >= 0
    nodes = ledger.nodes[inner]
    inc = ledger.increments[inner]
    subtree = np.bincount(nodes, weights=inc, minlength=size).astype(float)
    for j in range(depth - 1, -1, -1):
        for k in range(1, 2 ** j + 1):
            node = 2 ** j - 1 + k - 1
            c1, c2 = DyadicIndex(j, k).children()
            subtree[node] += subtree[c1.node_id] + subtree[c2.node_id]

    leaf_k = ledger.leaf_positions()[ledger.steps[inner]]
    node_level = np.floor(np.log2(nodes + 1)).astype(np.int64)
    overflow = np.zeros(size)
    for j in range(1, depth + 1):
        routed = node_level < j
        if not np.any(routed):
            continue
        pos = (leaf_k[routed] - 1) >> (depth - j)
        np.add.at(overflow, 2 ** j - 1 + pos, inc[routed])
    return subtree + overflow


@dataclass(eq=False)
class GapReport:
    depth: int
    m: int
    lam: float
    c_lambda: float
    z1: np.ndarray
    z2: np.ndarray
    cross_check: Dict[str, float] = field(default_factory=dict)

    @property
    def levels(self) -> np.ndarray:
        return np.floor(np.log2(np.arange(self.z1.size) + 1)).astype(np.int64)

    @property
    def gaps(self) -> np.ndarray:
        return np.abs(self.z1 - self.z2)

    @property
    def threshold_base(self) -> np.ndarray:
        return np.array([z_threshold_base(self.m, int(j)) for j in self.levels])

    @property
    def thresholds(self) -> np.ndarray:
        return self.c_lambda * self.threshold_base

    @property
    def passes(self) -> np.ndarray:
        return self.gaps <= self.thresholds

    @property
    def pass_fraction(self) -> float:
        return float(np.mean(self.passes)) if self.z1.size else 1.0

    def ratios(self) -> np.ndarray:
        """gap / ((m 2^-j)^(1/4) log m), the quantity C_lambda is calibrated on."""
        base = self.threshold_base
        return np.where(base > 0, self.gaps / np.where(base > 0, base, 1.0), 0.0)

    def rows(self) -> List[List[Any]]:
        out = []
        for idx in tree_indices(self.depth):
            n = idx.node_id
            out.append([idx.j, idx.k, float(self.z1[n]), float(self.z2[n]), float(self.gaps[n]),
                        float(self.thresholds[n]), bool(self.passes[n])])
        return out

    def to_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(path, GAP_COLUMNS, [dict(zip(GAP_COLUMNS, r)) for r in self.rows()])

    def to_dict(self) -> Dict[str, Any]:
        return {"depth": self.depth, "m": self.m, "lambda": self.lam, "c_lambda": self.c_lambda,
                "pass_fraction": self.pass_fraction, "max_gap": float(np.max(self.gaps)) if self.z1.size else 0.0,
                "cross_check": dict(self.cross_check)}

    def to_json(self, path: Union[str, Path]) -> Path:
        return write_json(path, self.to_dict())


def _cross_check(ledger: CouplingLedger, tol: float) -> float:
    direct = direct_z(ledger)
    rebuilt = ledger_z(ledger)
    dev = float(np.max(np.abs(direct - rebuilt))) if direct.size else 0.0
    scale = max(1.0, float(np.sum(np.abs(ledger.values))))
    if dev > tol * scale:
        raise LedgerCorruptionError(
            f"{ledger.side}: localized score sums disagree with the path increments by {dev:.3e}",
            module="coupling")
    return dev


def z_statistics(ledger_x: CouplingLedger, ledger_y: CouplingLedger, wf: Optional[WienerFamily] = None,
                 lam: float = 2.0, c_lambda: float = 1.0,
                 tol: float = COUPLING_CONFIG["cross_check_tol"]) -> GapReport:
    """
    Z^1, Z^2 on every node of the tree and their gaps against
    c_lambda (m 2^-j)^(1/4) log m.

    Both sides are cross-checked against their path increments first.

    Raises:
        LedgerCorruptionError: a cross-check deviates by more than
            tol * max(1, sum |value|).
    """
    if ledger_x.depth != ledger_y.depth:
        raise InvalidArgumentError("ledgers were built on trees of different depth", module="coupling")
    if wf is not None and wf.depth != ledger_x.depth:
        raise InvalidArgumentError("ledger depth differs from the Wiener family", module="coupling")
    dev_x = _cross_check(ledger_x, tol)
    dev_y = _cross_check(ledger_y, tol)
    return GapReport(depth=ledger_x.depth, m=ledger_x.m, lam=lam, c_lambda=c_lambda,
                     z1=direct_z(ledger_x), z2=direct_z(ledger_y),
                     cross_check={"first": dev_x, "second": dev_y})


@dataclass
class StrongApproxResult:
    direct: float
    decomposed: float
    s1: float
    s2: float
    residual_gap: float
    threshold: float
    r_n: float

    @property
    def holds(self) -> bool:
        return self.direct <= self.threshold

    @property
    def bound_ok(self) -> bool:
        return self.direct <= self.decomposed * (1.0 + 1e-9) + 1e-12

    def to_dict(self) -> Dict[str, Any]:
        return {"s1": self.s1, "s2": self.s2, "direct": self.direct, "decomposed": self.decomposed,
                "residual_gap": self.residual_gap, "threshold": self.threshold, "r_n": self.r_n,
                "holds": self.holds, "bound_ok": self.bound_ok}


def score_sum(ledger: CouplingLedger, pf: PerturbedFunction) -> float:
    """sum_i g(covariate_i) * embedded score_i."""
    if ledger.m == 0:
        return 0.0
    g = np.asarray(pf.g.evaluate(ledger.covariates), dtype=float)
    return float(np.dot(g, ledger.values))


def strong_approx_gap(pf: PerturbedFunction, report: GapReport, expansion: HaarExpansion,
                      ledger_x: CouplingLedger, ledger_y: CouplingLedger, lam: float = 2.0,
                      c_block: float = 1.0) -> StrongApproxResult:
    """
    |S^1 - S^2| computed directly and bounded through the expansion of g:
    (B-A)^(-1/2) |c0| |dZ_{0,1}| + sum (B-A)^(-1/2) 2^(j/2) |c_{j,k}|
    (|dZ_{j+1,2k-1}| + |dZ_{j+1,2k}|) + |R^1 - R^2|.

    Levels of the expansion beyond depth - 1 are dropped into the residual.
    """
    A, B = expansion.A, expansion.B
    if expansion.j_star > report.depth - 1:
        logger.warning(f"Expansion reaches level {expansion.j_star}; truncating to {report.depth - 1}")
        expansion = expansion.truncated(report.depth - 1)

    s1 = score_sum(ledger_x, pf)
    s2 = score_sum(ledger_y, pf)
    dz = report.z1 - report.z2
    scale = (B - A) ** -0.5
    bound = scale * abs(expansion.c0) * abs(dz[0])
    for idx, c in expansion.items():
        if c == 0.0:
            continue
        left, right = idx.children()
        bound += scale * 2.0 ** (idx.j / 2.0) * abs(c) * (abs(dz[left.node_id]) + abs(dz[right.node_id]))

    def residual_sum(ledger: CouplingLedger) -> float:
        if ledger.m == 0:
            return 0.0
        g = np.asarray(pf.g.evaluate(ledger.covariates), dtype=float)
        approx = np.asarray(haar_reconstruct(expansion, ledger.covariates), dtype=float)
        return float(np.dot(g - approx, ledger.values))

    residual_gap = abs(residual_sum(ledger_x) - residual_sum(ledger_y))
    bound += residual_gap
    rn = r_n(pf.gamma_n, pf.gamma_prime_n, report.m, lam)
    return StrongApproxResult(direct=abs(s1 - s2), decomposed=bound, s1=s1, s2=s2, residual_gap=residual_gap,
                              threshold=c_block * rn, r_n=rn)


def calibrate_constant(ratios: Sequence[float], quantile: float = COUPLING_CONFIG["calibration_quantile"]) -> float:
    """Upper quantile of pilot gap/threshold ratios, frozen as the constant for later runs."""
    values = np.asarray(list(ratios), dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise InvalidArgumentError("calibration needs at least one finite ratio", module="coupling")
    if not 0.0 < quantile <= 1.0:
        raise InvalidArgumentError(f"quantile must lie in (0, 1], got {quantile}", module="coupling")
    const = float(np.quantile(values, quantile))
    logger.info(f"Calibrated constant {const:.4f} at quantile {quantile} of {values.size} ratios")
    return max(const, np.finfo(float).tiny)
