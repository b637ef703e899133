"""
Event sets used to control the per-block likelihood gaps, and the
diagnostics around the second-order term.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from likelihood.loglr import TaylorTerms
from likelihood.partition import BlockPartition
from models.grid import GridFunction
from models.noise import NoiseModel
from stationary.transfer import StationaryDensity
from utils.logger import get_logger

logger = get_logger(__name__)


def slack_sequence(n: int) -> float:
    """v_n = (log n)^(-1/2)."""
    if n < 3:
        return 1.0
    return 1.0 / math.sqrt(math.log(n))


def a1_threshold(gamma_n: float, gamma_prime_n: float, m: int, c_event: float = 1.0) -> float:
    """c_event * gamma_n^(1/4) gamma'_n^(3/4) m^(1/4) log m."""
    if m < 2:
        return 0.0
    return c_event * gamma_n ** 0.25 * gamma_prime_n ** 0.75 * m ** 0.25 * math.log(m)


def a2_threshold(n: int, K: int) -> float:
    return slack_sequence(n) / math.sqrt(K)


@dataclass(frozen=True, eq=False)
class EventDiagnostics:
    a1_gap: np.ndarray
    a1_threshold: np.ndarray
    a2_gap: np.ndarray
    a2_threshold: float
    b_value: np.ndarray
    c_value: np.ndarray
    v_n: float
    c_event: float

    @property
    def a1(self) -> np.ndarray:
        return self.a1_gap <= self.a1_threshold

    @property
    def a2(self) -> np.ndarray:
        return self.a2_gap <= self.a2_threshold

    @property
    def b(self) -> np.ndarray:
        return self.b_value <= 1.0

    @property
    def c(self) -> np.ndarray:
        return self.c_value <= 1.0

    @property
    def all_hold(self) -> np.ndarray:
        return self.a1 & self.a2 & self.b & self.c

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a1_gap": self.a1_gap.tolist(),
            "a1_threshold": self.a1_threshold.tolist(),
            "a2_gap": self.a2_gap.tolist(),
            "a2_threshold": self.a2_threshold,
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "v_n": self.v_n,
            "c_event": self.c_event,
        }


def event_diagnostics(first: TaylorTerms, second: TaylorTerms, part: BlockPartition, gamma_n: float,
                      gamma_prime_n: float, c_event: float = 1.0) -> EventDiagnostics:
    """
    Per block l: A_{l,1} compares |T1 gaps| with the c_event threshold, A_{l,2}
    compares |T2 gaps| with v_n K^(-1/2), B_l and C_l ask the block log LRs to stay <= 1.
    """
    thresholds = np.array([a1_threshold(gamma_n, gamma_prime_n, m, c_event) for m in part.sizes])
    return EventDiagnostics(
        a1_gap=np.abs(first.t1 - second.t1),
        a1_threshold=thresholds,
        a2_gap=np.abs(first.t2 - second.t2),
        a2_threshold=a2_threshold(part.n, part.K),
        b_value=np.asarray(first.exact, dtype=float),
        c_value=np.asarray(second.exact, dtype=float),
        v_n=slack_sequence(part.n),
        c_event=c_event,
    )


def t2_mean_readings(g: GridFunction, psi_f: StationaryDensity, psi_f0: StationaryDensity,
                     noise: NoiseModel) -> Dict[str, float]:
    """
    Expected per-step T2 of the autoregression and regression sides.

    The regression design draws covariates from psi_f0. The autoregression side
    is read two ways: with covariates from psi_f, and with covariates from psi_f0.
    Under the psi_f0 reading both sides integrate g^2 against the same density,
    so "gap_reading_psi_f0" is zero by construction and is reported as 0.0.
    """
    g2 = np.square(np.asarray(g.values))
    grid = g.grid
    e_f = grid.integrate(g2 * psi_f.psi.values)
    e_f0 = grid.integrate(g2 * psi_f0.psi.values)
    factor = -0.5 * noise.fisher_info
    return {
        "mean_g2_under_psi_f": e_f,
        "mean_g2_under_psi_f0": e_f0,
        "gap_reading_psi_f": factor * (e_f - e_f0),
        "gap_reading_psi_f0": 0.0,
    }


def score_truncation(noise: NoiseModel, innovations: np.ndarray, n: int, delta: float = 0.1) -> Dict[str, float]:
    """Fraction of |l'(eps)| above n^delta and the mean of the truncated scores."""
    scores = np.asarray(noise.score_at(np.asarray(innovations, dtype=float)), dtype=float)
    threshold = float(n) ** delta
    over = np.abs(scores) > threshold
    clipped = np.where(over, 0.0, scores)
    return {
        "threshold": threshold,
        "exceed_fraction": float(np.mean(over)) if scores.size else 0.0,
        "truncated_mean": float(np.mean(clipped)) if scores.size else 0.0,
    }


def event_frequencies(diagnostics, K: Optional[int] = None) -> Dict[str, float]:
    """Empirical frequency of each complement event over a list of diagnostics."""
    if not diagnostics:
        return {}

    def stack(attr):
        return np.concatenate([np.asarray(getattr(d, attr)) for d in diagnostics])

    joint_a = np.concatenate([np.asarray(d.a1 & d.a2) for d in diagnostics])
    out = {
        "not_a1": float(np.mean(~stack("a1"))),
        "not_a2": float(np.mean(~stack("a2"))),
        "not_a": float(np.mean(~joint_a)),
        "not_b": float(np.mean(~stack("b"))),
        "not_c": float(np.mean(~stack("c"))),
        "not_all": float(np.mean(~stack("all_hold"))),
    }
    if K:
        out["one_over_K"] = 1.0 / K
    return out
