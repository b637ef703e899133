"""
Monte Carlo estimates of E(sqrt L1 - sqrt L2)^2 and E|L1 - L2| from coupled
log-likelihood ratios, and the blockwise conditional bound on the former.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np

from config.settings import MC_CONFIG
from stationary.transfer import StationaryDensity, hellinger_sq
from utils.errors import InvalidArgumentError
from utils.logger import get_logger
from utils.parallel import map_replications
from utils.rng import SeedLike, replication_seeds, seed_sequence, substream

logger = get_logger(__name__)

PairGenerator = Callable[[np.random.SeedSequence], Tuple[float, float]]


def pair_distances(log_l1, log_l2) -> Tuple[np.ndarray, np.ndarray]:
    """
    (sqrt L1 - sqrt L2)^2 and |L1 - L2| evaluated in log space:
    with b = min and d = |a - b|, they are e^b expm1(d/2)^2 and e^b expm1(d).
    """
    a = np.asarray(log_l1, dtype=float)
    b = np.asarray(log_l2, dtype=float)
    low = np.minimum(a, b)
    d = np.abs(a - b)
    scale = np.exp(low)
    return scale * np.expm1(0.5 * d) ** 2, scale * np.expm1(d)


def _mean_se(values: np.ndarray) -> Tuple[float, float]:
    if values.size < 2:
        return float(np.mean(values)) if values.size else 0.0, 0.0
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(values.size))


@dataclass
class HellingerEstimate:
    h2: float
    h2_se: float
    l1: float
    l1_se: float
    reps: int
    se_multiplier: float = MC_CONFIG["se_multiplier"]
    log_l1: np.ndarray = field(default=None, repr=False)
    log_l2: np.ndarray = field(default=None, repr=False)

    @property
    def hellinger(self) -> float:
        return math.sqrt(max(self.h2, 0.0))

    @property
    def combined_se(self) -> float:
        """Standard error of (1/2) L1 - sqrt(H2) by the delta method."""
        if self.h2 > 0:
            root_se = self.h2_se / (2.0 * self.hellinger)
        else:
            root_se = math.sqrt(self.h2_se)
        return math.sqrt((0.5 * self.l1_se) ** 2 + root_se ** 2)

    @property
    def tv_bound_holds(self) -> bool:
        """(1/2) L1 <= H within the error allowance."""
        return 0.5 * self.l1 <= self.hellinger + self.se_multiplier * self.combined_se

    def to_dict(self) -> Dict[str, Any]:
        return {"reps": self.reps, "h2": self.h2, "h2_se": self.h2_se, "l1": self.l1, "l1_se": self.l1_se,
                "hellinger": self.hellinger, "tv_bound_holds": self.tv_bound_holds}


def _run_pair(generator: PairGenerator, seed: np.random.SeedSequence) -> Tuple[float, float]:
    a, b = generator(seed)
    return float(a), float(b)


def hellinger_mc(generator: PairGenerator, reps: int, seed: SeedLike, workers: int = 1,
                 desc: str = "hellinger") -> HellingerEstimate:
    """
    Args:
        generator: Maps a replication SeedSequence to (log L1, log L2) of one
            coupled draw under the center law. Must be picklable when workers > 1.
        reps: Number of coupled draws (>= 2).
        seed: Master seed; replication i uses the i-th spawned child.
        workers: Process count.

    Returns:
        HellingerEstimate with means and standard errors.
    """
    if reps < 2:
        raise InvalidArgumentError(f"hellinger_mc needs reps >= 2, got {reps}", module="likelihood")
    seeds = replication_seeds(seed, desc, reps)
    pairs = map_replications(partial(_run_pair, generator), seeds, workers=workers, desc=desc)
    est = estimate_from_logs([p[0] for p in pairs], [p[1] for p in pairs])
    logger.info(f"{desc}: H2 = {est.h2:.4e} +- {est.h2_se:.1e}, L1 = {est.l1:.4e} +- {est.l1_se:.1e} "
                f"over {reps} draws")
    return est


def estimate_from_logs(log_l1, log_l2) -> HellingerEstimate:
    """HellingerEstimate from already drawn (log L1, log L2) pairs."""
    log_l1 = np.asarray(log_l1, dtype=float)
    log_l2 = np.asarray(log_l2, dtype=float)
    h2_vals, l1_vals = pair_distances(log_l1, log_l2)
    h2, h2_se = _mean_se(h2_vals)
    l1, l1_se = _mean_se(l1_vals)
    return HellingerEstimate(h2=h2, h2_se=h2_se, l1=l1, l1_se=l1_se, reps=int(log_l1.size),
                             log_l1=log_l1, log_l2=log_l2)


def normalization_check(log_lr: np.ndarray, se_multiplier: float = MC_CONFIG["se_multiplier"]) -> Dict[str, Any]:
    """E[L] = 1 within se_multiplier standard errors."""
    values = np.exp(np.asarray(log_lr, dtype=float))
    mean, se = _mean_se(values)
    return {"mean": mean, "se": se, "holds": abs(mean - 1.0) <= se_multiplier * se + 1e-12}


def gaussian_shift_pair(mu: float, seed: np.random.SeedSequence) -> Tuple[float, float]:
    """One observation X ~ N(0, 1): log dN(mu,1)/dN(0,1)(X) against the null ratio 0."""
    x = float(substream(seed, "gaussian_shift").standard_normal())
    return mu * x - 0.5 * mu * mu, 0.0


def analytic_gaussian_h2(mu: float) -> float:
    """E(sqrt L - 1)^2 for the unit-variance Gaussian shift mu, i.e. 2(1 - exp(-mu^2/8))."""
    return 2.0 * (1.0 - math.exp(-mu * mu / 8.0))


def block0_hellinger(psi_f: StationaryDensity, psi_f0: StationaryDensity) -> float:
    """Initial-state contribution E_f0(sqrt(psi_f/psi_f0)(X_0) - 1)^2."""
    return hellinger_sq(psi_f.psi, psi_f0.psi)


BlockGenerator = Callable[[int, float, np.random.SeedSequence], Tuple[float, float]]


@dataclass
class Lemma31Result:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    block_terms: List[float]
    holds: bool
    draws: int

    def to_dict(self) -> Dict[str, Any]:
        return {"lhs": self.lhs, "lhs_se": self.lhs_se, "rhs": self.rhs, "rhs_se": self.rhs_se,
                "block_terms": list(self.block_terms), "holds": self.holds, "draws": self.draws}


def _block_rep(block_generator: BlockGenerator, block: int, state: float,
               seed: np.random.SeedSequence) -> Tuple[float, float]:
    a, b = block_generator(block, state, seed)
    return float(a), float(b)


def lemma31_check(full_generator: PairGenerator, block_generator: BlockGenerator, K: int,
                  states: Sequence[float], reps: int, seed: SeedLike, block0: float = 0.0,
                  workers: int = 1, se_multiplier: float = MC_CONFIG["se_multiplier"]) -> Lemma31Result:
    """
    Compare the full-sample Hellinger term with block0 plus the sum over blocks
    of the largest conditional block term among the conditioning states.

    ``block_generator(l, state, seed)`` draws block l given the chain state
    just before the block and returns the block's (log L1, log L2).
    """
    if reps < 2:
        raise InvalidArgumentError(f"lemma31_check needs reps >= 2, got {reps}", module="likelihood")
    root = seed_sequence(seed)
    lhs_est = hellinger_mc(full_generator, reps, root, workers=workers, desc="lemma31_full")

    block_terms: List[float] = []
    worst_se_sq = 0.0
    for l in range(1, K + 1):
        best, best_se = 0.0, 0.0
        for r, state in enumerate(states):
            seeds = replication_seeds(root, f"lemma31_block{l}_state{r}", reps)
            pairs = map_replications(partial(_block_rep, block_generator, l, float(state)), seeds,
                                     workers=workers, desc=f"block {l} state {r}", show_progress=False)
            h2_vals, _ = pair_distances([p[0] for p in pairs], [p[1] for p in pairs])
            mean, se = _mean_se(h2_vals)
            if mean > best:
                best, best_se = mean, se
        block_terms.append(best)
        worst_se_sq += best_se ** 2

    rhs = block0 + float(np.sum(block_terms))
    rhs_se = math.sqrt(worst_se_sq)
    holds = lhs_est.h2 <= rhs + se_multiplier * math.sqrt(lhs_est.h2_se ** 2 + rhs_se ** 2)
    logger.info(f"Blockwise Hellinger bound: lhs {lhs_est.h2:.4e} vs rhs {rhs:.4e} over {len(states)} states -> {holds}")
    return Lemma31Result(lhs=lhs_est.h2, lhs_se=lhs_est.h2_se, rhs=rhs, rhs_se=rhs_se,
                         block_terms=block_terms, holds=holds, draws=len(states))
