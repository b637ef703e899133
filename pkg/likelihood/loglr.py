"""
Exact blockwise log-likelihood ratios of the three experiments and their
second-order Taylor parts.

All products of density ratios are kept as sums of log terms; block sums
use numpy's pairwise summation in index order, so totals are reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from likelihood.partition import BlockPartition, partition as make_partition
from models.function_class import PerturbedFunction
from models.noise import NoiseModel
from stationary.transfer import StationaryDensity
from utils.errors import EvaluationRangeError
from utils.logger import get_logger

logger = get_logger(__name__)

DENSITY_FLOOR = 1e-300
LOG_FLOOR = math.log(DENSITY_FLOOR)


@dataclass(frozen=True, eq=False)
class LogLikelihoodRatio:
    """log L = block0 + sum over blocks of the per-block sums."""

    terms: np.ndarray
    blocks: np.ndarray
    block0: float
    total: float
    partition: BlockPartition
    experiment: int

    def to_dict(self) -> Dict[str, Any]:
        return {"experiment": self.experiment, "block0": self.block0, "blocks": self.blocks.tolist(),
                "total": self.total}


def _checked_logpdf(noise: NoiseModel, x: np.ndarray, what: str) -> np.ndarray:
    vals = np.asarray(noise.logpdf(x), dtype=float)
    if vals.size and float(np.min(vals)) < LOG_FLOOR:
        raise EvaluationRangeError(f"{what} density below {DENSITY_FLOOR:g}", module="likelihood")
    return vals


def _assemble(terms: np.ndarray, block0: float, part: BlockPartition, experiment: int) -> LogLikelihoodRatio:
    blocks = np.array([np.sum(terms[s]) for s in part.slices()], dtype=float)
    total = float(block0 + np.sum(blocks))
    return LogLikelihoodRatio(terms=terms, blocks=blocks, block0=float(block0), total=total,
                              partition=part, experiment=experiment)


def pointwise_loglr(covariates: np.ndarray, responses: np.ndarray, pf: PerturbedFunction,
                    noise: NoiseModel) -> np.ndarray:
    """log p(y - f(x)) - log p(y - f0(x)) term by term."""
    num = _checked_logpdf(noise, responses - np.asarray(pf.f.evaluate(covariates)), "numerator")
    den = _checked_logpdf(noise, responses - np.asarray(pf.f0.evaluate(covariates)), "denominator")
    return num - den


def loglr_ar(traj, pf: PerturbedFunction, noise_p: NoiseModel, psi_f: StationaryDensity,
             psi_f0: StationaryDensity, part: Optional[BlockPartition] = None) -> LogLikelihoodRatio:
    """log of psi_f(X_0)/psi_f0(X_0) * prod p(X_i - f(X_{i-1})) / p(X_i - f0(X_{i-1}))."""
    part = part or make_partition(max(traj.n, 1))
    x0 = float(traj.x[0])
    top = psi_f.pdf(x0)
    bottom = psi_f0.pdf(x0)
    if top < DENSITY_FLOOR or bottom < DENSITY_FLOOR:
        raise EvaluationRangeError(f"stationary density below {DENSITY_FLOOR:g} at X_0 = {x0:.4f}",
                                   module="likelihood")
    block0 = math.log(top) - math.log(bottom)
    terms = pointwise_loglr(traj.covariates, traj.responses, pf, noise_p)
    return _assemble(terms, block0, part, experiment=1)


def loglr_regression(sample, pf: PerturbedFunction, noise_q: NoiseModel,
                     part: Optional[BlockPartition] = None, experiment: Optional[int] = None) -> LogLikelihoodRatio:
    """Random design (experiment 2) or fixed design (experiment 3); block 0 is 0."""
    part = part or make_partition(max(sample.n, 1))
    if experiment is None:
        experiment = 3 if hasattr(sample, "t") else 2
    terms = pointwise_loglr(sample.covariates, sample.y, pf, noise_q)
    return _assemble(terms, 0.0, part, experiment=experiment)


@dataclass(frozen=True, eq=False)
class TaylorTerms:
    """Per-block T1, T2 and remainder = exact - T1 - T2."""

    t1: np.ndarray
    t2: np.ndarray
    remainder: np.ndarray
    exact: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {"t1": self.t1.tolist(), "t2": self.t2.tolist(), "remainder": self.remainder.tolist(),
                "exact": self.exact.tolist()}


def taylor_terms(covariates: np.ndarray, responses: np.ndarray, pf: PerturbedFunction, noise: NoiseModel,
                 part: Optional[BlockPartition] = None) -> TaylorTerms:
    """
    Around the center: with e_i = y_i - f0(x_i) and g_i = g(x_i),
    T1 = sum g_i * (-l'(e_i)), T2 = (1/2) sum g_i^2 l''(e_i).
    """
    covariates = np.asarray(covariates, dtype=float)
    responses = np.asarray(responses, dtype=float)
    part = part or make_partition(max(covariates.size, 1))
    g = np.asarray(pf.g.evaluate(covariates), dtype=float)
    e = responses - np.asarray(pf.f0.evaluate(covariates), dtype=float)
    exact_terms = pointwise_loglr(covariates, responses, pf, noise)
    t1_terms = -g * np.asarray(noise.score_at(e), dtype=float)
    t2_terms = 0.5 * g * g * np.asarray(noise.curvature_at(e), dtype=float)

    def by_block(values: np.ndarray) -> np.ndarray:
        return np.array([np.sum(values[s]) for s in part.slices()], dtype=float)

    exact = by_block(exact_terms)
    t1 = by_block(t1_terms)
    t2 = by_block(t2_terms)
    return TaylorTerms(t1=t1, t2=t2, remainder=exact - t1 - t2, exact=exact)


def remainder_bound(noise: NoiseModel, g_sup: float, m: int) -> float:
    """(c1/6) |g|^3 m."""
    return noise.third_deriv_bound / 6.0 * g_sup ** 3 * m
