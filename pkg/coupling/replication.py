"""
A full coupled (or independently built) pair of samples of size n, assembled
block by block with a fresh Wiener family per block, and the likelihood-ratio
pairs the Hellinger estimates are built from.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from config.settings import COUPLING_CONFIG
from coupling.embedding import (
    CouplingLedger,
    HorizonPlan,
    default_dt,
    embed_ar_side,
    embed_regression_side,
    pilot_expectations,
    set_horizons,
)
from coupling.gaps import GapReport, z_statistics
from coupling.skorokhod import ScoreLaw
from coupling.wiener import WienerFamily
from likelihood.loglr import loglr_ar, loglr_regression, pointwise_loglr
from likelihood.partition import BlockPartition, partition
from models.function_class import PerturbedFunction
from models.noise import NoiseModel
from simulate.rearrange import rearrange_blocks
from simulate.samples import ArTrajectory, FixedDesignSample, RandomDesignSample, design_points
from stationary.transfer import StationaryDensity
from utils.errors import InvalidArgumentError
from utils.logger import get_logger
from utils.rng import SeedLike, child_sequence, seed_sequence, substream

logger = get_logger(__name__)

CONSTRUCTIONS = ("coupled", "independent")
DESIGNS = ("random", "fixed")


@dataclass(eq=False)
class CouplingSetup:
    """Everything a replication needs besides its seed; horizon plans are cached per block size."""

    pf: PerturbedFunction
    noise_p: NoiseModel
    noise_q: NoiseModel
    psi_f0: StationaryDensity
    A: float
    B: float
    depth: int
    design: str = "random"
    dt: Optional[float] = None
    pilot_mode: str = COUPLING_CONFIG["pilot_mode"]
    pilot_reps: int = COUPLING_CONFIG["pilot_reps"]
    horizon_c: float = COUPLING_CONFIG["horizon_c"]
    pilot_seed: SeedLike = 0
    atoms: int = COUPLING_CONFIG["score_atoms"]
    plans: Dict[int, HorizonPlan] = field(default_factory=dict, repr=False)
    _laws: Dict[str, ScoreLaw] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise InvalidArgumentError(f"design must be one of {DESIGNS}, got '{self.design}'", module="coupling")
        if self.depth < 0:
            raise InvalidArgumentError(f"depth must be >= 0, got {self.depth}", module="coupling")

    @property
    def law_p(self) -> ScoreLaw:
        if "p" not in self._laws:
            self._laws["p"] = ScoreLaw.from_noise(self.noise_p, self.atoms)
        return self._laws["p"]

    @property
    def law_q(self) -> ScoreLaw:
        if "q" not in self._laws:
            self._laws["q"] = ScoreLaw.from_noise(self.noise_q, self.atoms)
        return self._laws["q"]

    @property
    def step(self) -> float:
        return self.dt or default_dt(self.law_p)

    def plan_for(self, m: int) -> HorizonPlan:
        plan = self.plans.get(m)
        if plan is None:
            expectations = pilot_expectations(self.pf, self.noise_p, self.psi_f0, m, self.depth, self.A, self.B,
                                              seed=child_sequence(self.pilot_seed, f"pilot_m{m}"),
                                              reps=self.pilot_reps, mode=self.pilot_mode, dt=self.step,
                                              law=self.law_p)
            plan = set_horizons(expectations, m, self.depth, self.horizon_c)
            self.plans[m] = plan
        return plan

    def prepare(self, n: int) -> BlockPartition:
        """Compute the horizon plans of every block size of n ahead of a parallel run."""
        part = partition(n)
        for m in sorted(set(part.sizes)):
            self.plan_for(m)
        return part


@dataclass(eq=False)
class CoupledReplication:
    construction: str
    partition: BlockPartition
    trajectory: ArTrajectory
    sample: Union[RandomDesignSample, FixedDesignSample]
    ledgers_x: List[CouplingLedger]
    ledgers_y: List[CouplingLedger]

    def gap_reports(self, lam: float = 2.0, c_lambda: float = 1.0) -> List[GapReport]:
        return [z_statistics(lx, ly, lam=lam, c_lambda=c_lambda) for lx, ly in zip(self.ledgers_x, self.ledgers_y)]

    def summary(self) -> Dict[str, Any]:
        return {"construction": self.construction, "n": self.partition.n, "blocks": self.partition.K,
                "mean_stopping_time_x": float(np.mean(np.concatenate([l.times for l in self.ledgers_x]))),
                "mean_stopping_time_y": float(np.mean(np.concatenate([l.times for l in self.ledgers_y])))}


def _families(setup: CouplingSetup, plan: HorizonPlan, seed: SeedLike, l: int,
              construction: str) -> Tuple[WienerFamily, WienerFamily]:
    wf_x = WienerFamily(child_sequence(seed, f"block{l}"), setup.depth, setup.A, setup.B, setup.step, plan.T)
    if construction == "coupled":
        return wf_x, wf_x
    wf_y = WienerFamily(child_sequence(seed, f"block{l}_regression"), setup.depth, setup.A, setup.B,
                        setup.step, plan.T)
    return wf_x, wf_y


def coupled_block(setup: CouplingSetup, m: int, state: float, seed: SeedLike, l: int = 1,
                  design: Optional[np.ndarray] = None, construction: str = "coupled"
                  ) -> Tuple[ArTrajectory, Union[RandomDesignSample, FixedDesignSample], CouplingLedger, CouplingLedger]:
    """One block of m steps started from the chain state ``state``."""
    if construction not in CONSTRUCTIONS:
        raise InvalidArgumentError(f"construction must be one of {CONSTRUCTIONS}, got '{construction}'",
                                   module="coupling")
    plan = setup.plan_for(m)
    wf_x, wf_y = _families(setup, plan, seed, l, construction)
    traj, led_x = embed_ar_side(setup.pf, setup.noise_p, setup.psi_f0, m, wf_x, law=setup.law_p, x0=state)
    target = setup.psi_f0 if design is None else design
    sample, led_y = embed_regression_side(setup.pf, setup.noise_q, target, m, wf_y, law=setup.law_q)
    return traj, sample, led_x, led_y


def coupled_replication(setup: CouplingSetup, n: int, seed: SeedLike,
                        construction: str = "coupled") -> CoupledReplication:
    """
    n-sample pair under the center law: the autoregression runs on through the
    blocks, the regression side is drawn block by block; every block gets its
    own Wiener family (shared by both sides unless construction is 'independent').
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}", module="coupling")
    seed = seed_sequence(seed)
    part = setup.prepare(n)
    design_blocks: List[Optional[np.ndarray]] = [None] * part.K
    if setup.design == "fixed":
        t = rearrange_blocks(design_points(setup.psi_f0, n), setup.psi_f0, part).t
        design_blocks = [t[s] for s in part.slices()]

    state = float(setup.psi_f0.distribution.sample(substream(seed, "ar_initial"), 1)[0])
    xs: List[np.ndarray] = [np.array([state])]
    eps: List[np.ndarray] = []
    drift: List[np.ndarray] = []
    cov: List[np.ndarray] = []
    ys: List[np.ndarray] = []
    etas: List[np.ndarray] = []
    signals: List[np.ndarray] = []
    ledgers_x: List[CouplingLedger] = []
    ledgers_y: List[CouplingLedger] = []
    for l, m in enumerate(part.sizes, start=1):
        traj, sample, led_x, led_y = coupled_block(setup, m, state, seed, l, design_blocks[l - 1], construction)
        xs.append(traj.x[1:])
        eps.append(traj.eps)
        drift.append(traj.drift)
        cov.append(sample.covariates)
        ys.append(sample.y)
        etas.append(sample.eta)
        signals.append(sample.signal)
        ledgers_x.append(led_x)
        ledgers_y.append(led_y)
        state = float(traj.x[-1])

    trajectory = ArTrajectory(x=np.concatenate(xs), eps=np.concatenate(eps), drift=np.concatenate(drift),
                              f_used=setup.pf, law="f0", seed=seed)
    if setup.design == "fixed":
        sample = FixedDesignSample(t=np.concatenate(cov), y=np.concatenate(ys), eta=np.concatenate(etas),
                                   signal=np.concatenate(signals), law="f0")
    else:
        sample = RandomDesignSample(xi=np.concatenate(cov), y=np.concatenate(ys), eta=np.concatenate(etas),
                                    signal=np.concatenate(signals), law="f0")
    return CoupledReplication(construction=construction, partition=part, trajectory=trajectory, sample=sample,
                              ledgers_x=ledgers_x, ledgers_y=ledgers_y)


def coupled_loglr_pair(setup: CouplingSetup, psi_f: StationaryDensity, n: int, construction: str,
                       seed: np.random.SeedSequence) -> Tuple[float, float]:
    """(log L1, log L2) of one coupled replication; picklable through functools.partial."""
    rep = coupled_replication(setup, n, seed, construction)
    first = loglr_ar(rep.trajectory, setup.pf, setup.noise_p, psi_f, setup.psi_f0, rep.partition)
    second = loglr_regression(rep.sample, setup.pf, setup.noise_q, rep.partition)
    return first.total, second.total


def coupled_block_pair(setup: CouplingSetup, m: int, construction: str, l: int, state: float,
                       seed: np.random.SeedSequence) -> Tuple[float, float]:
    """(log L1, log L2) of a single block of size m started from ``state``."""
    design = design_points(setup.psi_f0, m) if setup.design == "fixed" else None
    traj, sample, _, _ = coupled_block(setup, m, state, seed, l, design, construction)
    first = pointwise_loglr(traj.covariates, traj.responses, setup.pf, setup.noise_p)
    second = pointwise_loglr(sample.covariates, sample.y, setup.pf, setup.noise_q)
    return float(np.sum(first)), float(np.sum(second))
