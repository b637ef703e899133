"""
Embedding of the score sums of the autoregression and of the regression
into one shared Wiener family.

Step i locates the leaf interval holding its covariate, glues the unused
stretches of the processes along the chain leaf -> root into one path, and
stops that path with a randomized two-point scheme whose target is the
discretized score law. The reached atom fixes the innovation. Each side keeps
its own cursors, so the two sides read the same paths independently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from config.settings import COUPLING_CONFIG
from coupling.skorokhod import ScoreLaw, exit_on_cursor
from coupling.wiener import PathCursor, WienerFamily, index_of
from haar.expansion import DyadicIndex, tree_indices
from models.function_class import PerturbedFunction, zero_function
from models.grid import GridFunction
from models.noise import NoiseModel
from simulate.samples import ArTrajectory, FixedDesignSample, RandomDesignSample
from stationary.transfer import StationaryDensity
from utils.errors import ConfigurationError, HorizonExhaustedError, InvalidArgumentError, LedgerCorruptionError
from utils.file_utils import write_json
from utils.logger import get_logger
from utils.rng import SeedLike, replication_seeds, substream

logger = get_logger(__name__)

AUDIT_TOL = 1e-12


def default_dt(law: ScoreLaw) -> float:
    return COUPLING_CONFIG["dt_factor"] * max(law.variance, 1e-12)


@dataclass(eq=False)
class CouplingLedger:
    """
    Everything one side of the construction consumed.

    Contributions are stored row-wise: step (0-based), node, start time,
    stop time, time the cursor moved on to, and the path increment used.
    """

    side: str
    depth: int
    A: float
    B: float
    covariates: np.ndarray
    leaves: np.ndarray
    values: np.ndarray
    eps: np.ndarray
    times: np.ndarray
    steps: np.ndarray
    nodes: np.ndarray
    starts: np.ndarray
    stops: np.ndarray
    through: np.ndarray
    increments: np.ndarray
    horizons: Dict[int, float] = field(default_factory=dict)

    @property
    def m(self) -> int:
        return int(self.values.size)

    def leaf_positions(self) -> np.ndarray:
        """k of the leaf I_{depth,k} of every step, 0 outside [A, B]."""
        return np.where(self.leaves >= 0, self.leaves - (2 ** self.depth - 1) + 1, 0)

    def stopping_times(self, node: int) -> np.ndarray:
        """tau^{(i)} of ``node`` for i = 0..m: how far the side has read the process after step i."""
        out = np.zeros(self.m + 1)
        mask = self.nodes == node
        if np.any(mask):
            out[self.steps[mask] + 1] = self.through[mask]
            out = np.maximum.accumulate(out)
        return out

    def node_increments(self) -> Dict[int, float]:
        out: Dict[int, float] = {}
        for node, inc in zip(self.nodes.tolist(), self.increments.tolist()):
            out[node] = out.get(node, 0.0) + inc
        return out

    def audit(self) -> Dict[str, Any]:
        """
        Check that stretches read from each process are disjoint and in order
        and that no finite horizon was overrun.

        Raises:
            LedgerCorruptionError: on the first violation found.
        """
        checked = 0
        for node in np.unique(self.nodes):
            mask = self.nodes == node
            order = np.argsort(self.steps[mask], kind="stable")
            starts = self.starts[mask][order]
            stops = self.stops[mask][order]
            through = self.through[mask][order]
            if np.any(stops < starts - AUDIT_TOL) or np.any(through < stops - AUDIT_TOL):
                raise LedgerCorruptionError(f"{self.side}: stretch ends before it starts on node {node}",
                                            module="coupling")
            if starts.size > 1 and np.any(starts[1:] < through[:-1] - AUDIT_TOL):
                raise LedgerCorruptionError(f"{self.side}: overlapping stretches on node {node}", module="coupling")
            T = self.horizons.get(int(node))
            if T is not None and np.isfinite(T) and through.size and through[-1] > T + AUDIT_TOL:
                raise LedgerCorruptionError(f"{self.side}: node {node} read to {through[-1]:.6f} past T = {T:.6f}",
                                            module="coupling")
            checked += 1
        return {"side": self.side, "nodes_checked": checked, "contributions": int(self.nodes.size)}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "side": self.side,
            "depth": self.depth,
            "A": self.A,
            "B": self.B,
            "covariates": self.covariates.tolist(),
            "leaves": self.leaves.tolist(),
            "values": self.values.tolist(),
            "eps": self.eps.tolist(),
            "times": self.times.tolist(),
            "contributions": {
                "steps": self.steps.tolist(),
                "nodes": self.nodes.tolist(),
                "starts": self.starts.tolist(),
                "stops": self.stops.tolist(),
                "through": self.through.tolist(),
                "increments": self.increments.tolist(),
            },
            "horizons": {str(k): (v if np.isfinite(v) else None) for k, v in self.horizons.items()},
        }

    def to_json(self, path: Union[str, Path]) -> Path:
        return write_json(path, self.to_dict())


class _SideEmbedder:
    """Cursors and visit counters of one side over a shared WienerFamily."""

    def __init__(self, wf: WienerFamily, law: ScoreLaw, side: str):
        self.wf = wf
        self.law = law
        self.side = side
        self.cursors: Dict[int, PathCursor] = {}
        self.visits: Dict[int, int] = {}
        self.rows: List[Tuple[int, int, float, float, float, float]] = []

    def cursor(self, node: int) -> PathCursor:
        cur = self.cursors.get(node)
        if cur is None:
            cur = self.wf.cursor(node)
            self.cursors[node] = cur
        return cur

    def step(self, i: int, x: float) -> Tuple[int, int, float]:
        """Embed one score; returns (leaf node, atom, total stopping time)."""
        chain = self.wf.chain(x)
        leaf = chain[0]
        visit = self.visits.get(leaf, 0)
        self.visits[leaf] = visit + 1
        lower, upper = self.law.draw_pair(self.wf.pair_uniforms(leaf, visit))
        if lower == upper:
            return leaf, lower, 0.0

        lo, hi = float(self.law.values[lower]), float(self.law.values[upper])
        offset = 0.0
        total = 0.0
        for node in chain:
            cur = self.cursor(node)
            if cur.exhausted:
                continue
            start = cur.time
            hit = exit_on_cursor(cur, lo - offset, hi - offset)
            if hit is None:
                inc, used = cur.consume_to_horizon()
                self.rows.append((i, node, start, cur.time, cur.time, inc))
                offset += inc
                total += used
                continue
            used, up, tau = hit
            barrier = hi if up else lo
            self.rows.append((i, node, start, tau, cur.time, barrier - offset))
            return leaf, (upper if up else lower), total + used
        raise HorizonExhaustedError(f"{self.side}: every process on the chain of x = {x:.4f} is exhausted",
                                    module="coupling")

    def ledger(self, covariates: np.ndarray, leaves: np.ndarray, atoms: np.ndarray, times: np.ndarray) -> CouplingLedger:
        rows = np.array(self.rows, dtype=float).reshape(-1, 6)
        values = self.law.values[atoms] if atoms.size else np.empty(0)
        eps = np.array([self.law.innovation(a) for a in atoms]) if atoms.size else np.empty(0)
        horizons = {node: (float(self.wf.horizons[node]) if node in self.wf.horizons else math.inf)
                    for node in self.wf.nodes if node > 0}
        return CouplingLedger(
            side=self.side, depth=self.wf.depth, A=self.wf.A, B=self.wf.B,
            covariates=np.asarray(covariates, dtype=float), leaves=np.asarray(leaves, dtype=np.int64),
            values=np.asarray(values, dtype=float), eps=eps, times=np.asarray(times, dtype=float),
            steps=rows[:, 0].astype(np.int64), nodes=rows[:, 1].astype(np.int64), starts=rows[:, 2],
            stops=rows[:, 3], through=rows[:, 4], increments=rows[:, 5], horizons=horizons,
        )


def _check_depth(wf: WienerFamily, j_star: Optional[int]) -> None:
    if j_star is not None and j_star != wf.depth:
        raise InvalidArgumentError(f"j_star = {j_star} but the Wiener family has depth {wf.depth}",
                                   module="coupling")


def _center(f0: Union[GridFunction, PerturbedFunction]) -> PerturbedFunction:
    if isinstance(f0, PerturbedFunction):
        return f0
    return PerturbedFunction(f0, zero_function(f0.grid), 0.0, 0.0)


def _score_law(noise: NoiseModel, law: Optional[ScoreLaw]) -> ScoreLaw:
    law = law or ScoreLaw.from_noise(noise)
    if law.eps is None:
        raise ConfigurationError("score law has no innovation preimages and no conditional sampler",
                                 module="coupling")
    return law


def embed_ar_side(f0: Union[GridFunction, PerturbedFunction], noise_p: NoiseModel, psi_f0: StationaryDensity,
                  m: int, wf: WienerFamily, j_star: Optional[int] = None, law: Optional[ScoreLaw] = None,
                  x0: Optional[float] = None) -> Tuple[ArTrajectory, CouplingLedger]:
    """
    Autoregression side under the center: X_i = f0(X_{i-1}) + eps_i with the
    score l'(eps_i) read off the shared Wiener family.

    Args:
        f0: Center, or a PerturbedFunction whose center is used; the returned
            trajectory carries it so likelihood ratios against f can be formed.
        psi_f0: Stationary density of the center; X_0 is drawn from it unless
            ``x0`` fixes the starting state.
        wf: Shared Wiener family; its depth is the finest dyadic level.
    """
    _check_depth(wf, j_star)
    if m < 0:
        raise InvalidArgumentError(f"m must be nonnegative, got {m}", module="coupling")
    pf = _center(f0)
    law = _score_law(noise_p, law)
    side = _SideEmbedder(wf, law, "ar")
    if x0 is None:
        x0 = float(psi_f0.distribution.sample(substream(wf.seed, "ar_initial"), 1)[0])

    x = np.empty(m + 1)
    x[0] = x0
    drift = np.empty(m)
    leaves = np.empty(m, dtype=np.int64)
    atoms = np.empty(m, dtype=np.int64)
    times = np.empty(m)
    for i in range(m):
        leaves[i], atoms[i], times[i] = side.step(i, x[i])
        drift[i] = pf.f0.evaluate(x[i])
        x[i + 1] = drift[i] + law.innovation(atoms[i])

    ledger = side.ledger(x[:-1], leaves, atoms, times)
    traj = ArTrajectory(x=x, eps=ledger.eps, drift=drift, f_used=pf, law="f0", seed=wf.seed)
    logger.debug(f"AR side embedded {m} steps, mean stopping time {float(np.mean(times)) if m else 0.0:.4f}")
    return traj, ledger


def embed_regression_side(f0: Union[GridFunction, PerturbedFunction], noise_q: NoiseModel,
                          design: Union[StationaryDensity, np.ndarray], m: int, wf: WienerFamily,
                          j_star: Optional[int] = None, law: Optional[ScoreLaw] = None
                          ) -> Tuple[Union[RandomDesignSample, FixedDesignSample], CouplingLedger]:
    """
    Regression side on the same Wiener family: random design when ``design``
    is the center's stationary density, fixed design when it is an array of
    design points (whose length then overrides ``m``).
    """
    _check_depth(wf, j_star)
    pf = _center(f0)
    law = _score_law(noise_q, law)
    fixed = not isinstance(design, StationaryDensity)
    if fixed:
        covariates = np.asarray(design, dtype=float)
        m = covariates.size
    else:
        if m < 0:
            raise InvalidArgumentError(f"m must be nonnegative, got {m}", module="coupling")
        covariates = np.asarray(design.distribution.sample(substream(wf.seed, "design"), m), dtype=float)

    side = _SideEmbedder(wf, law, "fixed_design" if fixed else "random_design")
    leaves = np.empty(m, dtype=np.int64)
    atoms = np.empty(m, dtype=np.int64)
    times = np.empty(m)
    for i in range(m):
        leaves[i], atoms[i], times[i] = side.step(i, covariates[i])

    ledger = side.ledger(covariates, leaves, atoms, times)
    signal = np.asarray(pf.f0.evaluate(covariates), dtype=float) if m else np.empty(0)
    y = signal + ledger.eps
    if fixed:
        sample = FixedDesignSample(t=covariates, y=y, eta=ledger.eps, signal=signal, law="f0")
    else:
        sample = RandomDesignSample(xi=covariates, y=y, eta=ledger.eps, signal=signal, law="f0")
    return sample, ledger


@dataclass
class HorizonPlan:
    """S_{j,k}, the horizons T_{j,k} and the nodes whose T had to be clamped to 0."""

    depth: int
    m: int
    expectations: Dict[int, float]
    S: Dict[int, float]
    T: Dict[int, float]
    clamped: List[int] = field(default_factory=list)
    raw: Dict[int, float] = field(default_factory=dict)

    def subtree_total(self, node: int) -> float:
        """Sum of the unclamped T over the subtree of ``node`` (root excluded)."""
        idx = index_of(node)
        total = 0.0
        for j in range(idx.j, self.depth + 1):
            width = 2 ** (j - idx.j)
            for k in range((idx.k - 1) * width + 1, idx.k * width + 1):
                total += self.raw[DyadicIndex(j, k).node_id]
        return total

    def to_dict(self) -> Dict[str, Any]:
        def label(node: int) -> str:
            return str(index_of(node))
        return {
            "depth": self.depth,
            "m": self.m,
            "S": {label(n): v for n, v in self.S.items()},
            "T": {label(n): (v if np.isfinite(v) else None) for n, v in self.T.items()},
            "clamped": [label(n) for n in self.clamped],
        }


def set_horizons(expectations: Dict[int, float], m: int, j_star: int,
                 horizon_c: float = COUPLING_CONFIG["horizon_c"]) -> HorizonPlan:
    """
    S_{j,k} = E_{j,k} - c sqrt(m 2^-j) log m, T_{j,k} = S_{j,k} minus the S of
    its two children (leaves: T = S), T_{0,1} unbounded.

    ``expectations`` maps node ids to sum_i E[tau^(i) 1(X_{i-1} in I_{j,k})].
    Negative T are clamped to 0 and listed in the plan.
    """
    if m < 1:
        raise InvalidArgumentError(f"set_horizons needs m >= 1, got {m}", module="coupling")
    log_m = math.log(m) if m > 1 else 0.0
    S: Dict[int, float] = {}
    for idx in tree_indices(j_star):
        E = float(expectations.get(idx.node_id, 0.0))
        S[idx.node_id] = E - horizon_c * math.sqrt(m * 2.0 ** -idx.j) * log_m

    raw: Dict[int, float] = {}
    T: Dict[int, float] = {}
    clamped: List[int] = []
    for idx in tree_indices(j_star):
        node = idx.node_id
        if idx.j < j_star:
            value = S[node] - sum(S[c.node_id] for c in idx.children())
        else:
            value = S[node]
        raw[node] = value
        if idx.j == 0:
            T[node] = math.inf
        elif value < 0:
            T[node] = 0.0
            clamped.append(node)
        else:
            T[node] = value
    if clamped:
        logger.warning(f"{len(clamped)} horizon(s) negative at m = {m}, clamped to 0: "
                       f"{', '.join(str(index_of(n)) for n in clamped[:8])}{' ...' if len(clamped) > 8 else ''}")
    return HorizonPlan(depth=j_star, m=m, expectations=dict(expectations), S=S, T=T, clamped=clamped, raw=raw)


def subtree_sums(per_leaf: np.ndarray, depth: int) -> Dict[int, float]:
    """Node id -> sum over the leaves of its subtree, given per-leaf totals (index k-1)."""
    out: Dict[int, float] = {}
    level = np.asarray(per_leaf, dtype=float)
    for j in range(depth, -1, -1):
        for k in range(1, 2 ** j + 1):
            out[DyadicIndex(j, k).node_id] = float(level[k - 1])
        if j:
            level = level.reshape(-1, 2).sum(axis=1)
    return out


def analytic_expectations(psi_f0: StationaryDensity, law: ScoreLaw, m: int, depth: int,
                          A: float, B: float) -> Dict[int, float]:
    """m P(I_{j,k}) Var(score) under the center's stationary law."""
    edges = np.linspace(A, B, 2 ** depth + 1)
    cdf = np.asarray(psi_f0.cdf(edges), dtype=float)
    probs = np.diff(cdf)
    return subtree_sums(m * probs * law.variance, depth)


def pilot_expectations(f0: Union[GridFunction, PerturbedFunction], noise_p: NoiseModel,
                       psi_f0: StationaryDensity, m: int, depth: int, A: float, B: float, seed: SeedLike,
                       reps: int = COUPLING_CONFIG["pilot_reps"], mode: str = COUPLING_CONFIG["pilot_mode"],
                       dt: Optional[float] = None, law: Optional[ScoreLaw] = None) -> Dict[int, float]:
    """
    Estimates of sum_i E[tau^(i) 1(X_{i-1} in I_{j,k})].

    mode 'simulate' runs the autoregression side with unbounded horizons and
    averages the stopping times per leaf; mode 'analytic' uses the Wald
    identity m P(I) Var(score).
    """
    law = law or ScoreLaw.from_noise(noise_p)
    if mode == "analytic":
        return analytic_expectations(psi_f0, law, m, depth, A, B)
    if mode != "simulate":
        raise ConfigurationError(f"unknown pilot mode '{mode}'", module="coupling")
    if reps < 1:
        raise InvalidArgumentError(f"pilot needs reps >= 1, got {reps}", module="coupling")
    dt = dt or default_dt(law)
    per_leaf = np.zeros(2 ** depth)
    for rep_seed in replication_seeds(seed, "pilot", reps):
        wf = WienerFamily(rep_seed, depth, A, B, dt)
        _, ledger = embed_ar_side(f0, noise_p, psi_f0, m, wf, law=law)
        k = ledger.leaf_positions()
        inside = k > 0
        per_leaf += np.bincount(k[inside] - 1, weights=ledger.times[inside], minlength=2 ** depth)
    per_leaf /= reps
    logger.info(f"Pilot over {reps} replications at m = {m}: mean total stopping time {per_leaf.sum():.2f}")
    return subtree_sums(per_leaf, depth)

