"""
The exponential moment bound for bounded centered variables:
E exp(lam xi) <= exp(c lam^2 E xi^2) with c = e^a / 2 for |xi| <= a, |lam| <= 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from config.settings import MC_CONFIG
from utils.errors import InvalidArgumentError, SpecViolationError
from utils.logger import get_logger
from utils.rng import SeedLike, substream

logger = get_logger(__name__)

Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass
class BoundedVariableSpec:
    """A centered variable with |xi| <= a; finite laws carry their atoms for exact checks."""

    name: str
    a: float
    sampler: Sampler
    second_moment: Optional[float] = None
    atoms: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.a < 0:
            raise InvalidArgumentError(f"bound a must be >= 0, got {self.a}", module="bounds")

    @property
    def finite(self) -> bool:
        return self.atoms is not None

    @property
    def c(self) -> float:
        return math.exp(self.a) / 2.0

    def exact_mgf(self, lam: float) -> float:
        if not self.finite:
            raise InvalidArgumentError(f"{self.name} has no finite support to enumerate", module="bounds")
        return float(np.dot(self.probs, np.exp(lam * self.atoms)))


def two_point(a: float, b: Optional[float] = None) -> BoundedVariableSpec:
    """Values -a and b with the weights that center them; b defaults to a."""
    b = a if b is None else b
    if a <= 0 or b <= 0:
        if a == 0 and b == 0:
            return zero_variable()
        raise InvalidArgumentError("two-point law needs a, b > 0", module="bounds")
    atoms = np.array([-a, b], dtype=float)
    probs = np.array([b / (a + b), a / (a + b)])

    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(atoms, size=size, p=probs)

    return BoundedVariableSpec(name=f"two_point({a:g},{b:g})", a=max(a, b), sampler=sampler,
                               second_moment=float(np.dot(probs, atoms ** 2)), atoms=atoms, probs=probs)


def uniform_variable(a: float) -> BoundedVariableSpec:
    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(-a, a, size)

    return BoundedVariableSpec(name=f"uniform({a:g})", a=a, sampler=sampler, second_moment=a * a / 3.0)


def truncated_gaussian(a: float, sigma: float = 1.0) -> BoundedVariableSpec:
    law = stats.truncnorm(-a / sigma, a / sigma, loc=0.0, scale=sigma)

    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        return law.rvs(size=size, random_state=rng)

    return BoundedVariableSpec(name=f"truncnorm({a:g},{sigma:g})", a=a, sampler=sampler,
                               second_moment=float(law.var()))


def zero_variable() -> BoundedVariableSpec:
    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        return np.zeros(size)

    return BoundedVariableSpec(name="zero", a=0.0, sampler=sampler, second_moment=0.0,
                               atoms=np.array([0.0]), probs=np.array([1.0]))


def bounded_laws(a: float = 1.0) -> List[BoundedVariableSpec]:
    """Default family of bounded centered laws the inequality is exercised on."""
    return [two_point(a), two_point(a, a / 3.0), uniform_variable(a), truncated_gaussian(a, 0.5 * a)]


@dataclass
class ExpInequalityRow:
    lam: float
    lhs: float
    lhs_se: float
    rhs: float
    exact_lhs: Optional[float] = None
    se_multiplier: float = MC_CONFIG["se_multiplier"]

    @property
    def holds(self) -> bool:
        if self.exact_lhs is not None:
            return self.exact_lhs <= self.rhs * (1.0 + 1e-12)
        return self.lhs <= self.rhs + self.se_multiplier * self.lhs_se

    def to_dict(self) -> Dict[str, Any]:
        return {"lambda": self.lam, "lhs": self.lhs, "lhs_se": self.lhs_se, "rhs": self.rhs,
                "exact_lhs": self.exact_lhs, "holds": self.holds}


@dataclass
class ExpInequalityReport:
    spec_name: str
    a: float
    c: float
    second_moment: float
    rows: List[ExpInequalityRow] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return all(r.holds for r in self.rows)

    def to_dict(self) -> Dict[str, Any]:
        return {"spec": self.spec_name, "a": self.a, "c": self.c, "second_moment": self.second_moment,
                "holds": self.holds, "rows": [r.to_dict() for r in self.rows]}


def exp_inequality_check(spec: BoundedVariableSpec, lambdas: Sequence[float] = (-1.0, -0.5, 0.5, 1.0),
                         reps: int = 100_000, seed: SeedLike = None) -> ExpInequalityReport:
    """
    Monte Carlo (and, for finite laws, exact) check of
    E exp(lam xi) <= exp(c lam^2 E xi^2), c = e^a / 2.

    Raises:
        InvalidArgumentError: some |lam| > 1.
        SpecViolationError: a draw exceeds the declared bound a.
    """
    lambdas = [float(l) for l in lambdas]
    bad = [l for l in lambdas if abs(l) > 1.0]
    if bad:
        raise InvalidArgumentError(f"lambda must lie in [-1, 1], got {bad}", module="bounds")
    if reps < 2:
        raise InvalidArgumentError(f"reps must be >= 2, got {reps}", module="bounds")

    xi = np.asarray(spec.sampler(substream(seed, f"exp_inequality_{spec.name}"), reps), dtype=float)
    worst = float(np.max(np.abs(xi))) if xi.size else 0.0
    if worst > spec.a * (1.0 + 1e-12):
        raise SpecViolationError(f"{spec.name}: sampled |xi| = {worst:.6g} exceeds a = {spec.a:g}", module="bounds")
    m2 = spec.second_moment if spec.second_moment is not None else float(np.mean(xi ** 2))

    report = ExpInequalityReport(spec_name=spec.name, a=spec.a, c=spec.c, second_moment=m2)
    for lam in lambdas:
        vals = np.exp(lam * xi)
        exact = spec.exact_mgf(lam) if spec.finite else None
        report.rows.append(ExpInequalityRow(
            lam=lam, lhs=float(vals.mean()), lhs_se=float(vals.std(ddof=1) / math.sqrt(reps)),
            rhs=math.exp(spec.c * lam * lam * m2), exact_lhs=exact))
    logger.info(f"Exponential bound for {spec.name}: {'holds' if report.holds else 'FAILS'} "
                f"at lambda in {lambdas}")
    return report
