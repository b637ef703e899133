"""
Function classes, rate budgets and the neighborhoods of a center function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config.settings import GRID_CONFIG
from models.grid import Grid, GridFunction, default_grid
from utils.errors import InvalidArgumentError
from utils.logger import get_logger

logger = get_logger(__name__)

BUDGET_RTOL = 1e-9
SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class FunctionClassSpec:
    M: float = 0.5
    beta: float = 3.0
    L: float = 1.0
    A: float = -1.0
    B: float = 1.0

    def __post_init__(self):
        if not self.M > 0:
            raise InvalidArgumentError(f"M must be positive, got {self.M}", module="models")
        if not self.L > 0:
            raise InvalidArgumentError(f"L must be positive, got {self.L}", module="models")
        if not self.beta > 0:
            raise InvalidArgumentError(f"beta must be positive, got {self.beta}", module="models")
        if not self.A < self.B:
            raise InvalidArgumentError(f"need A < B, got A={self.A}, B={self.B}", module="models")

    @property
    def derivative_order(self) -> int:
        """Largest integer strictly below beta."""
        return int(math.ceil(self.beta)) - 1

    @property
    def holder_exponent(self) -> float:
        return self.beta - self.derivative_order

    @property
    def sup_bound(self) -> float:
        return min(self.M, self.L)


@dataclass(frozen=True)
class RateConstants:
    n: int
    c: float = 1.0
    c_prime: float = 1.0


def rates(rc: RateConstants, spec: FunctionClassSpec) -> Tuple[float, float]:
    """gamma_n = c (log n / n)^(beta/(2beta+1)), gamma'_n = c' (log n / n)^((beta-1)/(2beta+1))."""
    if rc.n < 2:
        raise InvalidArgumentError(f"rates need n >= 2, got {rc.n}", module="models")
    base = math.log(rc.n) / rc.n
    denom = 2.0 * spec.beta + 1.0
    gamma_n = rc.c * base ** (spec.beta / denom)
    gamma_prime_n = rc.c_prime * base ** ((spec.beta - 1.0) / denom)
    return gamma_n, gamma_prime_n


@dataclass
class MembershipReport:
    ok: bool
    violations: List[str] = field(default_factory=list)
    sup_norm: float = 0.0
    derivative_sups: List[float] = field(default_factory=list)
    holder_quotient: float = 0.0
    order: int = 0
    exponent: float = 1.0

    def __bool__(self) -> bool:
        return self.ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ok": self.ok,
            "violations": list(self.violations),
            "sup_norm": self.sup_norm,
            "derivative_sups": list(self.derivative_sups),
            "holder_quotient": self.holder_quotient,
            "order": self.order,
            "exponent": self.exponent,
        }


def holder_quotient(values: np.ndarray, step: float, alpha: float) -> float:
    """
    sup over grid pairs of |v(x) - v(y)| / |x - y|^alpha.

    Lags are scanned upward and the scan stops once 2 sup|v| / (lag*step)^alpha
    cannot beat the running maximum.
    """
    n = values.size
    if n < 2:
        return 0.0
    bound = 2.0 * float(np.max(np.abs(values)))
    best = 0.0
    for lag in range(1, n):
        dist = (lag * step) ** alpha
        if bound / dist <= best:
            break
        diffs = np.abs(values[lag:] - values[:-lag])
        best = max(best, float(np.max(diffs)) / dist)
    return best


def check_membership(f: GridFunction, spec: FunctionClassSpec, grid: Optional[Grid] = None,
                     slack: float = GRID_CONFIG["holder_slack"]) -> MembershipReport:
    """
    Grid-level proxy for membership in the class: sup-norm, derivatives up to
    the order below beta, and the Holder quotient of the top derivative.
    """
    grid = grid or default_grid()
    if f.grid != grid:
        raise InvalidArgumentError(f"function '{f.name}' is not on the working grid", module="models")

    k = spec.derivative_order
    alpha = spec.holder_exponent
    violations: List[str] = []

    sup = f.sup_norm()
    if sup > spec.sup_bound * (1.0 + BUDGET_RTOL) + SUPPORT_TOL:
        violations.append(f"sup|f| = {sup:.6g} exceeds min(M, L) = {spec.sup_bound:.6g}")

    derivs = [np.asarray(f.values)]
    sups: List[float] = []
    for r in range(1, k + 1):
        derivs.append(grid.derivative(derivs[-1]))
        s = float(np.max(np.abs(derivs[-1])))
        sups.append(s)
        if s > spec.L * slack:
            violations.append(f"sup|f^({r})| = {s:.6g} exceeds L = {spec.L:.6g}")

    quotient = holder_quotient(derivs[k], grid.step, alpha)
    if quotient > spec.L * slack:
        violations.append(f"Holder quotient of f^({k}) = {quotient:.6g} exceeds L = {spec.L:.6g}")

    report = MembershipReport(ok=not violations, violations=violations, sup_norm=sup,
                              derivative_sups=sups, holder_quotient=quotient, order=k, exponent=alpha)
    if violations:
        logger.debug(f"Membership check failed for '{f.name}': {violations}")
    return report


@dataclass(frozen=True, eq=False)
class PerturbedFunction:
    """f = f0 + g with the budgets used to build g."""

    f0: GridFunction
    g: GridFunction
    gamma_n: float
    gamma_prime_n: float

    def __post_init__(self):
        self.f0.require_same_grid(self.g)

    @cached_property
    def f(self) -> GridFunction:
        return GridFunction(self.f0.grid, self.f0.values + self.g.values, name="f")

    @property
    def grid(self) -> Grid:
        return self.f0.grid

    @property
    def is_null(self) -> bool:
        return not np.any(self.g.values)


@dataclass
class NeighborhoodReport:
    ok: bool
    violations: List[str] = field(default_factory=list)
    g_sup: float = 0.0
    g_slope_sup: float = 0.0
    gamma_n: float = 0.0
    gamma_prime_n: float = 0.0
    membership: Optional[MembershipReport] = None

    def __bool__(self) -> bool:
        return self.ok


def check_neighborhood(pf: PerturbedFunction, rc: RateConstants, spec: FunctionClassSpec,
                       slack: float = GRID_CONFIG["holder_slack"]) -> NeighborhoodReport:
    """Support, sup-norm and derivative budget checks of g; membership of f0 + g."""
    gamma_n, gamma_prime_n = rates(rc, spec)
    grid = pf.grid
    violations: List[str] = []

    membership = check_membership(pf.f, spec, grid=grid, slack=slack)
    if not membership.ok:
        violations.extend(f"f0+g: {v}" for v in membership.violations)

    outside = ~grid.inside(spec.A, spec.B)
    leak = float(np.max(np.abs(pf.g.values[outside]))) if np.any(outside) else 0.0
    if leak > SUPPORT_TOL:
        violations.append(f"g is {leak:.3e} outside [A, B]")

    g_sup = pf.g.sup_norm()
    if g_sup > gamma_n * (1.0 + BUDGET_RTOL) + SUPPORT_TOL:
        violations.append(f"sup|g| = {g_sup:.6g} exceeds gamma_n = {gamma_n:.6g}")

    slope = float(np.max(np.abs(grid.derivative(pf.g.values))))
    if slope > gamma_prime_n * (1.0 + BUDGET_RTOL) + SUPPORT_TOL:
        violations.append(f"sup|g'| = {slope:.6g} exceeds gamma'_n = {gamma_prime_n:.6g}")

    return NeighborhoodReport(ok=not violations, violations=violations, g_sup=g_sup, g_slope_sup=slope,
                              gamma_n=gamma_n, gamma_prime_n=gamma_prime_n, membership=membership)


# function builders

def zero_function(grid: Grid, name: str = "zero") -> GridFunction:
    return GridFunction.zeros(grid, name=name)


def constant_function(grid: Grid, value: float) -> GridFunction:
    return GridFunction(grid, np.full(grid.size, float(value)), name=f"const({value:g})")


def sine_function(grid: Grid, amplitude: float, frequency: float = 1.0, phase: float = 0.0) -> GridFunction:
    return GridFunction.from_callable(grid, lambda x: amplitude * np.sin(frequency * x + phase),
                                      name=f"{amplitude:g}*sin({frequency:g}x+{phase:g})")


def clipped_linear_function(grid: Grid, slope: float, bound: float) -> GridFunction:
    return GridFunction.from_callable(grid, lambda x: np.clip(slope * x, -bound, bound),
                                      name=f"clip({slope:g}x, {bound:g})")


def smooth_bump(grid: Grid, a: float, b: float, height: float = 1.0) -> GridFunction:
    """C-infinity bump exp(1 - 1/(1 - t^2)) supported on [a, b], peak ``height`` at the midpoint."""
    if not a < b:
        raise InvalidArgumentError(f"bump needs a < b, got [{a}, {b}]", module="models")
    x = grid.points
    t = (2.0 * x - a - b) / (b - a)
    vals = np.zeros_like(x)
    inside = np.abs(t) < 1.0
    vals[inside] = height * np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return GridFunction(grid, vals, name=f"bump[{a:g},{b:g}]")


def budget_bump(grid: Grid, spec: FunctionClassSpec, gamma_n: float, gamma_prime_n: float,
                fraction: float = 1.0, a: Optional[float] = None, b: Optional[float] = None) -> GridFunction:
    """Bump on [a, b] within [A, B] scaled so both sup|g| and sup|g'| fit the budgets."""
    a = spec.A if a is None else a
    b = spec.B if b is None else b
    if a < spec.A or b > spec.B:
        raise InvalidArgumentError("bump support must lie in [A, B]", module="models")
    unit = smooth_bump(grid, a, b, 1.0)
    slope = float(np.max(np.abs(grid.derivative(unit.values))))
    height = fraction * min(gamma_n, gamma_prime_n / slope if slope > 0 else gamma_n)
    return GridFunction(grid, unit.values * height, name=f"budget_bump({fraction:g})")


def random_center(grid: Grid, spec: FunctionClassSpec, rng: np.random.Generator) -> GridFunction:
    """Random sine center inside the class: amplitude at most 0.45 min(M, L), frequency at most 1."""
    amplitude = rng.uniform(0.05, 0.45) * spec.sup_bound
    frequency = rng.uniform(0.2, 1.0)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    return sine_function(grid, amplitude, frequency, phase)


def random_perturbation(grid: Grid, spec: FunctionClassSpec, gamma_n: float, gamma_prime_n: float,
                        rng: np.random.Generator, max_bumps: int = 3) -> GridFunction:
    """Signed sum of one to ``max_bumps`` bumps in [A, B], rescaled into the budgets."""
    width_total = spec.B - spec.A
    vals = np.zeros(grid.size)
    for _ in range(int(rng.integers(1, max_bumps + 1))):
        width = rng.uniform(0.25, 1.0) * width_total
        a = rng.uniform(spec.A, spec.B - width)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        vals += sign * rng.uniform(0.3, 1.0) * smooth_bump(grid, a, a + width).values
    sup = float(np.max(np.abs(vals)))
    slope = float(np.max(np.abs(grid.derivative(vals))))
    if sup == 0.0:
        return GridFunction(grid, vals, name="random_perturbation")
    scale = min(gamma_n / sup, gamma_prime_n / slope if slope > 0 else np.inf) * rng.uniform(0.3, 1.0)
    return GridFunction(grid, vals * scale, name="random_perturbation")


def center_from_descriptor(desc: Dict[str, Any], grid: Grid) -> GridFunction:
    family = desc.get("family", "zero")
    if family == "zero":
        return zero_function(grid, name="f0")
    if family == "constant":
        return constant_function(grid, float(desc.get("value", 0.0)))
    if family == "sine":
        return sine_function(grid, float(desc.get("amplitude", 0.4)), float(desc.get("frequency", 1.0)),
                             float(desc.get("phase", 0.0)))
    if family == "clipped_linear":
        return clipped_linear_function(grid, float(desc.get("slope", 0.5)), float(desc.get("bound", 0.5)))
    raise InvalidArgumentError(f"unknown center family '{family}'", module="models")


def perturbation_from_descriptor(desc: Dict[str, Any], grid: Grid, spec: FunctionClassSpec,
                                 gamma_n: float, gamma_prime_n: float) -> GridFunction:
    family = desc.get("family", "bump")
    if family == "zero":
        return zero_function(grid, name="g")
    if family == "bump":
        return budget_bump(grid, spec, gamma_n, gamma_prime_n, float(desc.get("fraction", 1.0)),
                           desc.get("a"), desc.get("b"))
    if family == "haar_atom":
        from haar.expansion import DyadicIndex, haar_eval
        idx = DyadicIndex(int(desc.get("j", 0)), int(desc.get("k", 1)))
        coef = float(desc.get("coefficient", gamma_n))
        return GridFunction(grid, coef * haar_eval(idx, grid.points, spec.A, spec.B), name=f"haar_atom{idx}")
    raise InvalidArgumentError(f"unknown perturbation family '{family}'", module="models")


def perturbed(f0: GridFunction, g: GridFunction, spec: FunctionClassSpec, rc: RateConstants) -> PerturbedFunction:
    gamma_n, gamma_prime_n = rates(rc, spec)
    return PerturbedFunction(f0=f0, g=g, gamma_n=gamma_n, gamma_prime_n=gamma_prime_n)
