"""
Noise models: densities with their log-density derivatives and Fisher
information, tabulated on a grid and checked by quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import stats

from models.grid import Grid, GridDistribution, GridFunction, default_grid
from utils.errors import InvalidArgumentError, TruncationError
from utils.logger import get_logger

logger = get_logger(__name__)

QUADRATURE_TOL = 1e-6


class GaussianFamily:
    """Centered normal law N(0, sigma^2)."""

    kind = "gaussian"

    def __init__(self, sigma: float):
        if not sigma > 0:
            raise InvalidArgumentError(f"sigma must be positive, got {sigma}", module="models")
        self.sigma = float(sigma)
        self._log_norm = math.log(self.sigma * math.sqrt(2.0 * math.pi))

    def logpdf(self, x):
        return -0.5 * np.square(x) / self.sigma ** 2 - self._log_norm

    def score(self, x):
        return -np.asarray(x, dtype=float) / self.sigma ** 2

    def curvature(self, x):
        return np.full(np.shape(x), -1.0 / self.sigma ** 2)

    def third(self, x):
        return np.zeros(np.shape(x))

    def third_bound(self, grid: Grid) -> float:
        return 0.0

    def fisher_exact(self) -> Optional[float]:
        return 1.0 / self.sigma ** 2

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.normal(0.0, self.sigma, size)

    def ppf(self, u):
        return stats.norm.ppf(u, scale=self.sigma)

    def tail_mass(self, grid: Grid) -> float:
        return float(stats.norm.cdf(grid.x_min, scale=self.sigma) + stats.norm.sf(grid.x_max, scale=self.sigma))

    def invert_score(self, values):
        return -np.asarray(values, dtype=float) * self.sigma ** 2

    def rescaled(self, factor: float) -> "GaussianFamily":
        return GaussianFamily(self.sigma * factor)

    def describe(self) -> Dict[str, Any]:
        return {"family": self.kind, "sigma": self.sigma}


class LogisticFamily:
    """Logistic law with location 0 and scale s; Fisher information 1/(3 s^2)."""

    kind = "logistic"

    def __init__(self, scale: float):
        if not scale > 0:
            raise InvalidArgumentError(f"logistic scale must be positive, got {scale}", module="models")
        self.scale = float(scale)

    def logpdf(self, x):
        z = np.abs(np.asarray(x, dtype=float)) / self.scale
        return -z - 2.0 * np.log1p(np.exp(-z)) - math.log(self.scale)

    def score(self, x):
        return -np.tanh(np.asarray(x, dtype=float) / (2.0 * self.scale)) / self.scale

    def curvature(self, x):
        u = np.asarray(x, dtype=float) / (2.0 * self.scale)
        return -0.5 / self.scale ** 2 / np.cosh(u) ** 2

    def third(self, x):
        u = np.asarray(x, dtype=float) / (2.0 * self.scale)
        return 0.5 / self.scale ** 3 * np.tanh(u) / np.cosh(u) ** 2

    def third_bound(self, grid: Grid) -> float:
        # max of sech^2(u) tanh(u) is 2 / (3 sqrt 3), at tanh u = 1/sqrt 3
        return 1.0 / (3.0 * math.sqrt(3.0) * self.scale ** 3)

    def fisher_exact(self) -> Optional[float]:
        return 1.0 / (3.0 * self.scale ** 2)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.logistic(0.0, self.scale, size)

    def ppf(self, u):
        return stats.logistic.ppf(u, scale=self.scale)

    def tail_mass(self, grid: Grid) -> float:
        return float(stats.logistic.cdf(grid.x_min, scale=self.scale) + stats.logistic.sf(grid.x_max, scale=self.scale))

    def invert_score(self, values):
        v = np.asarray(values, dtype=float) * self.scale
        if np.any(np.abs(v) >= 1.0):
            raise InvalidArgumentError("logistic score value outside (-1/s, 1/s)", module="models")
        return -2.0 * self.scale * np.arctanh(v)

    def rescaled(self, factor: float) -> "LogisticFamily":
        return LogisticFamily(self.scale * factor)

    def describe(self) -> Dict[str, Any]:
        return {"family": self.kind, "scale": self.scale}


class TabulatedFamily:
    """
    Density given by positive values on a grid.

    The log-density is interpolated linearly and continued linearly past the
    grid edges; derivatives are finite differences of the tabulated log-density.
    """

    kind = "tabulated"

    def __init__(self, grid: Grid, values: np.ndarray, factor: float = 1.0):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.size,):
            raise InvalidArgumentError("tabulated density does not match its grid", module="models")
        if np.any(~np.isfinite(values)) or np.any(values <= 0):
            raise InvalidArgumentError("tabulated density must be finite and strictly positive", module="models")
        self.base_grid = grid
        self.base_values = values
        self.factor = float(factor)
        mass = grid.integrate(values)
        if not np.isfinite(mass) or mass <= 0:
            raise InvalidArgumentError("tabulated density is not integrable", module="models")
        self._log = np.log(values / mass)
        self._d1 = grid.derivative(self._log)
        self._d2 = grid.derivative(self._d1)
        self._d3 = grid.derivative(self._d2)
        self._dist = GridDistribution(grid, values / mass)

    def _base_eval(self, table: np.ndarray, y: np.ndarray, extrapolate: bool) -> np.ndarray:
        g = self.base_grid
        out = np.interp(y, g.points, table)
        if extrapolate:
            lo_slope = (table[1] - table[0]) / g.step
            hi_slope = (table[-1] - table[-2]) / g.step
            out = np.where(y < g.x_min, table[0] + lo_slope * (y - g.x_min), out)
            out = np.where(y > g.x_max, table[-1] + hi_slope * (y - g.x_max), out)
        return out

    def logpdf(self, x):
        y = np.asarray(x, dtype=float) / self.factor
        return self._base_eval(self._log, y, True) - math.log(self.factor)

    def score(self, x):
        y = np.asarray(x, dtype=float) / self.factor
        return self._base_eval(self._d1, y, False) / self.factor

    def curvature(self, x):
        y = np.asarray(x, dtype=float) / self.factor
        return self._base_eval(self._d2, y, False) / self.factor ** 2

    def third(self, x):
        y = np.asarray(x, dtype=float) / self.factor
        return self._base_eval(self._d3, y, False) / self.factor ** 3

    def third_bound(self, grid: Grid) -> float:
        return float(np.max(np.abs(self.third(grid.points))))

    def fisher_exact(self) -> Optional[float]:
        return None

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.factor * self._dist.sample(rng, size)

    def ppf(self, u):
        return self.factor * self._dist.quantile(u)

    def tail_mass(self, grid: Grid) -> float:
        inside = self._dist.cdf(grid.x_max / self.factor) - self._dist.cdf(grid.x_min / self.factor)
        return float(max(0.0, 1.0 - inside))

    def invert_score(self, values):
        return None

    def rescaled(self, factor: float) -> "TabulatedFamily":
        return TabulatedFamily(self.base_grid, self.base_values, self.factor * factor)

    def describe(self) -> Dict[str, Any]:
        return {"family": self.kind, "factor": self.factor, "points": int(self.base_grid.size)}


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Density p with score l', curvature l'', the bound c1 on |l'''| and Fisher information."""

    name: str
    family: Any
    grid: Grid
    density: GridFunction
    score: GridFunction
    curvature: GridFunction
    third_deriv_bound: float
    fisher_info: float

    def logpdf(self, x):
        return self.family.logpdf(x)

    def pdf(self, x):
        return np.exp(self.family.logpdf(x))

    def score_at(self, x):
        return self.family.score(x)

    def curvature_at(self, x):
        return self.family.curvature(x)

    def third_at(self, x):
        return self.family.third(x)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.family.sample(rng, size)

    def ppf(self, u):
        return self.family.ppf(u)

    def invert_score(self, values):
        return self.family.invert_score(values)

    @property
    def variance_of_score(self) -> float:
        return self.fisher_info

    def density_derivatives(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """p, p', p'', p''' at x, from the log-density derivatives."""
        p = self.pdf(x)
        l1 = self.score_at(x)
        l2 = self.curvature_at(x)
        l3 = self.third_at(x)
        return p, l1 * p, (l2 + l1 * l1) * p, (l3 + 3.0 * l1 * l2 + l1 ** 3) * p

    @cached_property
    def distribution(self) -> GridDistribution:
        return GridDistribution(self.grid, self.density.values)

    def describe(self) -> Dict[str, Any]:
        out = dict(self.family.describe())
        out.update({"name": self.name, "fisher_info": self.fisher_info, "c1": self.third_deriv_bound})
        return out


def build_noise(family: Any, grid: Optional[Grid] = None, name: Optional[str] = None) -> NoiseModel:
    """
    Tabulate ``family`` on ``grid`` and check the quadrature invariants.

    Raises:
        TruncationError: tail mass outside the grid exceeds the quadrature tolerance.
        InvalidArgumentError: density, centering or Fisher information checks fail.
    """
    grid = grid or default_grid()
    tail = family.tail_mass(grid)
    if tail > QUADRATURE_TOL:
        raise TruncationError(f"noise tail mass {tail:.3e} lies outside the grid", module="models")

    x = grid.points
    dens = np.exp(family.logpdf(x))
    score = np.asarray(family.score(x), dtype=float)
    curv = np.asarray(family.curvature(x), dtype=float)

    mass = grid.integrate(dens)
    centering = grid.integrate(score * dens)
    fisher = grid.integrate(score * score * dens)
    if abs(mass - 1.0) > QUADRATURE_TOL:
        raise InvalidArgumentError(f"noise density integrates to {mass:.8f}", module="models")
    if abs(centering) > QUADRATURE_TOL:
        raise InvalidArgumentError(f"score is not centered: {centering:.3e}", module="models")
    exact = family.fisher_exact()
    if exact is not None and abs(fisher - exact) > QUADRATURE_TOL * max(1.0, exact):
        raise InvalidArgumentError(f"Fisher information quadrature {fisher:.8f} != {exact:.8f}", module="models")
    if not np.isfinite(fisher) or fisher <= 0:
        raise InvalidArgumentError("Fisher information must be finite and positive", module="models")

    label = name or family.kind
    model = NoiseModel(
        name=label,
        family=family,
        grid=grid,
        density=GridFunction(grid, dens, name=f"{label}_density", fill=0.0),
        score=GridFunction(grid, score, name=f"{label}_score"),
        curvature=GridFunction(grid, curv, name=f"{label}_curvature"),
        third_deriv_bound=float(family.third_bound(grid)),
        fisher_info=float(exact if exact is not None else fisher),
    )
    logger.debug(f"Built noise model {label}: I={model.fisher_info:.6f}, c1={model.third_deriv_bound:.4f}")
    return model


def gaussian_noise(sigma: float, grid: Optional[Grid] = None) -> NoiseModel:
    return build_noise(GaussianFamily(sigma), grid, name=f"gaussian(sigma={sigma:g})")


def logistic_noise(scale: float, grid: Optional[Grid] = None) -> NoiseModel:
    return build_noise(LogisticFamily(scale), grid, name=f"logistic(scale={scale:g})")


def tabulated_noise(grid: Grid, values: np.ndarray, name: str = "tabulated") -> NoiseModel:
    return build_noise(TabulatedFamily(grid, values), grid, name=name)


def match_fisher(q_template: NoiseModel, target_I: float) -> NoiseModel:
    """
    Rescale the template so that its Fisher information equals ``target_I``.

    Scaling x -> a*x divides the Fisher information by a^2, so a = sqrt(I_t / target).
    """
    if not target_I > 0:
        raise InvalidArgumentError(f"target Fisher information must be positive, got {target_I}", module="models")
    template_I = q_template.fisher_info
    if not np.isfinite(template_I) or template_I <= 0:
        raise InvalidArgumentError("template Fisher information must be finite and positive", module="models")
    factor = math.sqrt(template_I / target_I)
    if abs(factor - 1.0) < 1e-15:
        return q_template
    family = q_template.family.rescaled(factor)
    model = build_noise(family, q_template.grid, name=f"{q_template.family.kind}(I={target_I:g})")
    if abs(model.fisher_info - target_I) > QUADRATURE_TOL * max(1.0, target_I):
        raise InvalidArgumentError(
            f"matched Fisher information {model.fisher_info:.8f} misses target {target_I}", module="models")
    logger.info(f"Matched {q_template.name} to I={target_I:g} with scale factor {factor:.6f}")
    return model


def noise_from_descriptor(desc: Dict[str, Any], grid: Optional[Grid] = None) -> NoiseModel:
    """
    Build a noise model from an experiment descriptor such as {"family": "gaussian", "sigma": 1}.

    {"family": "tabulated", "of": {...}} tabulates the density of the nested
    descriptor and works from the table alone.
    """
    family = desc.get("family", "gaussian")
    if family == "gaussian":
        model = gaussian_noise(float(desc.get("sigma", 1.0)), grid)
    elif family == "logistic":
        model = logistic_noise(float(desc.get("scale", 1.0 / math.sqrt(3.0))), grid)
    elif family == "tabulated":
        base = noise_from_descriptor(desc.get("of", {"family": "gaussian"}), grid)
        model = tabulated_noise(base.grid, base.density.values, name=f"tabulated[{base.name}]")
    else:
        raise InvalidArgumentError(f"unknown noise family '{family}'", module="models")
    if desc.get("fisher_info") is not None:
        model = match_fisher(model, float(desc["fisher_info"]))
    return model
