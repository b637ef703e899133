"""
Transfer operator of the autoregression chain and its fixed point.

(T psi)(x) = integral p(x - f(y)) psi(y) dy. Each source point y_j is
deposited on the grid point nearest to f(y_j) with the offset handled by a
third-order Taylor expansion of p, so one application costs four FFT
convolutions.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
from scipy.signal import fftconvolve

from config.settings import SOLVER_CONFIG
from models.grid import GridDistribution, GridFunction
from models.noise import NoiseModel
from utils.errors import (
    ContractionViolatedError,
    ConvergenceError,
    InvalidArgumentError,
    TruncationError,
)
from utils.file_utils import write_json
from utils.logger import get_logger
from utils.rng import SeedLike, as_generator

logger = get_logger(__name__)

MASS_TOL = 1e-6
TAYLOR_COEFS = (1.0, -1.0, 0.5, -1.0 / 6.0)


class TransferOperator:
    """Discretized transfer operator for a fixed drift f and noise density p."""

    def __init__(self, f: GridFunction, noise: NoiseModel, leak_tolerance: float = SOLVER_CONFIG["leak_tolerance"]):
        if f.grid != noise.grid:
            raise InvalidArgumentError("drift and noise live on different grids", module="stationary")
        self.f = f
        self.noise = noise
        self.grid = f.grid
        self.leak_tolerance = leak_tolerance

        grid = self.grid
        n = grid.size
        pos = (np.asarray(f.values) - grid.x_min) / grid.step
        self._target = np.clip(np.rint(pos).astype(np.int64), 0, n - 1)
        offset = np.asarray(f.values) - grid.points[self._target]
        self._offsets = [np.ones(n), offset, offset ** 2, offset ** 3]
        self._weights = np.full(n, grid.step)
        self._weights[0] *= 0.5
        self._weights[-1] *= 0.5
        lags = grid.step * np.arange(-(n - 1), n, dtype=float)
        self._kernels = noise.density_derivatives(lags)

    def apply_values(self, psi: np.ndarray) -> np.ndarray:
        """One application on raw values; result is clipped at 0 and not renormalized."""
        n = self.grid.size
        mass = self._weights * psi
        out = np.zeros(n)
        for coef, offs, kern in zip(TAYLOR_COEFS, self._offsets, self._kernels):
            moments = np.bincount(self._target, weights=mass * offs, minlength=n)
            if not np.any(moments):
                continue
            out += coef * fftconvolve(moments, kern, mode="full")[n - 1:2 * n - 1]
        return np.clip(out, 0.0, None)

    def step(self, psi: np.ndarray) -> np.ndarray:
        out = self.apply_values(psi)
        total = self.grid.integrate(out)
        leak = 1.0 - total
        if leak > self.leak_tolerance:
            raise TruncationError(f"transfer step leaked mass {leak:.3e} past the grid", module="stationary")
        return out / total

    def __call__(self, psi: GridFunction) -> GridFunction:
        return transfer_apply(psi, self.f, self.noise, operator=self)


def transfer_apply(psi: GridFunction, f: GridFunction, noise: NoiseModel,
                   operator: Optional[TransferOperator] = None) -> GridFunction:
    """
    Apply the transfer operator to a probability density on the grid.

    Raises:
        InvalidArgumentError: psi is negative or does not integrate to 1.
        TruncationError: more than the leak tolerance escapes the grid.
    """
    if np.any(psi.values < 0):
        raise InvalidArgumentError("psi must be nonnegative", module="stationary")
    mass = psi.integral()
    if abs(mass - 1.0) > MASS_TOL:
        raise InvalidArgumentError(f"psi integrates to {mass:.8f}, expected 1", module="stationary")
    op = operator or TransferOperator(f, noise)
    return GridFunction(psi.grid, op.step(np.asarray(psi.values)), name="T(psi)", fill=0.0)


def dobrushin_rho(noise: NoiseModel, M: float, points: int = SOLVER_CONFIG["shift_scan_points"]) -> float:
    """(1/2) sup over shifts u in [0, 2M] of the L1 distance between p and p(. - u)."""
    if M < 0:
        raise InvalidArgumentError(f"M must be nonnegative, got {M}", module="stationary")
    if M == 0:
        return 0.0
    return 0.5 * max_shift_l1(noise, 2.0 * M, points)


def shift_l1(noise: NoiseModel, u: float) -> float:
    """Integral of |p(x) - p(x - u)| on the noise grid padded by |u|."""
    grid = noise.grid.padded(abs(u))
    x = grid.points
    return grid.integrate(np.abs(noise.pdf(x) - noise.pdf(x - u)))


def max_shift_l1(noise: NoiseModel, max_shift: float, points: int = SOLVER_CONFIG["shift_scan_points"]) -> float:
    if max_shift <= 0:
        return 0.0
    return max(shift_l1(noise, float(u)) for u in np.linspace(0.0, max_shift, points)[1:])


@dataclass(frozen=True, eq=False)
class StationaryDensity:
    """Fixed point psi_f of the transfer operator with its solver diagnostics."""

    psi: GridFunction
    residual: float
    iterations: int
    rho: float
    minorization_mass: float
    drift_name: str = ""

    @cached_property
    def distribution(self) -> GridDistribution:
        return GridDistribution(self.psi.grid, self.psi.values)

    def cdf(self, x):
        return self.distribution.cdf(x)

    def quantile(self, u):
        return self.distribution.quantile(u)

    def pdf(self, x):
        return self.psi.evaluate(x)

    def report(self) -> Dict[str, Any]:
        return {
            "drift": self.drift_name,
            "residual": self.residual,
            "iterations": self.iterations,
            "rho": self.rho,
            "minorization_mass": self.minorization_mass,
        }

    def to_csv(self, path: Union[str, Path]) -> Path:
        return self.psi.to_csv(path)

    def write_report(self, path: Union[str, Path]) -> Path:
        return write_json(path, self.report())


@dataclass
class MinorizationReport:
    ok: bool
    mu0: float
    worst_ratio: float
    failing_cells: int


def minorization_check(psi: GridFunction, f: GridFunction, noise: NoiseModel,
                       slack: float = SOLVER_CONFIG["minorization_slack"], scan: int = 33,
                       floor_rel: float = 1e-10) -> MinorizationReport:
    """
    Grid-level minorization: every cell mass of psi is at least (1 - slack) mu(B),
    mu(B) = cell width times the smallest transition density into B over the range of f.

    Cells whose floor sits below floor_rel times the largest floor are left out of
    the comparison; there psi is at the round-off level of the convolution. They
    still count toward mu0.
    """
    x = psi.grid.points
    h = psi.grid.step
    lo, hi = float(np.min(f.values)), float(np.max(f.values))
    thetas = np.unique(np.concatenate(([lo, hi], np.linspace(lo, hi, scan))))
    floor = np.min(noise.pdf(x[None, :] - thetas[:, None]), axis=0)
    mu = h * floor
    cell = h * np.asarray(psi.values)
    checked = mu > floor_rel * float(np.max(mu))
    needed = (1.0 - slack) * mu
    failing = int(np.sum((cell < needed) & checked))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(checked, cell / mu, np.inf)
    worst = float(np.min(ratios)) if ratios.size else np.inf
    return MinorizationReport(ok=failing == 0, mu0=float(np.sum(mu)), worst_ratio=worst, failing_cells=failing)


def solve_stationary(f: GridFunction, noise: NoiseModel, tol: float = SOLVER_CONFIG["tol"],
                     max_iter: int = SOLVER_CONFIG["max_iter"]) -> StationaryDensity:
    """
    Power iteration of the transfer operator started at the noise density.

    Args:
        f: Autoregression function on the noise grid.
        noise: Innovation law.
        tol: Stop once the L1 residual of one step falls to tol.
        max_iter: Iteration budget.

    Returns:
        StationaryDensity carrying the residual, iteration count, the Dobrushin
        coefficient for M = sup|f| and the minorization mass.

    Raises:
        ConvergenceError: the residual is still above tol after max_iter steps.
    """
    if not tol > 0:
        raise InvalidArgumentError(f"tol must be positive, got {tol}", module="stationary")
    op = TransferOperator(f, noise)
    grid = f.grid
    psi = np.asarray(noise.density.values, dtype=float)
    psi = psi / grid.integrate(psi)
    residual = np.inf
    for it in range(1, max_iter + 1):
        new = op.step(psi)
        residual = grid.integrate(np.abs(new - psi))
        psi = new
        logger.debug(f"solve_stationary iteration {it}: residual {residual:.3e}")
        if residual <= tol:
            break
    else:
        raise ConvergenceError(f"no fixed point within {max_iter} iterations (residual {residual:.3e})",
                               last_residual=float(residual), module="stationary")

    rho = dobrushin_rho(noise, f.sup_norm())
    if rho > SOLVER_CONFIG["near_contraction_warning"]:
        logger.warning(f"Dobrushin coefficient {rho:.4f} for '{f.name}' is close to 1; contraction is weak")
    psi_fn = GridFunction(grid, psi, name=f"psi[{f.name}]", fill=0.0)
    minor = minorization_check(psi_fn, f, noise)
    if not minor.ok:
        logger.warning(f"Minorization fails on {minor.failing_cells} cells for '{f.name}' "
                       f"(worst ratio {minor.worst_ratio:.3f})")
    logger.info(f"Stationary density for '{f.name}': {it} iterations, residual {residual:.2e}, rho {rho:.4f}")
    return StationaryDensity(psi=psi_fn, residual=float(residual), iterations=it, rho=rho,
                             minorization_mass=minor.mu0, drift_name=f.name)


@dataclass
class Lemma61Result:
    lhs: float
    rhs: float
    holds: bool
    rho: float
    sup_distance: float

    def to_dict(self) -> Dict[str, Any]:
        return {"lhs": self.lhs, "rhs": self.rhs, "holds": self.holds, "rho": self.rho,
                "sup_distance": self.sup_distance}


def hellinger_sq(psi_a: GridFunction, psi_b: GridFunction) -> float:
    """Integral of (sqrt psi_a - sqrt psi_b)^2."""
    psi_a.require_same_grid(psi_b)
    diff = np.sqrt(np.clip(psi_a.values, 0.0, None)) - np.sqrt(np.clip(psi_b.values, 0.0, None))
    return psi_a.grid.integrate(diff * diff)


def lemma61_check(f: GridFunction, f0: GridFunction, noise: NoiseModel, M: Optional[float] = None,
                  sd_f: Optional[StationaryDensity] = None, sd_f0: Optional[StationaryDensity] = None,
                  tol: float = 1e-9) -> Lemma61Result:
    """
    Compare the squared Hellinger distance of the two stationary densities with
    (1/(1 - rho)) sup_{u <= |f - f0|_inf} integral |p - p(. - u)|.

    Raises:
        ContractionViolatedError: the Dobrushin coefficient is not below 1.
    """
    f.require_same_grid(f0)
    if M is None:
        M = max(f.sup_norm(), f0.sup_norm())
    rho = dobrushin_rho(noise, M)
    if rho >= 1.0:
        raise ContractionViolatedError(f"Dobrushin coefficient {rho:.6f} is not below 1", module="stationary")
    sd_f = sd_f or solve_stationary(f, noise)
    sd_f0 = sd_f0 or solve_stationary(f0, noise)
    lhs = hellinger_sq(sd_f.psi, sd_f0.psi)
    distance = float(np.max(np.abs(f.values - f0.values)))
    rhs = max_shift_l1(noise, distance) / (1.0 - rho)
    return Lemma61Result(lhs=lhs, rhs=rhs, holds=lhs <= rhs + tol, rho=rho, sup_distance=distance)


def sample_stationary(sd: StationaryDensity, count: int, seed: SeedLike) -> np.ndarray:
    """Inverse-CDF draws from psi."""
    if count < 0:
        raise InvalidArgumentError(f"count must be nonnegative, got {count}", module="stationary")
    rng = as_generator(seed, "stationary")
    return sd.distribution.sample(rng, count)
