"""
Maximal coupling of a discretized pair (xi, eta): a copy xi_tilde independent
of eta, equal in law to xi, and different from xi with conditional probability
TV(p_xi, p_xi|eta). Also the uniform mixing coefficient of the autoregression
between cells of its state space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from config.settings import MC_CONFIG
from models.grid import GridFunction
from models.noise import NoiseModel
from stationary.transfer import StationaryDensity, TransferOperator, solve_stationary
from utils.errors import DegenerateConditionalError, InvalidArgumentError
from utils.logger import get_logger
from utils.rng import SeedLike, substream

logger = get_logger(__name__)

JOINT_TOL = 1e-9
PHI_FLOOR = 1e-12


def _validate_joint(joint) -> np.ndarray:
    P = np.asarray(joint, dtype=float)
    if P.ndim != 2 or P.size == 0:
        raise InvalidArgumentError("joint must be a non-empty 2-d table", module="coupling")
    if np.any(P < 0):
        raise InvalidArgumentError("joint has negative cells", module="coupling")
    if abs(float(P.sum()) - 1.0) > JOINT_TOL:
        raise InvalidArgumentError(f"joint sums to {P.sum():.10f}, expected 1", module="coupling")
    if np.any(P.sum(axis=0) <= 0):
        bad = int(np.flatnonzero(P.sum(axis=0) <= 0)[0])
        raise DegenerateConditionalError(f"eta cell {bad} has zero mass; its conditional is undefined",
                                         module="coupling")
    if np.any(P.sum(axis=1) <= 0):
        bad = int(np.flatnonzero(P.sum(axis=1) <= 0)[0])
        raise DegenerateConditionalError(f"xi cell {bad} has zero mass", module="coupling")
    return P


def exact_phi(joint) -> Tuple[float, np.ndarray]:
    """
    phi(xi, eta) = max over eta cells y of TV(p_xi, p_xi|eta=y), by enumeration.

    Returns:
        (phi, phi_y) with phi_y the per-cell total variation distances.
    """
    P = _validate_joint(joint)
    p_xi = P.sum(axis=1)
    cond = P / P.sum(axis=0, keepdims=True)
    phi_y = 0.5 * np.abs(cond - p_xi[:, None]).sum(axis=0)
    return float(phi_y.max()), phi_y


@dataclass
class BerbeeResult:
    xi: np.ndarray
    eta: np.ndarray
    xi_tilde: np.ndarray
    phi: float
    phi_y: np.ndarray
    mean_phi: float
    mismatch: float
    mismatch_se: float
    chi2_pvalue: float
    ks: float
    se_multiplier: float = MC_CONFIG["se_multiplier"]

    @property
    def mismatch_holds(self) -> bool:
        return self.mismatch <= self.phi + self.se_multiplier * self.mismatch_se

    def independent(self, alpha: float = 0.01) -> bool:
        return self.chi2_pvalue >= alpha

    def to_dict(self) -> Dict[str, Any]:
        return {"draws": int(self.xi.size), "phi": self.phi, "phi_y": self.phi_y.tolist(),
                "mean_phi": self.mean_phi, "mismatch": self.mismatch, "mismatch_se": self.mismatch_se,
                "mismatch_holds": self.mismatch_holds, "chi2_pvalue": self.chi2_pvalue, "ks": self.ks}


def _independence_pvalue(a: np.ndarray, b: np.ndarray, na: int, nb: int) -> float:
    table = np.zeros((na, nb))
    np.add.at(table, (a, b), 1.0)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if table.shape[0] < 2 or table.shape[1] < 2:
        return 1.0
    return float(stats.chi2_contingency(table, correction=False)[1])


def berbee_couple(joint, seed: SeedLike, draws: int = 1) -> BerbeeResult:
    """
    Draw (xi, eta) from ``joint`` (rows: xi cells, columns: eta cells) and
    build xi_tilde: keep xi when Delta * p_xi|eta(xi) <= p_xi(xi), otherwise
    redraw from the normalized excess (p_xi - p_xi|eta)_+ by its quantile
    transform.

    Raises:
        DegenerateConditionalError: a row or column of the joint has no mass.
    """
    P = _validate_joint(joint)
    if draws < 1:
        raise InvalidArgumentError(f"draws must be >= 1, got {draws}", module="coupling")
    nx, ny = P.shape
    p_xi = P.sum(axis=1)
    p_eta = P.sum(axis=0)
    cond = P / p_eta[None, :]
    excess = np.clip(p_xi[:, None] - cond, 0.0, None)
    phi_y = excess.sum(axis=0)
    excess_cdf = np.cumsum(excess, axis=0) / np.where(phi_y > 0, phi_y, 1.0)[None, :]

    rng = substream(seed, "berbee")
    cells = rng.choice(P.size, size=draws, p=P.ravel())
    xi, eta = np.divmod(cells, ny)
    delta = rng.random(draws)
    redraw_u = rng.random(draws)

    keep = delta * cond[xi, eta] <= p_xi[xi]
    xi_tilde = xi.copy()
    moved = np.flatnonzero(~keep)
    for i in moved:
        col = excess_cdf[:, eta[i]]
        xi_tilde[i] = min(int(np.searchsorted(col, redraw_u[i], side="right")), nx - 1)

    mismatch_flags = (xi_tilde != xi).astype(float)
    mismatch = float(mismatch_flags.mean())
    mismatch_se = float(mismatch_flags.std(ddof=1) / math.sqrt(draws)) if draws > 1 else 0.0
    empirical = np.cumsum(np.bincount(xi_tilde, minlength=nx)) / draws
    ks = float(np.max(np.abs(empirical - np.cumsum(p_xi))))
    pvalue = _independence_pvalue(xi_tilde, eta, nx, ny) if draws > 1 else 1.0
    mean_phi = float(np.dot(p_eta, phi_y))
    result = BerbeeResult(xi=xi, eta=eta, xi_tilde=xi_tilde, phi=float(phi_y.max()), phi_y=phi_y,
                          mean_phi=mean_phi, mismatch=mismatch, mismatch_se=mismatch_se, chi2_pvalue=pvalue, ks=ks)
    logger.info(f"Maximal coupling: phi = {result.phi:.4f}, mismatch {mismatch:.4f} +- {mismatch_se:.4f}, "
                f"chi2 p = {pvalue:.3f}, KS = {ks:.4f}")
    return result


@dataclass
class GeometricFit:
    rho_hat: float
    c_hat: float
    c0_hat: float
    r_squared: float
    points: int

    def to_dict(self) -> Dict[str, Any]:
        return {"rho_hat": self.rho_hat, "c_hat": self.c_hat, "c0_hat": self.c0_hat,
                "r_squared": self.r_squared, "points": self.points}


def geometric_fit(lags: Sequence[int], phis: Sequence[float], floor: float = PHI_FLOOR) -> Optional[GeometricFit]:
    """
    Fit log phi(k) = log c + k log rho over the lags with phi above ``floor``.

    c0_hat = -1 / log rho_hat is the separation per unit of log m that brings
    rho^(c0 log m) down to 1/m.
    """
    k = np.asarray(lags, dtype=float)
    y = np.asarray(phis, dtype=float)
    keep = y > floor
    if keep.sum() < 2:
        return None
    fit = stats.linregress(k[keep], np.log(y[keep]))
    rho = float(math.exp(fit.slope))
    c0 = -1.0 / fit.slope if fit.slope < 0 else math.inf
    return GeometricFit(rho_hat=rho, c_hat=float(math.exp(fit.intercept)), c0_hat=float(c0),
                        r_squared=float(fit.rvalue ** 2), points=int(keep.sum()))


@dataclass
class PhiMixingResult:
    lags: List[int]
    phi_operator: List[float]
    phi_simulated: List[float]
    cell_edges: np.ndarray
    fit: Optional[GeometricFit] = None
    steps: int = 0

    def nonincreasing(self, tol: float = 1e-9) -> bool:
        v = np.asarray(self.phi_operator)
        return bool(np.all(np.diff(v) <= tol))

    def to_dict(self) -> Dict[str, Any]:
        return {"lags": list(self.lags), "phi_operator": list(self.phi_operator),
                "phi_simulated": list(self.phi_simulated), "cell_edges": self.cell_edges.tolist(),
                "steps": self.steps, "fit": self.fit.to_dict() if self.fit else None}


def _cell_edges(sd: StationaryDensity, cells: int) -> np.ndarray:
    inner = np.asarray(sd.quantile(np.arange(1, cells) / cells), dtype=float)
    return np.concatenate(([-np.inf], inner, [np.inf]))


def phi_mixing_chain(f: GridFunction, noise: NoiseModel, lags: Sequence[int] = (1, 2, 3, 4, 5, 6),
                     cells: int = 8, seed: SeedLike = None, steps: int = 200_000,
                     sd: Optional[StationaryDensity] = None) -> PhiMixingResult:
    """
    phi(k) = max over conditioning cells B of TV(P(X_k in . | X_0 in B), psi_f).

    The operator value pushes psi_f restricted to B through k transfer steps
    and compares on the full grid. The simulated value uses a chain of
    ``steps`` transitions and compares cell frequencies; it is 0 when steps = 0.
    """
    lags = sorted(int(k) for k in lags)
    if not lags or lags[0] < 1:
        raise InvalidArgumentError("lags must be positive integers", module="coupling")
    if cells < 2:
        raise InvalidArgumentError(f"need at least 2 cells, got {cells}", module="coupling")
    sd = sd or solve_stationary(f, noise)
    grid = f.grid
    psi = np.asarray(sd.psi.values, dtype=float)
    edges = _cell_edges(sd, cells)
    op = TransferOperator(f, noise)
    cell_of_grid = np.clip(np.searchsorted(edges, grid.points, side="right") - 1, 0, cells - 1)

    phi_op = np.zeros(len(lags))
    for c in range(cells):
        start = np.where(cell_of_grid == c, psi, 0.0)
        mass = grid.integrate(start)
        if mass <= 0:
            continue
        current = start / mass
        k_done = 0
        for n, k in enumerate(lags):
            while k_done < k:
                current = op.step(current)
                k_done += 1
            tv = 0.5 * grid.integrate(np.abs(current - psi))
            phi_op[n] = max(phi_op[n], tv)

    phi_sim = np.zeros(len(lags))
    if steps > 0:
        rng = substream(seed, "phi_mixing")
        x = np.empty(steps + 1)
        x[0] = float(sd.distribution.sample(rng, 1)[0])
        eps = noise.sample(rng, steps)
        for i in range(steps):
            x[i + 1] = f.evaluate(x[i]) + eps[i]
        labels = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, cells - 1)
        marginal = np.bincount(labels, minlength=cells) / labels.size
        for n, k in enumerate(lags):
            table = np.zeros((cells, cells))
            np.add.at(table, (labels[:-k], labels[k:]), 1.0)
            rows = table.sum(axis=1, keepdims=True)
            cond = table / np.where(rows > 0, rows, 1.0)
            phi_sim[n] = float(np.max(0.5 * np.abs(cond - marginal[None, :]).sum(axis=1)))

    fit = geometric_fit(lags, phi_op)
    if fit is not None:
        logger.info(f"phi-mixing decay: rho_hat = {fit.rho_hat:.4f}, R^2 = {fit.r_squared:.3f}")
    return PhiMixingResult(lags=lags, phi_operator=phi_op.tolist(), phi_simulated=phi_sim.tolist(),
                           cell_edges=edges, fit=fit, steps=steps)
