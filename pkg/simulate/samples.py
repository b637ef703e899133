"""
Observations of the three experiments: autoregression, regression with random
design drawn from the center's stationary density, and regression on the
regular design given by its quantiles.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from models.function_class import PerturbedFunction
from models.grid import GridFunction
from models.noise import NoiseModel
from stationary.transfer import StationaryDensity
from utils.errors import InvalidArgumentError
from utils.file_utils import write_csv
from utils.logger import get_logger
from utils.rng import SeedLike, substream

logger = get_logger(__name__)

SAMPLE_COLUMNS = ["index", "x", "y", "innovation"]


def _law(pf: PerturbedFunction, law: str) -> GridFunction:
    if law == "f":
        return pf.f
    if law == "f0":
        return pf.f0
    raise InvalidArgumentError(f"law must be 'f' or 'f0', got '{law}'", module="simulate")


@dataclass(frozen=True, eq=False)
class ArTrajectory:
    """X_0..X_n with innovations and the drift values f(X_{i-1}) actually used."""

    x: np.ndarray
    eps: np.ndarray
    drift: np.ndarray
    f_used: PerturbedFunction
    law: str
    seed: object = None

    @property
    def n(self) -> int:
        return int(self.eps.size)

    @property
    def covariates(self) -> np.ndarray:
        return self.x[:-1]

    @property
    def responses(self) -> np.ndarray:
        return self.x[1:]

    def reconstruction_error(self) -> float:
        if self.n == 0:
            return 0.0
        return float(np.max(np.abs(self.x[1:] - self.drift - self.eps)))

    def to_csv(self, path: Union[str, Path]) -> Path:
        rows = ({"index": i + 1, "x": self.x[i], "y": self.x[i + 1], "innovation": self.eps[i]}
                for i in range(self.n))
        return write_csv(path, SAMPLE_COLUMNS, rows)


@dataclass(frozen=True, eq=False)
class RandomDesignSample:
    xi: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    signal: np.ndarray
    law: str = "f"

    @property
    def n(self) -> int:
        return int(self.y.size)

    @property
    def covariates(self) -> np.ndarray:
        return self.xi

    def to_csv(self, path: Union[str, Path]) -> Path:
        rows = ({"index": i + 1, "x": self.xi[i], "y": self.y[i], "innovation": self.eta[i]} for i in range(self.n))
        return write_csv(path, SAMPLE_COLUMNS, rows)


@dataclass(frozen=True, eq=False)
class FixedDesignSample:
    t: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    signal: np.ndarray
    law: str = "f"

    @property
    def n(self) -> int:
        return int(self.y.size)

    @property
    def covariates(self) -> np.ndarray:
        return self.t

    def to_csv(self, path: Union[str, Path]) -> Path:
        rows = ({"index": i + 1, "x": self.t[i], "y": self.y[i], "innovation": self.eta[i]} for i in range(self.n))
        return write_csv(path, SAMPLE_COLUMNS, rows)


def simulate_ar(pf: PerturbedFunction, noise: NoiseModel, sd: StationaryDensity, n: int, seed: SeedLike,
                law: str = "f") -> ArTrajectory:
    """
    X_0 ~ sd, X_i = f(X_{i-1}) + eps_i.

    ``sd`` must be the stationary density of the law being simulated (psi_f for
    law='f', psi_f0 for law='f0').
    """
    if n < 0:
        raise InvalidArgumentError(f"n must be nonnegative, got {n}", module="simulate")
    drift_fn = _law(pf, law)
    x0 = float(sd.distribution.sample(substream(seed, "ar_initial"), 1)[0])
    eps = np.asarray(noise.sample(substream(seed, "ar_innovations"), n), dtype=float)
    x = np.empty(n + 1)
    drift = np.empty(n)
    x[0] = x0
    for i in range(n):
        drift[i] = drift_fn.evaluate(x[i])
        x[i + 1] = drift[i] + eps[i]
    return ArTrajectory(x=x, eps=eps, drift=drift, f_used=pf, law=law, seed=seed)


def simulate_random_design(pf: PerturbedFunction, noise_q: NoiseModel, sd0: StationaryDensity, n: int,
                           seed: SeedLike, law: str = "f") -> RandomDesignSample:
    """Y_i = f(xi_i) + eta_i with xi_i i.i.d. from the center's stationary density."""
    if n < 0:
        raise InvalidArgumentError(f"n must be nonnegative, got {n}", module="simulate")
    fn = _law(pf, law)
    xi = sd0.distribution.sample(substream(seed, "design"), n)
    eta = np.asarray(noise_q.sample(substream(seed, "regression_noise"), n), dtype=float)
    signal = np.asarray(fn.evaluate(xi), dtype=float)
    return RandomDesignSample(xi=xi, y=signal + eta, eta=eta, signal=signal, law=law)


def design_points(sd0: StationaryDensity, n: int) -> np.ndarray:
    """t_{n,i} with CDF(t_{n,i}) = (i - 1/2)/n."""
    if n < 1:
        raise InvalidArgumentError(f"design_points needs n >= 1, got {n}", module="simulate")
    u = (np.arange(1, n + 1) - 0.5) / n
    return np.maximum.accumulate(sd0.quantile(u))


def simulate_fixed_design(pf: PerturbedFunction, noise_q: NoiseModel, t: np.ndarray, seed: SeedLike,
                          law: str = "f") -> FixedDesignSample:
    fn = _law(pf, law)
    t = np.asarray(t, dtype=float)
    eta = np.asarray(noise_q.sample(substream(seed, "regression_noise"), t.size), dtype=float)
    signal = np.asarray(fn.evaluate(t), dtype=float) if t.size else np.empty(0)
    return FixedDesignSample(t=t, y=signal + eta, eta=eta, signal=signal, law=law)
