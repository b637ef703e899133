from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from config.settings import COUPLING_CONFIG, GRID_CONFIG, MC_CONFIG, OUTPUT_CONFIG
from models.function_class import (
    FunctionClassSpec,
    PerturbedFunction,
    RateConstants,
    center_from_descriptor,
    check_membership,
    check_neighborhood,
    perturbation_from_descriptor,
    rates,
)
from models.grid import Grid, GridFunction
from models.noise import NoiseModel, match_fisher, noise_from_descriptor
from stationary.transfer import StationaryDensity, solve_stationary
from utils.errors import ConfigurationError, LabError
from utils.logger import get_logger

logger = get_logger(__name__)

V_N_RULES = ("inverse_sqrt_log", "one")
DESIGNS = ("random", "fixed")
CONSTRUCTIONS = ("coupled", "independent")
PILOT_MODES = ("simulate", "analytic")


class ExperimentConfig(BaseModel):
    """One experiment run: model, constants, Monte Carlo sizes and output location."""

    experiment: str
    n: int = 1024
    sweep: List[int] = Field(default_factory=list)
    f0: Dict[str, Any] = Field(default_factory=lambda: {"family": "sine", "amplitude": 0.4})
    g: Dict[str, Any] = Field(default_factory=lambda: {"family": "bump", "fraction": 1.0})
    noise_p: Dict[str, Any] = Field(default_factory=lambda: {"family": "gaussian", "sigma": 1.0})
    noise_q: Optional[Dict[str, Any]] = None

    beta: float = 3.0
    L: float = 1.0
    M: float = 0.5
    A: float = -1.0
    B: float = 1.0
    c: float = 1.0
    c_prime: float = 1.0
    lam: float = 2.0
    c_lambda: float = 1.0
    c_block: float = 1.0
    v_n_rule: str = "inverse_sqrt_log"

    grid_step: float = GRID_CONFIG["step"]
    dt: Optional[float] = None
    j_star: Optional[int] = None
    design: str = "random"
    construction: str = "coupled"
    pilot_mode: str = COUPLING_CONFIG["pilot_mode"]

    reps: int = 200
    pilot_reps: int = COUPLING_CONFIG["pilot_reps"]
    conditioning_draws: int = MC_CONFIG["conditioning_draws"]
    seed: int = MC_CONFIG["master_seed"]
    workers: int = MC_CONFIG["workers"]
    out_dir: str = OUTPUT_CONFIG["out_dir"]
    params: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("experiment")
    @classmethod
    def _name_present(cls, value: str) -> str:
        if not value or not value.strip():
            raise ValueError("experiment name cannot be empty")
        return value.strip()

    @field_validator("n")
    @classmethod
    def _n_large_enough(cls, value: int) -> int:
        if value < 2:
            raise ValueError(f"n must be >= 2, got {value}")
        return value

    @field_validator("sweep")
    @classmethod
    def _sweep_sizes(cls, value: List[int]) -> List[int]:
        if any(v < 2 for v in value):
            raise ValueError("every sweep size must be >= 2")
        return value

    @field_validator("reps", "pilot_reps", "conditioning_draws", "workers")
    @classmethod
    def _positive_count(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"counts must be >= 1, got {value}")
        return value

    @field_validator("beta", "L", "M", "lam", "c_lambda", "c_block", "grid_step")
    @classmethod
    def _positive_constant(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f"constant must be positive, got {value}")
        return value

    @field_validator("v_n_rule")
    @classmethod
    def _known_v_n_rule(cls, value: str) -> str:
        if value not in V_N_RULES:
            raise ValueError(f"v_n_rule must be one of {V_N_RULES}")
        return value

    @field_validator("design")
    @classmethod
    def _known_design(cls, value: str) -> str:
        if value not in DESIGNS:
            raise ValueError(f"design must be one of {DESIGNS}")
        return value

    @field_validator("construction")
    @classmethod
    def _known_construction(cls, value: str) -> str:
        if value not in CONSTRUCTIONS:
            raise ValueError(f"construction must be one of {CONSTRUCTIONS}")
        return value

    @field_validator("pilot_mode")
    @classmethod
    def _known_pilot_mode(cls, value: str) -> str:
        if value not in PILOT_MODES:
            raise ValueError(f"pilot_mode must be one of {PILOT_MODES}")
        return value

    @model_validator(mode="after")
    def _interval_and_depth(self) -> "ExperimentConfig":
        if not self.A < self.B:
            raise ValueError(f"need A < B, got A={self.A}, B={self.B}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.j_star is not None and self.j_star < 0:
            raise ValueError(f"j_star must be >= 0, got {self.j_star}")
        return self

    @property
    def sizes(self) -> List[int]:
        return list(self.sweep) if self.sweep else [self.n]

    def param(self, key: str, default: Any = None) -> Any:
        return self.params.get(key, default)

    def validate_experiment(self) -> "ExperimentConfig":
        logger.info(f"Validating experiment: {self.experiment}")
        self.build_context()
        return self

    def build_context(self, n: Optional[int] = None) -> "ExperimentContext":
        """
        Construct and check the grid, class, noise models, f0 and g at sample size n.

        Raises:
            ConfigurationError: any module rejects its part of the config.
        """
        n = n or self.n
        try:
            grid = Grid(GRID_CONFIG["x_min"], GRID_CONFIG["x_max"], self.grid_step)
            spec = FunctionClassSpec(M=self.M, beta=self.beta, L=self.L, A=self.A, B=self.B)
            rc = RateConstants(n=n, c=self.c, c_prime=self.c_prime)
            gamma_n, gamma_prime_n = rates(rc, spec)
            noise_p = noise_from_descriptor(self.noise_p, grid)
            if self.noise_q is None:
                noise_q = noise_p
            else:
                noise_q = match_fisher(noise_from_descriptor(self.noise_q, grid), noise_p.fisher_info)
            f0 = center_from_descriptor(self.f0, grid)
            g = perturbation_from_descriptor(self.g, grid, spec, gamma_n, gamma_prime_n)
        except LabError as e:
            logger.error(f"Configuration rejected: {e}")
            raise ConfigurationError(str(e), module=e.module or "schemas") from e

        membership = check_membership(f0, spec, grid)
        if not membership.ok:
            logger.error(f"Center is outside the function class: {membership.violations}")
            raise ConfigurationError(f"f0 is not in the class: {'; '.join(membership.violations)}",
                                     module="models")
        pf = PerturbedFunction(f0=f0, g=g, gamma_n=gamma_n, gamma_prime_n=gamma_prime_n)
        neighborhood = check_neighborhood(pf, rc, spec)
        if not neighborhood.ok:
            logger.warning(f"Perturbation at n = {n} leaves the neighborhood: {neighborhood.violations}")
        return ExperimentContext(config=self, n=n, grid=grid, spec=spec, rc=rc, noise_p=noise_p, noise_q=noise_q,
                                 pf=pf, neighborhood_ok=neighborhood.ok)


@dataclass(eq=False)
class ExperimentContext:
    """Validated module objects of one config at one sample size."""

    config: ExperimentConfig
    n: int
    grid: Grid
    spec: FunctionClassSpec
    rc: RateConstants
    noise_p: NoiseModel
    noise_q: NoiseModel
    pf: PerturbedFunction
    neighborhood_ok: bool = True
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def f0(self) -> GridFunction:
        return self.pf.f0

    @property
    def g(self) -> GridFunction:
        return self.pf.g

    @cached_property
    def psi_f0(self) -> StationaryDensity:
        return solve_stationary(self.pf.f0, self.noise_p)

    @cached_property
    def psi_f(self) -> StationaryDensity:
        if self.pf.is_null:
            return self.psi_f0
        return solve_stationary(self.pf.f, self.noise_p)

    @property
    def v_n(self) -> float:
        if self.config.v_n_rule == "one" or self.n < 3:
            return 1.0
        return 1.0 / math.sqrt(math.log(self.n))
