from coupling.wiener import EXTERIOR, BrownianPath, PathCursor, WienerFamily, index_of
from coupling.skorokhod import ScoreLaw, StopResult, skorokhod_stop
from coupling.embedding import (
    CouplingLedger,
    HorizonPlan,
    analytic_expectations,
    default_dt,
    embed_ar_side,
    embed_regression_side,
    pilot_expectations,
    set_horizons,
)
from coupling.gaps import (
    GapReport,
    StrongApproxResult,
    calibrate_constant,
    r_n,
    strong_approx_gap,
    z_statistics,
    z_threshold_base,
)
from coupling.berbee import (
    BerbeeResult,
    GeometricFit,
    PhiMixingResult,
    berbee_couple,
    exact_phi,
    geometric_fit,
    phi_mixing_chain,
)
from coupling.replication import (
    CoupledReplication,
    CouplingSetup,
    coupled_block,
    coupled_block_pair,
    coupled_loglr_pair,
    coupled_replication,
)

__all__ = [
    "EXTERIOR",
    "BrownianPath",
    "PathCursor",
    "WienerFamily",
    "index_of",
    "ScoreLaw",
    "StopResult",
    "skorokhod_stop",
    "CouplingLedger",
    "HorizonPlan",
    "analytic_expectations",
    "default_dt",
    "embed_ar_side",
    "embed_regression_side",
    "pilot_expectations",
    "set_horizons",
    "GapReport",
    "StrongApproxResult",
    "calibrate_constant",
    "r_n",
    "strong_approx_gap",
    "z_statistics",
    "z_threshold_base",
    "BerbeeResult",
    "GeometricFit",
    "PhiMixingResult",
    "berbee_couple",
    "exact_phi",
    "geometric_fit",
    "phi_mixing_chain",
    "CoupledReplication",
    "CouplingSetup",
    "coupled_block",
    "coupled_block_pair",
    "coupled_loglr_pair",
    "coupled_replication",
]
