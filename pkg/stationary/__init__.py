from stationary.transfer import (
    StationaryDensity,
    TransferOperator,
    dobrushin_rho,
    hellinger_sq,
    lemma61_check,
    minorization_check,
    sample_stationary,
    solve_stationary,
    transfer_apply,
)

__all__ = [
    "StationaryDensity",
    "TransferOperator",
    "dobrushin_rho",
    "hellinger_sq",
    "lemma61_check",
    "minorization_check",
    "sample_stationary",
    "solve_stationary",
    "transfer_apply",
]
