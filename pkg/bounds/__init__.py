from bounds.exponential import (
    BoundedVariableSpec,
    ExpInequalityReport,
    bounded_laws,
    exp_inequality_check,
    truncated_gaussian,
    two_point,
    uniform_variable,
    zero_variable,
)
from bounds.tails import TailReport, exceedance_curve, mixing_tail_check, stopping_time_sums, wilson_interval

__all__ = [
    "BoundedVariableSpec",
    "ExpInequalityReport",
    "bounded_laws",
    "exp_inequality_check",
    "truncated_gaussian",
    "two_point",
    "uniform_variable",
    "zero_variable",
    "TailReport",
    "exceedance_curve",
    "mixing_tail_check",
    "stopping_time_sums",
    "wilson_interval",
]
