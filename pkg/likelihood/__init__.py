from likelihood.partition import BlockPartition, block_count, partition
from likelihood.loglr import (
    LogLikelihoodRatio,
    TaylorTerms,
    loglr_ar,
    loglr_regression,
    remainder_bound,
    taylor_terms,
)
from likelihood.events import (
    EventDiagnostics,
    a1_threshold,
    event_diagnostics,
    event_frequencies,
    score_truncation,
    slack_sequence,
    t2_mean_readings,
)
from likelihood.hellinger import (
    HellingerEstimate,
    analytic_gaussian_h2,
    block0_hellinger,
    estimate_from_logs,
    hellinger_mc,
    lemma31_check,
    normalization_check,
    pair_distances,
)

__all__ = [
    "BlockPartition",
    "block_count",
    "partition",
    "LogLikelihoodRatio",
    "TaylorTerms",
    "loglr_ar",
    "loglr_regression",
    "remainder_bound",
    "taylor_terms",
    "EventDiagnostics",
    "a1_threshold",
    "event_diagnostics",
    "event_frequencies",
    "score_truncation",
    "slack_sequence",
    "t2_mean_readings",
    "HellingerEstimate",
    "analytic_gaussian_h2",
    "block0_hellinger",
    "estimate_from_logs",
    "hellinger_mc",
    "lemma31_check",
    "normalization_check",
    "pair_distances",
]
