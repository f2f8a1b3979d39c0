"""Branching Brownian motion simulation and analysis toolkit."""

from ._bbmlab import (
    PopulationSnapshot,
    RunResult,
    RunStats,
    __version__,
    bridge_nonneg_prob,
    bridge_subinterval_nonneg_prob,
    bridge_two_point_line_bound,
    centering,
    derivative_martingale,
    envelope,
    many_to_one_check,
    max_offset,
    normal_cdf,
    normal_icdf,
    run,
    subsequence_average_check,
)

__all__ = [
    "PopulationSnapshot",
    "RunResult",
    "RunStats",
    "__version__",
    "bridge_nonneg_prob",
    "bridge_subinterval_nonneg_prob",
    "bridge_two_point_line_bound",
    "centering",
    "derivative_martingale",
    "envelope",
    "many_to_one_check",
    "max_offset",
    "normal_cdf",
    "normal_icdf",
    "run",
    "subsequence_average_check",
]
