"""Global numerical tolerances."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    weight_sum: float = 1e-12
    ghs_slack: float = 1e-10
    fixed_point_residual: float = 1e-12
    block_residual: float = 1e-10
    cache_coherence: float = 1e-9
    law_normalization: float = 1e-12
    score_residual_per_site: float = 1e-9
    bisection_width: float = 1e-10
    condition_limit: float = 1e12
    irregular_row_sum_var: float = 1e-3


TOL = Tolerances()
