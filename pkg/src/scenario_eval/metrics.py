"""Error decomposition and accuracy metrics.

The deviation between a projection and the realized observation splits into
two signed components along the counterfactual observation:

    observed deviation  = projected - realized_obs
    calibration error   = projected - counterfactual_obs
    scenario spec error = counterfactual_obs - realized_obs

so observed = calibration + scenario_spec identically, while the two
components can cancel. The total error |calibration| + |scenario_spec|
therefore summarizes cases where a projection "gets the right answer for
the wrong reason".

Estimated error distributions are scored against true errors by the absolute
difference of means and by a two-sample Kolmogorov-Smirnov test at the
asymptotic critical value D* = c(alpha) * sqrt((n + m) / (n * m)) with
c(alpha) = sqrt(-ln(alpha / 2) / 2) (c(0.05) = 1.358).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterDomainError


@dataclass(frozen=True)
class Decomposition:
    projected: float
    counterfactual_obs: float
    realized_obs: float
    observed_deviation: float
    calibration_error: float
    scenario_spec_error: float
    total_error: float


def decompose(projected: float, counterfactual_obs: float,
              realized_obs: float) -> Decomposition:
    """Split one observed deviation into its calibration and scenario parts."""
    values = (projected, counterfactual_obs, realized_obs)
    if not all(math.isfinite(v) for v in values):
        raise ParameterDomainError(f"decompose requires finite inputs, got {values}")
    calibration = projected - counterfactual_obs
    scenario_spec = counterfactual_obs - realized_obs
    return Decomposition(
        projected=projected,
        counterfactual_obs=counterfactual_obs,
        realized_obs=realized_obs,
        observed_deviation=projected - realized_obs,
        calibration_error=calibration,
        scenario_spec_error=scenario_spec,
        total_error=abs(calibration) + abs(scenario_spec),
    )


def mae_of_means(estimated_samples, true_errors) -> float:
    """|mean(estimated samples) - mean(true errors)|.

    ``true_errors`` may be a vector (distribution comparison) or a scalar
    (a single location's true error).
    """
    est = np.asarray(getattr(estimated_samples, "samples", estimated_samples),
                     dtype=np.float64)
    true = np.atleast_1d(np.asarray(true_errors, dtype=np.float64))
    if est.size == 0 or true.size == 0:
        raise ParameterDomainError("mae_of_means requires non-empty inputs")
    return float(abs(est.mean() - true.mean()))


@dataclass(frozen=True)
class KsResult:
    statistic: float
    n: int
    m: int
    alpha: float
    critical_value: float
    significant: bool


def ks_critical_value(n: int, m: int, alpha: float = 0.05) -> float:
    c = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    return c * math.sqrt((n + m) / (n * m))


def ks_two_sample(a, b, alpha: float = 0.05) -> KsResult:
    """Two-sample KS test: D evaluated at every pooled jump point.

    Both inputs are treated as empirical samples; requires at least 5 points
    each. ``significant`` is True when D exceeds the asymptotic critical
    value at ``alpha``.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size < 5 or b.size < 5:
        raise ParameterDomainError(
            f"ks_two_sample requires n, m >= 5, got {a.size}, {b.size}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ParameterDomainError("ks_two_sample requires finite samples")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / a.size
    cdf_b = np.searchsorted(b, pooled, side="right") / b.size
    statistic = float(np.max(np.abs(cdf_a - cdf_b)))
    critical = ks_critical_value(a.size, b.size, alpha)
    return KsResult(statistic=statistic, n=int(a.size), m=int(b.size),
                    alpha=alpha, critical_value=critical,
                    significant=statistic > critical)
