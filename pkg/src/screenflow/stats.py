"""Output analysis for replication samples."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .errors import CIUndefinedError, EmptySampleError, PZeroError

CONSISTENT = "CONSISTENT"
INCONSISTENT = "INCONSISTENT"


@dataclass(frozen=True)
class SummaryStats:
    n: int
    mean: float
    confidence: float
    _variance: float | None
    _half_width: float | None

    @property
    def sample_variance(self) -> float:
        if self._variance is None:
            raise CIUndefinedError("variance needs at least two samples")
        return self._variance

    @property
    def ci_half_width(self) -> float:
        if self._half_width is None:
            raise CIUndefinedError("confidence interval needs at least two samples")
        return self._half_width

    @property
    def stdev(self) -> float:
        return math.sqrt(self.sample_variance)

    @property
    def cv(self) -> float | None:
        """Coefficient of variation; None if the mean is zero or n < 2."""
        if self.mean == 0 or self._variance is None:
            return None
        return self.stdev / abs(self.mean)


def summarize(samples: Sequence[float], confidence: float = 0.95) -> SummaryStats:
    """Unbiased mean/variance and a Student-t confidence half-width.

    The sample is sorted before summing so the result does not depend on
    sample order.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n == 0:
        raise EmptySampleError("cannot summarize an empty sample")
    mean = math.fsum(x) / n
    if n < 2:
        return SummaryStats(n, mean, confidence, None, None)
    var = math.fsum((x - mean) ** 2) / (n - 1)
    t = sps.t.ppf(1 - (1 - confidence) / 2, n - 1)
    return SummaryStats(n, mean, confidence, var, float(t * math.sqrt(var / n)))


def normal_quantile(confidence: float) -> float:
    return float(sps.norm.ppf(1 - (1 - confidence) / 2))


def required_replications(p: float, rel_halfwidth: float, confidence: float = 0.95) -> int:
    """Bernoulli trials needed so the normal-approximation CI half-width is at most ``rel_halfwidth * p``."""
    if p == 0:
        raise PZeroError("event probability is zero; no finite budget suffices")
    if not 0 < p <= 1:
        raise ValueError(f"p={p!r} must be in (0, 1]")
    if not rel_halfwidth > 0:
        raise ValueError("rel_halfwidth must be > 0")
    z = normal_quantile(confidence)
    return math.ceil(z * z * (1 - p) / (rel_halfwidth**2 * p))


@dataclass(frozen=True)
class AgreementResult:
    verdict: str
    t_statistic: float
    df: int
    p_value: float
    mean: float
    analytic_value: float


def agreement_test(samples: Sequence[float], analytic_value: float, alpha: float = 0.01) -> AgreementResult:
    """Two-sided one-sample t-test of ``mean == analytic_value``."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n == 0:
        raise EmptySampleError("agreement test needs samples")
    if n < 2:
        raise CIUndefinedError("agreement test needs at least two samples")
    s = summarize(x)
    if s.sample_variance == 0:
        if s.mean == analytic_value:
            return AgreementResult(CONSISTENT, 0.0, n - 1, 1.0, s.mean, analytic_value)
        t = math.copysign(math.inf, s.mean - analytic_value)
        return AgreementResult(INCONSISTENT, t, n - 1, 0.0, s.mean, analytic_value)
    t = (s.mean - analytic_value) / math.sqrt(s.sample_variance / n)
    p_value = float(2 * sps.t.sf(abs(t), n - 1))
    verdict = CONSISTENT if p_value >= alpha else INCONSISTENT
    return AgreementResult(verdict, t, n - 1, p_value, s.mean, analytic_value)
