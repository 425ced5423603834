"""Exact confidence distributions used as independent oracles.

These constructions bypass the chi-squared approximation entirely: the
exponential-mean distribution inverts the Gamma sampling law of the sample
mean, and the single-proportion curve inverts the binomial CDF (equal-tailed,
as in the classical exact interval). Applying the generic grid machinery to
them validates quantiles, intervals, and densities against closed forms.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaincc
from scipy.stats import binom

from .errors import DomainError
from .pvfn import ConfidenceCurve, ParamGrid, PValueFunction

__all__ = [
    "exponential_cd",
    "binomial_exact_curve",
    "binomial_exact_interval",
]


def exponential_cd(xbar: float, n: int, grid: ParamGrid) -> PValueFunction:
    """Exact confidence distribution for an exponential mean.

    The sample mean of n exponentials with mean theta is Gamma(n, theta/n);
    inverting its CDF gives the upper p-value function
    H(theta) = P(Xbar >= xbar | theta), which increases from 0 to 1 in theta
    and whose density is the Inverse-Gamma(n, n*xbar) curve.
    """
    if not xbar > 0:
        raise DomainError(f"xbar must be positive, got {xbar}")
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise DomainError(f"n must be a positive integer, got {n}")
    if grid.thetas[0] <= 0:
        raise DomainError("grid must lie in theta > 0")
    # P(Xbar >= xbar | theta) = Q(n, n*xbar/theta), the regularized upper
    # incomplete gamma
    values = gammaincc(n, n * xbar / grid.thetas)
    return PValueFunction(grid, values, "upper", f"exponential-exact(xbar={xbar},n={n})")


def _upper_tail(x: int, n: int, theta) -> float:
    """P(sum X >= x | theta) for sum X ~ Bin(n, theta)."""
    return binom.sf(x - 1, n, theta)


def _lower_tail(x: int, n: int, theta) -> float:
    """P(sum X <= x | theta)."""
    return binom.cdf(x, n, theta)


def binomial_exact_curve(x: int, n: int, grid: ParamGrid) -> ConfidenceCurve:
    """Exact confidence curve for a single proportion from n Bernoulli trials.

    The curve is the pointwise smaller of the two one-sided tail
    probabilities; its two branches cross near x/n (the discrete sample space
    leaves the two one-sided values summing to more than 1 there).
    """
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise DomainError(f"n must be a positive integer, got {n}")
    if not 0 <= x <= n:
        raise DomainError(f"x={x} outside [0, {n}]")
    if grid.thetas[0] < 0 or grid.thetas[-1] > 1:
        raise DomainError("grid must lie within [0, 1]")
    upper = _upper_tail(x, n, grid.thetas)  # increasing in theta
    lower = _lower_tail(x, n, grid.thetas)  # decreasing in theta
    values = np.minimum(upper, lower)
    return ConfidenceCurve(grid, values, point_estimate=x / n)


def binomial_exact_interval(x: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Equal-tailed exact interval: each endpoint solves its tail equation.

    The lower endpoint solves P(sum X >= x | theta) = alpha/2 and the upper
    endpoint P(sum X <= x | theta) = alpha/2, by root bracketing on the exact
    binomial tails; x = 0 and x = n pin the respective endpoint to 0 or 1.
    """
    if not 0 < level < 1:
        raise DomainError(f"level must be in (0, 1), got {level}")
    alpha = 1.0 - level
    half = alpha / 2.0
    if x == 0:
        lo = 0.0
    else:
        lo = brentq(lambda t: _upper_tail(x, n, t) - half, 0.0, 1.0, xtol=1e-14)
    if x == n:
        hi = 1.0
    else:
        hi = brentq(lambda t: _lower_tail(x, n, t) - half, 0.0, 1.0, xtol=1e-14)
    return (float(lo), float(hi))
