"""P-value functions, confidence curves, and confidence densities on a grid.

An upper p-value function tabulates, over a grid of hypothesized effects, the
one-sided p-value testing H0: theta <= theta0 given fixed observed data. For
the two-arm binomial model it is built by inverting the likelihood ratio test
(referenced against chi-squared(1), halved and folded around the MLE) or a
Wald test. The confidence curve and confidence density are presentations of
the same object; quantiles of the function deliver confidence limits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import chdtr, ndtr

from . import binomial
from .binomial import TwoArmCounts
from .errors import DomainError, OutOfRangeError

__all__ = [
    "ParamGrid",
    "PValueFunction",
    "ConfidenceCurve",
    "ConfidenceDensity",
    "upper_pvfn_lrt",
    "upper_pvfn_wald",
    "lower_pvfn",
    "confidence_curve",
    "confidence_density",
    "quantile",
    "interval",
]

# Default grid from the worked two-arm examples; step resolves p-values to
# about three decimals at those sample sizes.
DEFAULT_GRID_LO = -0.21
DEFAULT_GRID_HI = 0.247
DEFAULT_GRID_STEP = 5e-4

# Monotonicity violations up to this size are treated as floating-point noise
# and repaired by a running extremum; anything larger is a construction error.
MONOTONE_NOISE_TOL = 1e-9


@dataclass(frozen=True)
class ParamGrid:
    """Uniform grid lo, lo+step, ... covering [lo, hi]."""

    lo: float
    hi: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise DomainError(f"grid step must be positive, got {self.step}")
        if not self.lo < self.hi:
            raise DomainError(f"grid needs lo < hi, got [{self.lo}, {self.hi}]")
        if (self.hi - self.lo) / self.step < 10:
            raise DomainError("grid must span at least 10 steps")

    @classmethod
    def default(cls) -> "ParamGrid":
        return cls(DEFAULT_GRID_LO, DEFAULT_GRID_HI, DEFAULT_GRID_STEP)

    @property
    def n_points(self) -> int:
        return int(np.floor((self.hi - self.lo) / self.step + 1e-9)) + 1

    @cached_property
    def thetas(self) -> np.ndarray:
        t = self.lo + self.step * np.arange(self.n_points)
        t.setflags(write=False)
        return t

    def contains(self, theta: float) -> bool:
        return self.thetas[0] <= theta <= self.thetas[-1]

    def require_same(self, other: "ParamGrid"):
        if self != other:
            from .errors import GridMismatchError

            raise GridMismatchError(f"grids differ: {self} vs {other}")


def _repair_monotone(values: np.ndarray, nondecreasing: bool) -> np.ndarray:
    """Running-extremum sweep for violations below the noise tolerance."""
    if nondecreasing:
        viol = np.maximum.accumulate(values) - values
        repaired = np.maximum.accumulate(values)
    else:
        viol = values - np.minimum.accumulate(values)
        repaired = np.minimum.accumulate(values)
    worst = float(np.max(viol)) if viol.size else 0.0
    if worst > MONOTONE_NOISE_TOL:
        direction = "nondecreasing" if nondecreasing else "nonincreasing"
        raise DomainError(
            f"values violate {direction} monotonicity by {worst:.3e} "
            f"(> {MONOTONE_NOISE_TOL:.0e})"
        )
    return repaired


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PValueFunction:
    """Tabulated map theta -> one-sided p-value with tail direction.

    ``tail`` is "upper" (values nondecreasing in theta, testing
    H0: theta <= theta0) or "lower" (nonincreasing, testing H0: theta >=
    theta0). ``source`` records provenance: test family and data summary.
    """

    grid: ParamGrid
    values: np.ndarray
    tail: str
    source: str = ""

    def __post_init__(self):
        if self.tail not in ("upper", "lower"):
            raise DomainError(f"tail must be 'upper' or 'lower', got {self.tail!r}")
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_points,):
            raise DomainError(
                f"values length {vals.shape} does not match grid "
                f"({self.grid.n_points} points)"
            )
        if np.any(vals < 0) or np.any(vals > 1) or not np.all(np.isfinite(vals)):
            raise DomainError("p-values must lie in [0, 1]")
        vals = _repair_monotone(vals, nondecreasing=(self.tail == "upper"))
        object.__setattr__(self, "values", _freeze(vals))

    def value_at(self, theta) -> float | np.ndarray:
        """Piecewise-linear interpolation at theta (must lie on the grid span)."""
        t = np.asarray(theta, dtype=float)
        g = self.grid.thetas
        if np.any(t < g[0]) or np.any(t > g[-1]):
            raise OutOfRangeError(f"theta={theta} outside grid [{g[0]}, {g[-1]}]")
        out = np.interp(t, g, self.values)
        return float(out) if np.ndim(theta) == 0 else out

    def quantile(self, p: float) -> float:
        return quantile(self, p)

    def interval(self, level: float) -> tuple[float, float]:
        return interval(self, level)

    @property
    def median(self) -> float:
        """Theta at which the function crosses 1/2 (the point estimate)."""
        return quantile(self, 0.5)


@dataclass(frozen=True)
class ConfidenceCurve:
    """Min-tail presentation: one-sided significance of each hypothesis.

    Peaks at the point estimate; the height at theta is the significance
    level at which that theta can be rejected.
    """

    grid: ParamGrid
    values: np.ndarray
    point_estimate: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_points,):
            raise DomainError("curve values do not match grid")
        if np.any(vals < 0) or np.any(vals > 1):
            raise DomainError("curve values must lie in [0, 1]")
        object.__setattr__(self, "values", _freeze(vals))

    def value_at(self, theta) -> float | np.ndarray:
        t = np.asarray(theta, dtype=float)
        g = self.grid.thetas
        if np.any(t < g[0]) or np.any(t > g[-1]):
            raise OutOfRangeError(f"theta={theta} outside grid [{g[0]}, {g[-1]}]")
        out = np.interp(t, g, self.values)
        return float(out) if np.ndim(theta) == 0 else out


@dataclass(frozen=True)
class ConfidenceDensity:
    """Lagged-difference derivative of an upper p-value function.

    ``normalization`` is the Riemann mass sum(values) * step, i.e. the total
    H-mass the grid spans; close to 1 when the grid covers the support.
    """

    grid: ParamGrid
    values: np.ndarray
    normalization: float = field(default=0.0)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_points,):
            raise DomainError("density values do not match grid")
        if np.any(vals < 0):
            raise DomainError("density values must be nonnegative")
        object.__setattr__(self, "values", _freeze(vals))
        object.__setattr__(
            self, "normalization", float(np.sum(vals) * self.grid.step)
        )

    @property
    def mass(self) -> float:
        return self.normalization

    def mean(self) -> float:
        w = self.values * self.grid.step
        total = float(np.sum(w))
        if total == 0:
            from .errors import DegenerateMassError

            raise DegenerateMassError("density carries no mass")
        return float(np.sum(self.grid.thetas * w) / total)

    def variance(self) -> float:
        m = self.mean()
        w = self.values * self.grid.step
        return float(np.sum((self.grid.thetas - m) ** 2 * w) / np.sum(w))


def _lrt_upper_values(counts: TwoArmCounts, thetas: np.ndarray) -> np.ndarray:
    stat = binomial.lrt_statistic(counts, thetas)
    F = chdtr(1.0, stat)
    theta_hat = counts.theta_hat
    return np.where(thetas <= theta_hat, (1.0 - F) / 2.0, (1.0 + F) / 2.0)


def upper_pvfn_lrt(counts: TwoArmCounts, grid: ParamGrid) -> PValueFunction:
    """Upper p-value function from inverting the likelihood ratio test.

    At each grid theta0 the statistic is referenced against chi-squared(1),
    halved because the test is one-sided, and folded around the MLE so that
    the value at theta_hat is exactly 1/2.
    """
    counts_mle = binomial.mle(counts)  # raises BoundaryError off the interior
    del counts_mle
    lo_feas, hi_feas = -1.0, 1.0
    if grid.thetas[0] <= lo_feas or grid.thetas[-1] >= hi_feas:
        raise DomainError(
            f"grid [{grid.lo}, {grid.hi}] exceeds the feasible effect range (-1, 1)"
        )
    values = _lrt_upper_values(counts, grid.thetas)
    src = (
        f"lrt(x_ctrl={counts.x_ctrl:g},n_ctrl={counts.n_ctrl:g},"
        f"x_active={counts.x_active:g},n_active={counts.n_active:g})"
    )
    return PValueFunction(grid, values, "upper", src)


def upper_pvfn_wald(
    counts: TwoArmCounts, grid: ParamGrid, link: str = "identity"
) -> PValueFunction:
    """Upper p-value function from inverting a Wald test (identity link)."""
    if link != "identity":
        raise DomainError(f"unsupported link {link!r}; only 'identity' is shipped")
    z = binomial.wald_z(counts, grid.thetas)
    values = 1.0 - ndtr(z)
    src = (
        f"wald(x_ctrl={counts.x_ctrl:g},n_ctrl={counts.n_ctrl:g},"
        f"x_active={counts.x_active:g},n_active={counts.n_active:g})"
    )
    return PValueFunction(grid, values, "upper", src)


def lower_pvfn(H: PValueFunction) -> PValueFunction:
    """Pointwise complement: lower p-value function of an upper one (and back).

    The two-arm model has a continuous sample space, so H- = 1 - H and the
    operation is an involution.
    """
    other = "lower" if H.tail == "upper" else "upper"
    return PValueFunction(H.grid, 1.0 - H.values, other, H.source)


def _as_upper(H: PValueFunction) -> PValueFunction:
    if H.tail != "upper":
        raise DomainError("operation requires an upper p-value function")
    return H


def confidence_curve(H: PValueFunction) -> ConfidenceCurve:
    """Fold an upper p-value function into its confidence curve.

    C(theta) = H below the point estimate and 1 - H above it; the point
    estimate is located at the grid cell where the folded curve peaks.
    """
    _as_upper(H)
    folded = np.minimum(H.values, 1.0 - H.values)
    peak = int(np.argmax(folded))
    # refine: the 0.5 crossing of H, when it exists, is the point estimate
    if H.values[0] <= 0.5 <= H.values[-1]:
        point = quantile(H, 0.5)
    else:
        point = float(H.grid.thetas[peak])
    thetas = H.grid.thetas
    values = np.where(thetas <= point, H.values, 1.0 - H.values)
    return ConfidenceCurve(H.grid, values, point)


def confidence_density(H: PValueFunction) -> ConfidenceDensity:
    """Lagged-difference confidence density h = dH/dtheta.

    The first cell has no lagged difference and is set to 0.
    """
    _as_upper(H)
    d = np.empty_like(H.values)
    d[0] = 0.0
    d[1:] = np.diff(H.values) / H.grid.step
    return ConfidenceDensity(H.grid, d)


def quantile(H: PValueFunction, p: float) -> float:
    """Theta at which the function crosses p, by linear interpolation.

    For an upper p-value function this is the theta whose upper p-value is p;
    the (1-level)/2 and 1-(1-level)/2 quantiles are equal-tailed confidence
    limits.
    """
    vals = H.values
    lo, hi = float(np.min(vals)), float(np.max(vals))
    if not lo <= p <= hi:
        raise OutOfRangeError(
            f"p={p} outside the tabulated p-value range [{lo:.3g}, {hi:.3g}]"
        )
    if H.tail == "upper":
        return float(np.interp(p, vals, H.grid.thetas))
    rev = vals[::-1]
    return float(np.interp(p, rev, H.grid.thetas[::-1]))


def interval(H: PValueFunction, level: float) -> tuple[float, float]:
    """Equal-tailed confidence interval at the given level."""
    if not 0 < level < 1:
        raise DomainError(f"level must be in (0, 1), got {level}")
    alpha = 1.0 - level
    lo = quantile(H, alpha / 2.0)
    hi = quantile(H, 1.0 - alpha / 2.0)
    return (min(lo, hi), max(lo, hi))
