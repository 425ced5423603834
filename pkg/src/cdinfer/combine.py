"""Meta-analytic combination of p-value functions.

Convolution pools two sources into one as if they were a single larger study:
each value is sent to a z-score, the z-scores are inversely weighted by their
standard errors, and the weighted sum is mapped back. Multiplication instead
treats the sources as separate observations of an "and" event, and the "or"
combination is its lower-tail dual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .binomial import TwoArmCounts, wald_se
from .errors import BoundaryError, DomainError
from .pvfn import PValueFunction

__all__ = ["WeightedPvfn", "convolve", "multiply", "or_combine"]

# Values are clamped into this open interval before the normal quantile;
# grid tails saturate long before the clamp distorts anything visible.
PROBIT_CLAMP = 1e-12


@dataclass(frozen=True)
class WeightedPvfn:
    """A p-value function paired with the standard error that weights it.

    For sources that did not arise from a Wald test, the conventional choice
    is the binomial-variance standard error at the source's own rates and
    sample sizes (see ``se_from_counts``).
    """

    H: PValueFunction
    se: float

    def __post_init__(self):
        if not (np.isfinite(self.se) and self.se > 0):
            raise DomainError(f"standard error must be finite and positive, got {self.se}")

    @classmethod
    def from_counts(cls, H: PValueFunction, counts: TwoArmCounts) -> "WeightedPvfn":
        return cls(H, wald_se(counts))


def _probit(H: PValueFunction) -> np.ndarray:
    """Normal quantile of the values, clamping the saturated grid tails.

    For a monotone function, values of exactly 0 or 1 can only occur in runs
    touching the grid edges (tail saturation in double precision); those are
    clamped. An exact 0 or 1 strictly inside the grid breaks the interior
    precondition and raises instead.
    """
    vals = H.values
    interior_exact = ((vals == 0.0) | (vals == 1.0)) & ~_edge_runs(vals)
    if np.any(interior_exact):
        i = int(np.argmax(interior_exact))
        raise BoundaryError(
            f"p-value exactly {vals[i]:g} at interior theta={H.grid.thetas[i]}: "
            "the normal quantile is undefined"
        )
    return ndtri(np.clip(vals, PROBIT_CLAMP, 1 - PROBIT_CLAMP))


def _edge_runs(vals: np.ndarray) -> np.ndarray:
    """Mask of entries in the saturated runs touching either grid edge."""
    mask = np.zeros(vals.size, dtype=bool)
    i = 0
    while i < vals.size and vals[i] in (0.0, 1.0):
        mask[i] = True
        i += 1
    j = vals.size - 1
    while j >= 0 and vals[j] in (0.0, 1.0):
        mask[j] = True
        j -= 1
    return mask


def convolve(a: WeightedPvfn, b: WeightedPvfn) -> PValueFunction:
    """Fixed-effect convolution of two upper p-value functions.

    Pointwise: Phi( [Phi^-1(H1)/se1 + Phi^-1(H2)/se2] / sqrt(1/se1^2+1/se2^2) ).
    """
    a.H.grid.require_same(b.H.grid)
    if a.H.tail != "upper" or b.H.tail != "upper":
        raise DomainError("convolution is defined for upper p-value functions")
    za = _probit(a.H) / a.se
    zb = _probit(b.H) / b.se
    denom = np.sqrt(1.0 / a.se**2 + 1.0 / b.se**2)
    values = ndtr((za + zb) / denom)
    return PValueFunction(
        a.H.grid, values, "upper",
        f"convolve[{a.H.source}; {b.H.source}]",
    )


def multiply(a: PValueFunction, b: PValueFunction) -> PValueFunction:
    """Upper-tailed "and" combination: pointwise product of the functions."""
    a.grid.require_same(b.grid)
    if a.tail != "upper" or b.tail != "upper":
        raise DomainError("multiplication combines upper p-value functions")
    return PValueFunction(
        a.grid, a.values * b.values, "upper", f"multiply[{a.source}; {b.source}]"
    )


def or_combine(a: PValueFunction, b: PValueFunction) -> PValueFunction:
    """Lower-tailed "or" combination: a + b - a*b pointwise."""
    a.grid.require_same(b.grid)
    if a.tail != "lower" or b.tail != "lower":
        raise DomainError("the or-combination takes lower p-value functions")
    values = a.values + b.values - a.values * b.values
    return PValueFunction(
        a.grid, values, "lower", f"or[{a.source}; {b.source}]"
    )
