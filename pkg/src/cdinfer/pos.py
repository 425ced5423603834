"""Probability-of-success estimators.

Probability of success (assurance) averages a design's power curve against
the confidence mass of a p-value function for the effect: a Riemann sum of
power times the lagged increments of the p-value function, normalized by the
total increment so grid truncation does not silently rescale the estimate.
The joint two-phase variant multiplies both phases' power inside the sum, and
the conditional variant re-weights the confidence density by the probability
of passing the earlier phase before averaging (the pre-posterior).
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import DegenerateMassError, TruncationWarning
from .power import PowerCurve
from .pvfn import ConfidenceDensity, PValueFunction, confidence_density

__all__ = ["pos", "joint_pos", "conditional_density", "conditional_pos"]

# Below this spanned mass the grid is truncating real tails; the estimator
# still normalizes per its definition but the caller is warned.
TRUNCATION_MASS = 0.99


def _increments(H: PValueFunction) -> np.ndarray:
    if H.tail != "upper":
        raise ValueError("probability of success integrates an upper p-value function")
    return np.diff(H.values)


def _warn_truncation(total: float, what: str):
    if total < TRUNCATION_MASS:
        warnings.warn(
            f"{what}: grid spans only {total:.4f} of the confidence mass; "
            "result is renormalized over the truncated support",
            TruncationWarning,
            stacklevel=3,
        )


def pos(H_theta: PValueFunction, pc: PowerCurve) -> float:
    """Probability-of-success estimate of power: sum beta * dH / sum dH."""
    H_theta.grid.require_same(pc.grid)
    dH = _increments(H_theta)
    total = float(np.sum(dH))
    if total == 0.0:
        raise DegenerateMassError("p-value function carries no mass on the grid")
    _warn_truncation(total, "pos")
    return float(np.sum(pc.values[1:] * dH) / total)


def joint_pos(H_theta: PValueFunction, pc2: PowerCurve, pc3: PowerCurve) -> float:
    """Probability of succeeding in both phases: sum beta2*beta3*dH / sum dH."""
    H_theta.grid.require_same(pc2.grid)
    H_theta.grid.require_same(pc3.grid)
    dH = _increments(H_theta)
    total = float(np.sum(dH))
    if total == 0.0:
        raise DegenerateMassError("p-value function carries no mass on the grid")
    _warn_truncation(total, "joint_pos")
    return float(np.sum(pc2.values[1:] * pc3.values[1:] * dH) / total)


def conditional_density(
    dist: PValueFunction | ConfidenceDensity, pc2: PowerCurve
) -> ConfidenceDensity:
    """Pre-posterior density: the confidence density re-weighted by the
    probability of passing phase 2, renormalized to unit mass."""
    if isinstance(dist, PValueFunction):
        dens = confidence_density(dist)
    else:
        dens = dist
    dens.grid.require_same(pc2.grid)
    weighted = dens.values * pc2.values
    mass = float(np.sum(weighted) * dens.grid.step)
    if mass <= 0.0:
        raise DegenerateMassError("conditioning left no mass")
    return ConfidenceDensity(dens.grid, weighted / mass)


def conditional_pos(h_cond: ConfidenceDensity, pc3: PowerCurve) -> float:
    """Conditional probability of success: phase-3 power integrated against a
    (typically pre-posterior) confidence density."""
    h_cond.grid.require_same(pc3.grid)
    w = h_cond.values * h_cond.grid.step
    mass = float(np.sum(w))
    if mass <= 0.0:
        raise DegenerateMassError("density carries no mass")
    return float(np.sum(pc3.values * w) / mass)
