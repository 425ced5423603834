"""Design-stage support: elicitation effective sample size and cross-phase
power-curve extrapolation with confidence bands.

An elicited distribution for the treatment effect implies a virtual active-arm
sample size once the control-arm information from the literature is subtracted
from its variance. When the later phase uses a different control group, the
difference between control rates shifts the power curve along the effect axis;
a point estimate and confidence limits for the shift give a banded curve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .power import PowerCurve, PowerPValueFunction, power_pvfn
from .pvfn import PValueFunction

__all__ = [
    "ElicitationSummary",
    "ShiftEstimate",
    "BandedPowerCurve",
    "BandedPowerPvfn",
    "effective_n_active",
    "extrapolated_power_curve",
    "extrapolated_power_pvfn",
]


@dataclass(frozen=True)
class ElicitationSummary:
    """First two moments of an elicited effect distribution plus the
    literature-review control rate and its sample size."""

    mean_diff: float
    var_diff: float
    ctrl_rate: float
    n_ctrl: float

    def __post_init__(self):
        if not self.var_diff > 0:
            raise DomainError("elicited variance must be positive")
        if not 0 < self.ctrl_rate < 1:
            raise DomainError("control rate must lie in (0, 1)")
        if not self.n_ctrl > 0:
            raise DomainError("control sample size must be positive")
        pa = self.ctrl_rate + self.mean_diff
        if not 0 < pa < 1:
            raise DomainError(f"implied active rate {pa} outside (0, 1)")


@dataclass(frozen=True)
class ShiftEstimate:
    """Control-group shift: point estimate with lower and upper limits."""

    delta_hat: float
    delta_lo: float
    delta_hi: float

    def __post_init__(self):
        if not self.delta_lo <= self.delta_hat <= self.delta_hi:
            raise DomainError(
                "shift limits must bracket the point estimate: "
                f"{self.delta_lo} <= {self.delta_hat} <= {self.delta_hi} fails"
            )


def effective_n_active(e: ElicitationSummary) -> float:
    """Virtual active-arm sample size implied by an elicited variance.

    Subtracts the control-arm binomial variance share and inverts the
    remaining active-arm share. Raises when the elicitation claims more
    precision than the control information alone allows.
    """
    pa = e.ctrl_rate + e.mean_diff
    ctrl_term = e.ctrl_rate * (1 - e.ctrl_rate) / e.n_ctrl
    denom = e.var_diff - ctrl_term
    if denom <= 0:
        raise DomainError(
            f"elicited variance {e.var_diff:.3g} does not exceed the control "
            f"variance share {ctrl_term:.3g}; no active-arm information"
        )
    return pa * (1 - pa) / denom


@dataclass(frozen=True)
class BandedPowerCurve:
    """Power curves evaluated at the shift's point estimate and its limits.

    ``lower``/``upper`` are labeled by the shift inputs (delta_lo, delta_hi),
    not re-sorted by output magnitude: for an increasing curve, a larger
    shift moves power down, so the value ordering flips with the band's
    sign convention.
    """

    center: PowerCurve
    lower: PowerCurve
    upper: PowerCurve
    clipped_fraction: float


def _shift_curve(pc: PowerCurve, delta: float) -> tuple[PowerCurve, float]:
    thetas = pc.grid.thetas
    span_lo, span_hi = thetas[0], thetas[-1]
    eval_at = thetas - delta
    clipped = (eval_at < span_lo) | (eval_at > span_hi)
    frac = float(np.mean(clipped))
    if frac >= 1.0:
        raise DomainError(
            f"shift {delta} moves the curve entirely off its grid"
        )
    values = np.interp(eval_at, thetas, pc.values)
    shifted = PowerCurve(pc.grid, values, pc.design, pc.ctrl_rate, pc.mde + delta)
    return shifted, frac


def extrapolated_power_curve(pc3: PowerCurve, shift: ShiftEstimate) -> BandedPowerCurve:
    """Re-index a later-phase power curve onto the earlier phase's effect axis.

    Each band member evaluates the curve at theta - delta for delta at the
    shift's point estimate and limits; evaluations falling off the grid are
    clipped to the end values and counted in ``clipped_fraction``.
    """
    center, f0 = _shift_curve(pc3, shift.delta_hat)
    lower, f1 = _shift_curve(pc3, shift.delta_lo)
    upper, f2 = _shift_curve(pc3, shift.delta_hi)
    return BandedPowerCurve(center, lower, upper, max(f0, f1, f2))


@dataclass(frozen=True)
class BandedPowerPvfn:
    """Power-axis p-value functions for the three band members."""

    center: PowerPValueFunction
    lower: PowerPValueFunction
    upper: PowerPValueFunction


def extrapolated_power_pvfn(
    H2: PValueFunction, pc3: PowerCurve, shift: ShiftEstimate
) -> BandedPowerPvfn:
    """Pushforward of earlier-phase inference through each band member.

    For every grid theta the value H2(theta) is assigned to the shifted
    curve's power at theta, giving one power-axis p-value function per
    band member.
    """
    banded = extrapolated_power_curve(pc3, shift)
    return BandedPowerPvfn(
        center=power_pvfn(H2, banded.center),
        lower=power_pvfn(H2, banded.lower),
        upper=power_pvfn(H2, banded.upper),
    )
