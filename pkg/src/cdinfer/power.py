"""Estimated power curves and inference on power.

A design's power curve is approximated by the upper p-value function of an
ex-ante dataset whose observed effect equals the design's minimum detectable
effect and whose nuisance rate equals a plugged-in control-rate estimate: the
curve then passes through alpha at the null margin and rises with the true
effect. Inference about the true effect transfers to inference about power by
a change of variables (the power curve is monotone), and a probit-scale Wald
construction with delta-method standard errors provides an independent route.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

from . import binomial, pvfn
from .binomial import TwoArmCounts
from .errors import BoundaryError, DomainError, OutOfRangeError
from .pvfn import ParamGrid, PValueFunction

__all__ = [
    "TrialDesign",
    "PowerCurve",
    "PowerPValueFunction",
    "mde",
    "power_at",
    "power_curve",
    "power_pvfn",
    "power_point_estimate",
    "probit_gradients",
    "delta_wald_power_pvfn",
]

MDE_PVALUE_TOL = 1e-6
# bisect essentially to float resolution: downstream finite differences in
# the control rate re-solve the minimum detectable effect, and any residual
# width would leak quantization noise into the gradients
MDE_THETA_TOL = 1e-15
BETA_CLAMP = 1e-6


@dataclass(frozen=True)
class TrialDesign:
    """Per-arm sample sizes, null margin, and one-sided significance level."""

    n_ctrl: float
    n_active: float
    theta0: float
    alpha: float
    tail: str = "upper"

    def __post_init__(self):
        if not (self.n_ctrl > 0 and self.n_active > 0):
            raise DomainError("per-arm sample sizes must be positive")
        if not 0 < self.alpha <= 0.5:
            raise DomainError(f"alpha={self.alpha} outside (0, 0.5]")
        if not -1 < self.theta0 < 1:
            raise DomainError(f"theta0={self.theta0} outside the feasible range")
        if self.tail != "upper":
            raise DomainError("only upper-tailed designs are supported")


@dataclass(frozen=True)
class PowerCurve:
    """Tabulated map theta -> power for a design and plugged-in control rate."""

    grid: ParamGrid
    values: np.ndarray
    design: TrialDesign
    ctrl_rate: float
    mde: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_points,):
            raise DomainError("power values do not match grid")
        if np.any(vals < 0) or np.any(vals > 1):
            raise DomainError("power values must lie in [0, 1]")
        if np.any(np.diff(vals) < -pvfn.MONOTONE_NOISE_TOL):
            raise DomainError("power curve must be nondecreasing")
        vals = np.maximum.accumulate(vals)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def value_at(self, theta) -> float | np.ndarray:
        return power_point_estimate(self, theta)

    def theta_at(self, beta: float) -> float:
        """Inverse lookup: theta at which the curve reaches the given power."""
        vals = self.values
        if not vals[0] <= beta <= vals[-1]:
            raise OutOfRangeError(
                f"power {beta} outside the curve range [{vals[0]:.3g}, {vals[-1]:.3g}]"
            )
        return float(np.interp(beta, vals, self.grid.thetas))


def _expected_counts(design: TrialDesign, ctrl_rate: float, effect: float) -> TwoArmCounts:
    return TwoArmCounts(
        ctrl_rate * design.n_ctrl,
        design.n_ctrl,
        (ctrl_rate + effect) * design.n_active,
        design.n_active,
    )


def _pvalue_at_null(design: TrialDesign, ctrl_rate: float, effect: float) -> float:
    """Upper p-value at the null margin for the ex-ante dataset with the
    given observed effect."""
    counts = _expected_counts(design, ctrl_rate, effect)
    stat = binomial.lrt_statistic(counts, design.theta0)
    from scipy.special import chdtr

    F = chdtr(1.0, stat)
    if design.theta0 <= effect:
        return float((1.0 - F) / 2.0)
    return float((1.0 + F) / 2.0)


@lru_cache(maxsize=8192)
def mde(design: TrialDesign, ctrl_rate: float) -> float:
    """Minimum detectable effect: the observed effect whose test against the
    null margin lands exactly at the design's significance level.

    Solved by bisection on the observed effect; the p-value at the null is
    matched to alpha within 1e-6.
    """
    if not 0 < ctrl_rate < 1:
        raise DomainError(f"ctrl_rate={ctrl_rate} outside (0, 1)")
    lo = design.theta0
    hi = 1.0 - ctrl_rate - 1e-9
    if lo >= hi:
        raise DomainError(
            f"null margin {design.theta0} leaves no feasible effect above it "
            f"at ctrl_rate={ctrl_rate}"
        )
    # p-value at the null decreases from 0.5 (effect = theta0) toward 0
    if design.alpha == 0.5:
        return design.theta0
    p_hi = _pvalue_at_null(design, ctrl_rate, hi)
    if p_hi > design.alpha:
        raise DomainError(
            f"cannot bracket the minimum detectable effect: p-value at the "
            f"feasibility edge is {p_hi:.3g} > alpha={design.alpha}"
        )
    a, b = lo, hi
    for _ in range(200):
        m = 0.5 * (a + b)
        p = _pvalue_at_null(design, ctrl_rate, m)
        if p > design.alpha:
            a = m
        else:
            b = m
        if b - a < MDE_THETA_TOL and abs(p - design.alpha) < MDE_PVALUE_TOL:
            return m
    return 0.5 * (a + b)


def power_at(design: TrialDesign, ctrl_rate: float, theta) -> float | np.ndarray:
    """Approximate power at true effect theta, exactly (no grid).

    Evaluates the upper p-value function of the minimum-detectable-effect
    dataset at theta; equals alpha at the design's null margin.
    """
    effect = mde(design, ctrl_rate)
    counts = _expected_counts(design, ctrl_rate, effect)
    return pvfn._lrt_upper_values(counts, np.asarray(theta, dtype=float)) \
        if np.ndim(theta) else float(
            pvfn._lrt_upper_values(counts, np.asarray([theta], dtype=float))[0]
        )


def power_curve(design: TrialDesign, ctrl_rate: float, grid: ParamGrid) -> PowerCurve:
    """Tabulate the estimated power curve of a design over a grid."""
    effect = mde(design, ctrl_rate)
    counts = _expected_counts(design, ctrl_rate, effect)
    H = pvfn.upper_pvfn_lrt(counts, grid)
    pc = PowerCurve(grid, H.values, design, ctrl_rate, effect)
    if grid.contains(design.theta0):
        anchor = power_point_estimate(pc, design.theta0)
        slope = _local_slope(pc, design.theta0)
        if abs(anchor - design.alpha) > max(slope * 2.0 * grid.step, 1e-6):
            raise DomainError(
                f"power curve fails its anchor: beta(theta0)={anchor:.6f} "
                f"vs alpha={design.alpha}"
            )
    return pc


def _local_slope(pc: PowerCurve, theta: float) -> float:
    g = pc.grid.thetas
    i = int(np.clip(np.searchsorted(g, theta), 1, g.size - 1))
    return float((pc.values[i] - pc.values[i - 1]) / pc.grid.step)


def power_point_estimate(pc: PowerCurve, theta_hat) -> float | np.ndarray:
    """Power at an estimated effect, by linear interpolation on the curve.

    The transformation invariance of the MLE makes this the maximum
    likelihood estimate of power when theta_hat is the effect MLE.
    """
    t = np.asarray(theta_hat, dtype=float)
    g = pc.grid.thetas
    if np.any(t < g[0]) or np.any(t > g[-1]):
        raise OutOfRangeError(
            f"theta_hat={theta_hat} outside the curve grid [{g[0]}, {g[-1]}]"
        )
    out = np.interp(t, g, pc.values)
    return float(out) if np.ndim(theta_hat) == 0 else out


class PowerPValueFunction:
    """P-value function on the power axis: tabulated pairs (power, value).

    Built either by pushing a p-value function for the effect through a
    monotone power curve (pairing beta(theta_i) with H(theta_i)) or from a
    probit-scale Wald test. The support is the power values themselves, so
    no information is lost to re-gridding; queries interpolate linearly and
    saturate at the tabulated ends.
    """

    def __init__(self, powers, values, source: str = ""):
        powers = np.asarray(powers, dtype=float)
        values = np.asarray(values, dtype=float)
        if powers.shape != values.shape or powers.ndim != 1:
            raise DomainError("powers and values must be 1-d and aligned")
        if np.any(values < 0) or np.any(values > 1):
            raise DomainError("p-values must lie in [0, 1]")
        if np.any(powers < 0) or np.any(powers > 1):
            raise DomainError("power support must lie in [0, 1]")
        order = np.argsort(powers, kind="stable")
        self.powers = powers[order]
        self.values = _repair(values[order])
        self.powers.setflags(write=False)
        self.values.setflags(write=False)
        self.source = source

    def value_at(self, beta) -> float | np.ndarray:
        """Upper p-value testing H0: power <= beta (saturates at the ends)."""
        out = np.interp(np.asarray(beta, dtype=float), self.powers, self.values)
        return float(out) if np.ndim(beta) == 0 else out

    def quantile(self, p: float) -> float:
        lo, hi = float(self.values[0]), float(self.values[-1])
        if not lo <= p <= hi:
            raise OutOfRangeError(f"p={p} outside tabulated range [{lo:.3g}, {hi:.3g}]")
        return float(np.interp(p, self.values, self.powers))

    def interval(self, level: float) -> tuple[float, float]:
        alpha = 1.0 - level
        return (self.quantile(alpha / 2.0), self.quantile(1.0 - alpha / 2.0))

    @property
    def median(self) -> float:
        return self.quantile(0.5)


def _repair(values: np.ndarray) -> np.ndarray:
    viol = float(np.max(np.maximum.accumulate(values) - values, initial=0.0))
    if viol > pvfn.MONOTONE_NOISE_TOL:
        raise DomainError(
            f"pushforward produced non-monotone p-values (violation {viol:.3e}); "
            "the power curve must be monotone on the grid"
        )
    return np.maximum.accumulate(values)


def power_pvfn(H_theta: PValueFunction, pc: PowerCurve) -> PowerPValueFunction:
    """Change of variables: inference on the effect becomes inference on power.

    For every grid theta the pair (beta(theta), H(theta)) is recorded, so the
    value assigned at beta(theta) equals H(theta) exactly.
    """
    if H_theta.tail != "upper":
        raise DomainError("pushforward requires an upper p-value function")
    H_theta.grid.require_same(pc.grid)
    return PowerPValueFunction(
        pc.values, H_theta.values, source=f"pushforward[{H_theta.source}]"
    )


def probit_gradients(
    design: TrialDesign, ctrl_rate: float, theta: float, step: float = 1e-5
) -> tuple[float, float]:
    """Central finite differences of probit(power) in the effect and the
    control rate, on the exact power surface (minimum detectable effect
    re-solved at each perturbed control rate)."""

    def g(th, pc_rate):
        b = power_at(design, pc_rate, th)
        return float(ndtri(np.clip(b, 1e-12, 1 - 1e-12)))

    d_theta = (g(theta + step, ctrl_rate) - g(theta - step, ctrl_rate)) / (2 * step)
    d_rate = (g(theta, ctrl_rate + step) - g(theta, ctrl_rate - step)) / (2 * step)
    return d_theta, d_rate


def delta_wald_power_pvfn(
    external: TwoArmCounts,
    design: TrialDesign,
    transform: str = "probit",
    power_grid: np.ndarray | None = None,
) -> PowerPValueFunction:
    """Probit-scale Wald p-value function for power via the delta method.

    The external study supplies the effect and control-rate estimates and
    their binomial variances (the effect/control covariance is minus the
    control variance, since the effect is the difference of the arm rates).
    The power estimate is clamped away from 0/1 before the probit transform.
    """
    if transform != "probit":
        raise DomainError(f"unsupported transform {transform!r}; probit is shipped")
    if not external.is_interior():
        raise BoundaryError("delta-method route needs interior estimates")
    pc_hat = external.p_ctrl_hat
    pa_hat = external.p_active_hat
    theta_hat = external.theta_hat
    beta_hat = power_at(design, pc_hat, theta_hat)
    if beta_hat <= 0.0 or beta_hat >= 1.0:
        raise BoundaryError(f"power estimate {beta_hat} is on the boundary")
    beta_hat = float(np.clip(beta_hat, BETA_CLAMP, 1 - BETA_CLAMP))
    d_theta, d_rate = probit_gradients(design, pc_hat, theta_hat)
    var_theta = (
        pc_hat * (1 - pc_hat) / external.n_ctrl
        + pa_hat * (1 - pa_hat) / external.n_active
    )
    var_pc = pc_hat * (1 - pc_hat) / external.n_ctrl
    cov = -var_pc
    se2 = (
        d_theta**2 * var_theta + d_rate**2 * var_pc + 2 * d_theta * d_rate * cov
    )
    se = float(np.sqrt(max(se2, 0.0)))
    if power_grid is None:
        power_grid = np.linspace(BETA_CLAMP, 1 - BETA_CLAMP, 2001)
    z = (ndtri(beta_hat) - ndtri(power_grid)) / se
    values = 1.0 - ndtr(z)
    out = PowerPValueFunction(
        power_grid,
        values,
        source=(
            f"delta-probit(beta_hat={beta_hat:.6g},se={se:.6g},"
            f"n_ctrl={external.n_ctrl:g},n_active={external.n_active:g})"
        ),
    )
    out.beta_hat = beta_hat
    out.se_probit = se
    return out


def delta_interval(ppv: PowerPValueFunction, level: float) -> tuple[float, float]:
    """Closed-form equal-tailed interval for a delta-route construction."""
    if not hasattr(ppv, "beta_hat"):
        return ppv.interval(level)
    z = ndtri(1.0 - (1.0 - level) / 2.0)
    g0 = ndtri(ppv.beta_hat)
    return (float(ndtr(g0 - z * ppv.se_probit)), float(ndtr(g0 + z * ppv.se_probit)))
