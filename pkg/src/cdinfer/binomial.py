"""Two-arm binomial model: likelihood, MLEs, and test statistics.

The model is two independent binomials, X_ctrl ~ Bin(n_ctrl, p_ctrl) and
X_active ~ Bin(n_active, p_ctrl + theta), with the treatment effect theta the
difference in response proportions. Counts may be fractional: design-stage
power work evaluates the likelihood at expected counts y = p * n.

The null-restricted control-rate MLE is found by the classical fixed-point
iteration for the profile likelihood; the likelihood ratio statistic referenced
against chi-squared(1) drives everything downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryError, ConvergenceError, DomainError

__all__ = [
    "TwoArmCounts",
    "RateParams",
    "log_likelihood",
    "mle",
    "restricted_ctrl_mle",
    "lrt_statistic",
    "wald_z",
    "wald_se",
]

# Stopping rule for the restricted-MLE fixed point. Iteration ends when the
# sup-norm step falls below FP_TOL; the result must then satisfy
# |score| < SCORE_TOL or a ConvergenceError is raised.
FP_TOL = 1e-12
FP_MAX_ITER = 500
SCORE_TOL = 1e-8


@dataclass(frozen=True)
class TwoArmCounts:
    """Event counts and sample sizes for the control and active arms.

    Fractional counts are allowed (expected counts at the design stage).
    ``n_active`` may be zero, in which case the active arm carries no
    information.
    """

    x_ctrl: float
    n_ctrl: float
    x_active: float
    n_active: float

    def __post_init__(self):
        if not self.n_ctrl > 0:
            raise DomainError(f"n_ctrl must be positive, got {self.n_ctrl}")
        if self.n_active < 0:
            raise DomainError(f"n_active must be nonnegative, got {self.n_active}")
        if not 0 <= self.x_ctrl <= self.n_ctrl:
            raise DomainError(
                f"x_ctrl={self.x_ctrl} outside [0, n_ctrl={self.n_ctrl}]"
            )
        if not 0 <= self.x_active <= self.n_active:
            raise DomainError(
                f"x_active={self.x_active} outside [0, n_active={self.n_active}]"
            )

    @property
    def p_ctrl_hat(self) -> float:
        return self.x_ctrl / self.n_ctrl

    @property
    def p_active_hat(self) -> float:
        if self.n_active == 0:
            raise BoundaryError("active arm is empty; no rate estimate")
        return self.x_active / self.n_active

    @property
    def theta_hat(self) -> float:
        return self.p_active_hat - self.p_ctrl_hat

    def is_interior(self) -> bool:
        """True when both rate estimates are strictly inside (0, 1)."""
        return (
            0 < self.x_ctrl < self.n_ctrl
            and self.n_active > 0
            and 0 < self.x_active < self.n_active
        )


@dataclass(frozen=True)
class RateParams:
    """Control response rate and treatment-effect difference in proportions."""

    p_ctrl: float
    theta: float

    def __post_init__(self):
        if not 0 < self.p_ctrl < 1:
            raise DomainError(f"p_ctrl={self.p_ctrl} outside (0, 1)")
        if not 0 < self.p_ctrl + self.theta < 1:
            raise DomainError(
                f"p_active = p_ctrl + theta = {self.p_ctrl + self.theta} outside (0, 1)"
            )

    @property
    def p_active(self) -> float:
        return self.p_ctrl + self.theta


def _xlogy(x, y):
    """x * log(y) with the convention 0 * log(anything) = 0.

    Raises DomainError when a nonzero coefficient multiplies log of a
    nonpositive argument.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nonzero = x != 0
    if np.any(nonzero & (y <= 0)):
        raise DomainError("log argument <= 0 with a nonzero coefficient")
    out = np.zeros(np.broadcast(x, y).shape)
    safe = np.where(nonzero & (np.broadcast_to(y, out.shape) > 0),
                    np.broadcast_to(y, out.shape), 1.0)
    np.multiply(np.broadcast_to(x, out.shape), np.log(safe), out=out,
                where=np.broadcast_to(nonzero, out.shape))
    return out


def log_likelihood(counts: TwoArmCounts, params: RateParams) -> float:
    """Two-arm binomial log-likelihood up to an additive constant."""
    total = (
        _xlogy(counts.x_ctrl, params.p_ctrl)
        + _xlogy(counts.n_ctrl - counts.x_ctrl, 1 - params.p_ctrl)
        + _xlogy(counts.x_active, params.p_ctrl + params.theta)
        + _xlogy(counts.n_active - counts.x_active, 1 - params.p_ctrl - params.theta)
    )
    return float(total)


def mle(counts: TwoArmCounts) -> RateParams:
    """Unrestricted maximum likelihood estimate (p_ctrl, theta).

    Closed form: per-arm sample proportions. Raises BoundaryError when either
    arm's rate estimate is 0 or 1; clamping (if any) is the caller's policy.
    """
    if not counts.is_interior():
        raise BoundaryError(
            "MLE on the boundary: a rate estimate is 0 or 1 "
            f"(x_ctrl={counts.x_ctrl}/{counts.n_ctrl}, "
            f"x_active={counts.x_active}/{counts.n_active})"
        )
    return RateParams(counts.p_ctrl_hat, counts.theta_hat)


def _feasible_interval(theta0):
    lo = np.maximum(0.0, -theta0)
    hi = np.minimum(1.0, 1.0 - theta0)
    return lo, hi


def score_p_ctrl(counts: TwoArmCounts, p_ctrl, theta0):
    """Partial derivative of the log-likelihood with respect to p_ctrl."""
    p = np.asarray(p_ctrl, dtype=float)
    th = np.asarray(theta0, dtype=float)
    s = np.zeros(np.broadcast(p, th).shape)
    if counts.x_ctrl != 0:
        s = s + counts.x_ctrl / p
    if counts.n_ctrl - counts.x_ctrl != 0:
        s = s - (counts.n_ctrl - counts.x_ctrl) / (1 - p)
    if counts.x_active != 0:
        s = s + counts.x_active / (p + th)
    if counts.n_active - counts.x_active != 0:
        s = s - (counts.n_active - counts.x_active) / (1 - p - th)
    return s


def restricted_ctrl_mle(counts: TwoArmCounts, theta0):
    """Control-rate MLE restricted to the null slice theta = theta0.

    Runs the profile-likelihood fixed-point update starting from the observed
    control rate until the step falls below 1e-12 (at most 500 iterations),
    then verifies the score residual. ``theta0`` may be a scalar or an array;
    the iteration is vectorized and, once most points have converged, continues
    on the unconverged subset only.

    Returns the restricted estimate with the same shape as ``theta0``.
    """
    th = np.atleast_1d(np.asarray(theta0, dtype=float))
    scalar = np.isscalar(theta0) or np.ndim(theta0) == 0
    lo, hi = _feasible_interval(th)
    if np.any(lo >= hi):
        bad = th[lo >= hi]
        raise DomainError(f"theta0={bad[0]} admits no feasible p_ctrl")
    eps = 1e-15
    lo = lo + eps
    hi = hi - eps

    xc, nc = counts.x_ctrl, counts.n_ctrl
    xa, na = counts.x_active, counts.n_active
    p = np.clip(np.full_like(th, xc / nc), lo, hi)

    if na == 0:
        # active arm contributes nothing; the restricted optimum is the
        # observed control rate (clipped into the feasible slice)
        return float(p[0]) if scalar else p.reshape(np.shape(theta0))

    def update(p, th, lo, hi):
        w = xa / (p + th)
        num = xc + w * p * (1 - p) + (xa * (1 - p) / (1 - p - th)) * p
        den = nc + na * (1 - p) / (1 - p - th)
        return np.clip(num / den, lo, hi)

    # Iterate the update on the not-yet-converged subset. Every CHECK_EVERY
    # iterations, points whose step size has stopped shrinking are ejected:
    # the update oscillates between the feasibility bounds for theta0 far
    # from the data, and those points go straight to the bisection rescue.
    CHECK_EVERY = 32
    active = np.arange(th.size)
    p_work, th_work, lo_work, hi_work = p, th, lo, hi
    step = np.full(th.size, np.inf)
    checkpoint = step.copy()
    for it in range(FP_MAX_ITER):
        p_new = update(p_work, th_work, lo_work, hi_work)
        step = np.abs(p_new - p_work)
        moved = step >= FP_TOL
        # sub-tolerance entries keep their pre-update value, so a start that
        # is already the optimum (theta0 = theta_hat) passes through exactly
        p_work = np.where(moved, p_new, p_work)
        if not moved.any():
            p[active] = p_work
            break
        keep = moved
        if (it + 1) % CHECK_EVERY == 0:
            stalled = step > 0.25 * checkpoint
            keep = moved & ~stalled
            checkpoint = step
        if keep.sum() < p_work.size:
            p[active] = p_work
            active = active[keep]
            if active.size == 0:
                break
            p_work = p[active]
            th_work, lo_work, hi_work = th[active], lo[active], hi[active]
            step, checkpoint = step[keep], checkpoint[keep]
    else:
        p[active] = p_work

    bad = _invalid_optimum(counts, p, th, lo, hi)
    if np.any(bad):
        # The fixed-point update oscillates between the feasibility bounds
        # when theta0 sits far from the data. The log-likelihood is strictly
        # concave in p_ctrl, so the score has a unique root: bisect it.
        idx = np.nonzero(bad)[0]
        p[idx] = _bisect_score(counts, th[idx], lo[idx], hi[idx])
        bad = _invalid_optimum(counts, p, th, lo, hi)
        if np.any(bad):
            # where the score is too steep for its residual to reach the
            # tolerance in double precision, a sign straddle across adjacent
            # floats certifies the root as exactly as doubles allow
            idx = np.nonzero(bad)[0]
            p_dn = np.nextafter(np.nextafter(p[idx], -np.inf), -np.inf)
            p_up = np.nextafter(np.nextafter(p[idx], np.inf), np.inf)
            straddle = (score_p_ctrl(counts, p_dn, th[idx]) >= 0) & (
                score_p_ctrl(counts, p_up, th[idx]) <= 0
            )
            bad[idx[straddle]] = False
        if np.any(bad):
            resid = np.abs(score_p_ctrl(counts, p, th))
            i = int(np.argmax(np.where(bad, resid, -np.inf)))
            raise ConvergenceError(
                f"restricted MLE did not converge at theta0={th[i]}: "
                f"|score|={resid[i]:.3e}",
                last_iterate=float(p[i]),
                residual=float(resid[i]),
            )
    return float(p[0]) if scalar else p.reshape(np.shape(theta0))


def _invalid_optimum(counts, p, th, lo, hi):
    """A restricted optimum is valid when the score is within tolerance or the
    iterate sits at a feasibility bound with the score pointing outward
    (the score decreases strictly in p, so that is a true boundary optimum)."""
    s = score_p_ctrl(counts, p, th)
    at_lo_opt = (p <= lo) & (s < 0)
    at_hi_opt = (p >= hi) & (s > 0)
    return ~((np.abs(s) <= SCORE_TOL) | at_lo_opt | at_hi_opt)


def _bisect_score(counts: TwoArmCounts, th, lo, hi):
    """Vectorized bisection for the root of the p_ctrl score at fixed theta0.

    The score decreases strictly in p_ctrl. Where it does not change sign on
    the feasible interval the optimum sits on the corresponding bound and the
    bound itself is returned.
    """
    s_lo = score_p_ctrl(counts, lo, th)
    s_hi = score_p_ctrl(counts, hi, th)
    at_lo = s_lo <= 0  # likelihood decreasing from the left bound onward
    at_hi = s_hi >= 0  # still increasing at the right bound
    a = lo.copy()
    b = hi.copy()
    for _ in range(200):
        mid = 0.5 * (a + b)
        done = (mid <= a) | (mid >= b)  # no float strictly between a and b
        if done.all():
            break
        s = score_p_ctrl(counts, mid, th)
        high = s > 0
        a = np.where(high & ~done, mid, a)
        b = np.where(~high & ~done, mid, b)
    root = 0.5 * (a + b)
    return np.where(at_lo, lo, np.where(at_hi, hi, root))


def lrt_statistic(counts: TwoArmCounts, theta0):
    """Likelihood ratio statistic -2 log lambda for H0: theta = theta0.

    Vectorized over ``theta0``. Nonnegative by construction; values inside
    -1e-10 of zero (floating-point noise at theta0 = theta_hat) are clamped
    to exactly 0.
    """
    params_hat = mle(counts)
    ll_hat = log_likelihood(counts, params_hat)
    th = np.asarray(theta0, dtype=float)
    p_star = restricted_ctrl_mle(counts, th)
    ll_null = (
        _xlogy(counts.x_ctrl, p_star)
        + _xlogy(counts.n_ctrl - counts.x_ctrl, 1 - np.asarray(p_star))
        + _xlogy(counts.x_active, np.asarray(p_star) + th)
        + _xlogy(counts.n_active - counts.x_active, 1 - np.asarray(p_star) - th)
    )
    stat = -2.0 * (ll_null - ll_hat)
    if np.any(stat < -1e-10):
        worst = float(np.min(stat))
        raise ConvergenceError(
            f"negative LRT statistic {worst:.3e}: restricted optimum "
            "exceeded the unrestricted maximum"
        )
    stat = np.maximum(stat, 0.0)
    return float(stat) if np.ndim(theta0) == 0 else stat


def wald_se(counts: TwoArmCounts) -> float:
    """Standard error of theta_hat from per-arm binomial variances."""
    pc = counts.p_ctrl_hat
    pa = counts.p_active_hat
    var = pc * (1 - pc) / counts.n_ctrl + pa * (1 - pa) / counts.n_active
    return float(np.sqrt(var))


def wald_z(counts: TwoArmCounts, theta0):
    """Wald z statistic (theta_hat - theta0) / se on the identity link."""
    if not counts.is_interior():
        raise BoundaryError("Wald z needs interior rate estimates")
    se = wald_se(counts)
    if se == 0:
        raise BoundaryError("Wald standard error is zero")
    z = (counts.theta_hat - np.asarray(theta0, dtype=float)) / se
    return float(z) if np.ndim(theta0) == 0 else z
