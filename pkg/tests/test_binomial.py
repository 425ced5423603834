"""Two-arm binomial model: likelihood, MLEs, and test statistics."""

import math

import numpy as np
import pytest
from scipy.special import chdtr

from cdinfer.binomial import (
    RateParams,
    TwoArmCounts,
    log_likelihood,
    lrt_statistic,
    mle,
    restricted_ctrl_mle,
    score_p_ctrl,
    wald_se,
    wald_z,
)
from cdinfer.errors import BoundaryError, ConvergenceError, DomainError

# frozen with 50-digit arithmetic: counts (516,1200,133,350) at (0.43, -0.02)
LL_ELICITED = -1053.056751185617


def test_log_likelihood_fair_coin():
    c = TwoArmCounts(1, 2, 1, 2)
    assert log_likelihood(c, RateParams(0.5, 0.0)) == pytest.approx(4 * math.log(0.5))


def test_log_likelihood_frozen_value():
    c = TwoArmCounts(516, 1200, 133, 350)
    assert log_likelihood(c, RateParams(0.43, -0.02)) == pytest.approx(
        LL_ELICITED, abs=1e-9
    )


def test_log_likelihood_maximized_at_mle_on_grid():
    c = TwoArmCounts(516, 1200, 133, 350)
    at_mle = log_likelihood(c, mle(c))
    grid = np.linspace(0.3, 0.6, 61)
    diffs = np.linspace(-0.15, 0.05, 41)
    for p in grid:
        for th in diffs:
            if not (0 < p + th < 1):
                continue
            assert log_likelihood(c, RateParams(p, th)) <= at_mle + 1e-12


def test_log_likelihood_domain_error():
    c = TwoArmCounts(5, 10, 5, 10)
    with pytest.raises(DomainError):
        # p_active = 0.2 - 0.3 < 0 is rejected by RateParams already
        RateParams(0.2, -0.3)
    # zero coefficient silences the log: x_active = n_active makes the last
    # term drop even as p_active -> 1
    c2 = TwoArmCounts(5, 10, 10, 10)
    val = log_likelihood(c2, RateParams(0.5, 0.4999999))
    assert np.isfinite(val)


def test_mle_closed_form():
    c = TwoArmCounts(43, 100, 44, 100)
    est = mle(c)
    assert est.p_ctrl == pytest.approx(0.43)
    assert est.theta == pytest.approx(0.01)


def test_mle_paper_counts():
    est = mle(TwoArmCounts(516, 1200, 133, 350))
    assert est.p_ctrl == pytest.approx(0.43)
    assert est.theta == pytest.approx(-0.05)


def test_mle_boundary_error():
    with pytest.raises(BoundaryError):
        mle(TwoArmCounts(0, 10, 5, 10))
    with pytest.raises(BoundaryError):
        mle(TwoArmCounts(5, 10, 10, 10))


@pytest.mark.parametrize("seed", range(5))
def test_mle_maximizes_on_random_instances(seed):
    rng = np.random.default_rng(seed)
    n1, n2 = rng.integers(5, 40, size=2)
    x1 = rng.integers(1, n1)
    x2 = rng.integers(1, n2)
    c = TwoArmCounts(int(x1), int(n1), int(x2), int(n2))
    best = log_likelihood(c, mle(c))
    ps = np.linspace(1e-3, 1 - 1e-3, 200)
    ths = np.linspace(-0.999, 0.999, 200)
    for p in ps:
        for th in ths:
            if not (0 < p + th < 1):
                continue
            assert log_likelihood(c, RateParams(p, th)) <= best + 1e-10


def test_restricted_mle_at_theta_hat_is_ctrl_rate():
    c = TwoArmCounts(38.7, 90, 39.96, 90)
    assert restricted_ctrl_mle(c, c.theta_hat) == c.p_ctrl_hat


def test_restricted_mle_matches_independent_score_bisection():
    c = TwoArmCounts(38.7, 90, 39.96, 90)
    for theta0 in (-0.05, -0.12, 0.1, 0.3):
        got = restricted_ctrl_mle(c, theta0)
        # independent oracle: plain bisection on the (strictly decreasing)
        # score over the feasible interval
        lo, hi = max(0.0, -theta0) + 1e-12, min(1.0, 1.0 - theta0) - 1e-12
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if score_p_ctrl(c, mid, theta0) > 0:
                lo = mid
            else:
                hi = mid
        oracle = 0.5 * (lo + hi)
        assert got == pytest.approx(oracle, abs=1e-9)
        assert abs(score_p_ctrl(c, got, theta0)) < 1e-8


def test_restricted_mle_empty_active_arm():
    c = TwoArmCounts(43, 100, 0, 0)
    assert restricted_ctrl_mle(c, -0.05) == pytest.approx(0.43)


def test_restricted_mle_infeasible_theta0():
    c = TwoArmCounts(43, 100, 44, 100)
    with pytest.raises(DomainError):
        restricted_ctrl_mle(c, 1.5)


def test_restricted_mle_score_residual_over_wide_grid():
    thetas = np.arange(-0.6, 0.6 + 1e-12, 5e-4)
    for c in (
        TwoArmCounts(39, 90, 38, 90),
        TwoArmCounts(0.43 * 365, 365, 0.381 * 365, 365),
        TwoArmCounts(20, 90, 60, 90),
    ):
        p = restricted_ctrl_mle(c, thetas)
        lo = np.maximum(0.0, -thetas) + 1e-12
        hi = np.minimum(1.0, 1.0 - thetas) - 1e-12
        resid = np.abs(score_p_ctrl(c, p, thetas))
        interior = (p > lo) & (p < hi)
        assert np.all(resid[interior] < 1e-8)
        assert np.all(p >= lo - 1e-12) and np.all(p <= hi + 1e-12)


def test_lrt_statistic_zero_at_mle_and_nonnegative():
    c = TwoArmCounts(0.43 * 365, 365, (0.43 - 0.049) * 365, 365)
    assert lrt_statistic(c, c.theta_hat) == 0.0
    thetas = np.linspace(-0.3, 0.3, 121)
    stats = lrt_statistic(c, thetas)
    assert np.all(stats >= 0)


def test_lrt_statistic_unimodal_about_mle():
    c = TwoArmCounts(39, 90, 38, 90)
    thetas = np.arange(-0.3, 0.3, 2e-3)
    stats = lrt_statistic(c, thetas)
    k = int(np.argmin(stats))
    assert abs(thetas[k] - c.theta_hat) < 4e-3
    assert np.all(np.diff(stats[: k + 1]) <= 1e-9)
    assert np.all(np.diff(stats[k:]) >= -1e-9)


def test_lrt_statistic_phase3_design_hits_chi2_quantile():
    # the phase-3 minimum-success construction puts the statistic at the
    # chi-squared(1) 0.95 quantile, i.e. a one-sided p-value of 0.025
    c = TwoArmCounts(0.43 * 365, 365, 0.381 * 365, 365)
    stat = lrt_statistic(c, -0.12)
    assert stat == pytest.approx(3.841, abs=0.05)
    pval = (1 - chdtr(1.0, stat)) / 2
    assert abs(pval - 0.025) < 2e-3


def test_wald_z_zero_at_mle_and_hand_value():
    c = TwoArmCounts(43, 100, 44, 100)
    assert wald_z(c, c.theta_hat) == pytest.approx(0.0, abs=1e-12)
    se = math.sqrt(0.43 * 0.57 / 100 + 0.44 * 0.56 / 100)
    assert wald_se(c) == pytest.approx(se)
    assert wald_z(c, -0.05) == pytest.approx(0.06 / se)
    assert se == pytest.approx(0.070, abs=5e-4)


def test_wald_z_sign_matches_effect_side():
    c = TwoArmCounts(43, 100, 44, 100)
    thetas = np.linspace(-0.3, 0.3, 61)
    z = wald_z(c, thetas)
    assert np.all(np.sign(z) == np.sign(c.theta_hat - thetas))


def test_wald_z_boundary():
    with pytest.raises(BoundaryError):
        wald_z(TwoArmCounts(0, 10, 5, 10), 0.0)


def test_counts_validation():
    with pytest.raises(DomainError):
        TwoArmCounts(-1, 10, 5, 10)
    with pytest.raises(DomainError):
        TwoArmCounts(11, 10, 5, 10)
    with pytest.raises(DomainError):
        TwoArmCounts(5, 0, 5, 10)
    # fractional design-stage counts are fine
    TwoArmCounts(38.7, 90, 39.96, 90)


def test_negative_lrt_guard_not_triggered_normally():
    c = TwoArmCounts(10, 30, 12, 28)
    stats = lrt_statistic(c, np.linspace(-0.5, 0.5, 201))
    assert np.all(stats >= 0)


def test_convergence_error_carries_diagnostics():
    err = ConvergenceError("boom", last_iterate=0.4, residual=1e-3)
    assert err.last_iterate == 0.4 and err.residual == 1e-3
