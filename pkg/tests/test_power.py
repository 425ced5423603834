"""Power curves, change-of-variables inference on power, delta-method route."""

import numpy as np
import pytest

from cdinfer.binomial import TwoArmCounts
from cdinfer.errors import DomainError, OutOfRangeError
from cdinfer.power import (
    PowerPValueFunction,
    TrialDesign,
    delta_interval,
    delta_wald_power_pvfn,
    mde,
    power_at,
    power_curve,
    power_point_estimate,
    power_pvfn,
    probit_gradients,
)
from cdinfer.pvfn import ParamGrid, PValueFunction, upper_pvfn_lrt

GRID = ParamGrid.default()
D3 = TrialDesign(365, 365, theta0=-0.12, alpha=0.025)
D2 = TrialDesign(90, 90, theta0=-0.05, alpha=0.20)
CTRL = 0.43

PHASE2_SUCCESS = TwoArmCounts(0.43 * 90, 90, (0.43 + 0.014) * 90, 90)


@pytest.fixture(scope="module")
def pc3():
    return power_curve(D3, CTRL, GRID)


@pytest.fixture(scope="module")
def pc2():
    return power_curve(D2, CTRL, GRID)


@pytest.fixture(scope="module")
def H2s():
    return upper_pvfn_lrt(PHASE2_SUCCESS, GRID)


def test_mde_worked_examples():
    assert mde(D3, CTRL) == pytest.approx(-0.049, abs=0.002)
    assert mde(D2, CTRL) == pytest.approx(0.014, abs=0.002)


def test_mde_alpha_half_is_null_margin():
    d = TrialDesign(100, 100, theta0=-0.05, alpha=0.5)
    assert mde(d, CTRL) == -0.05


def test_mde_solves_pvalue_equation():
    for d in (D2, D3):
        effect = mde(d, CTRL)
        counts = TwoArmCounts(
            CTRL * d.n_ctrl, d.n_ctrl, (CTRL + effect) * d.n_active, d.n_active
        )
        H = upper_pvfn_lrt(counts, GRID)
        assert H.value_at(d.theta0) == pytest.approx(d.alpha, abs=2e-5)


def test_mde_bracketing_failure():
    tight = TrialDesign(5, 5, theta0=0.5, alpha=0.025)
    with pytest.raises(DomainError):
        mde(tight, 0.49)


def test_power_curve_phase3_anchors(pc3):
    assert pc3.value_at(-0.12) == pytest.approx(0.025, abs=0.002)
    assert pc3.value_at(-0.05) == pytest.approx(0.50, abs=0.02)
    assert pc3.value_at(0.0) == pytest.approx(0.91, abs=0.01)


def test_power_curve_phase2_anchors(pc2):
    assert pc2.value_at(-0.12) == pytest.approx(0.034, abs=0.005)
    assert pc2.value_at(0.0) == pytest.approx(0.428, abs=0.015)


def test_power_curve_anchor_invariant(pc3, pc2):
    for pc in (pc3, pc2):
        assert pc.value_at(pc.design.theta0) == pytest.approx(
            pc.design.alpha, abs=1e-4
        )
        assert np.all(np.diff(pc.values) >= 0)


def test_power_at_matches_curve(pc3):
    for theta in (-0.12, -0.05, 0.0, 0.1):
        assert power_at(D3, CTRL, theta) == pytest.approx(
            pc3.value_at(theta), abs=1e-6
        )


def test_power_pvfn_degenerate_constant():
    H = PValueFunction(GRID, np.full(GRID.n_points, 0.5), "upper")
    pc = power_curve(D3, CTRL, GRID)
    ppv = power_pvfn(H, pc)
    assert ppv.value_at(0.3) == 0.5
    assert ppv.value_at(0.9) == 0.5


def test_power_pvfn_exact_pairing(H2s, pc3):
    ppv = power_pvfn(H2s, pc3)
    order = np.argsort(pc3.values, kind="stable")
    assert np.array_equal(ppv.powers, pc3.values[order])
    # pushforward exactness: the value recorded at beta(theta) is H(theta)
    assert np.array_equal(np.sort(ppv.values), np.sort(H2s.values))
    assert np.all(np.diff(ppv.values) >= 0)


def test_power_pvfn_conditioning_anchor(H2s, pc3):
    # p-value testing H0: phase-3 power <= 0.5, given minimal phase-2 success
    ppv = power_pvfn(H2s, pc3)
    assert ppv.value_at(0.5) == pytest.approx(0.20, abs=0.005)


def test_power_pvfn_median_is_transformed_point_estimate(H2s, pc3):
    ppv = power_pvfn(H2s, pc3)
    beta_at_theta_hat = power_point_estimate(pc3, PHASE2_SUCCESS.theta_hat)
    assert ppv.median == pytest.approx(beta_at_theta_hat, abs=1e-3)


def test_power_pvfn_rejects_non_monotone(H2s, pc3):
    with pytest.raises(DomainError):
        PowerPValueFunction([0.1, 0.2, 0.3], [0.5, 0.2, 0.7])
    # grid mismatch
    other = upper_pvfn_lrt(PHASE2_SUCCESS, ParamGrid(-0.21, 0.247, 1e-3))
    from cdinfer.errors import GridMismatchError

    with pytest.raises(GridMismatchError):
        power_pvfn(other, pc3)


def test_power_point_estimate_anchors(pc3):
    assert power_point_estimate(pc3, D3.theta0) == pytest.approx(0.025, abs=1e-4)
    assert power_point_estimate(pc3, 0.014) == pytest.approx(0.959, abs=0.005)
    a, b = power_point_estimate(pc3, -0.05), power_point_estimate(pc3, 0.0)
    assert a < b
    with pytest.raises(OutOfRangeError):
        power_point_estimate(pc3, 0.9)


def test_probit_gradients_richardson_stable():
    counts = TwoArmCounts(39, 90, 38, 90)
    g1 = probit_gradients(D3, counts.p_ctrl_hat, counts.theta_hat, step=1e-5)
    g2 = probit_gradients(D3, counts.p_ctrl_hat, counts.theta_hat, step=1e-6)
    for a, b in zip(g1, g2):
        assert a == pytest.approx(b, rel=1e-4)


def test_delta_route_degenerate_precision():
    big = TwoArmCounts(0.43 * 1e6, 1e6, 0.44 * 1e6, 1e6)
    ppv = delta_wald_power_pvfn(big, D3)
    lo, hi = delta_interval(ppv, 0.60)
    assert hi - lo < 0.01


def test_delta_route_agrees_with_pushforward(pc3):
    # the two routes bracket power almost identically on replicate-like data
    counts = TwoArmCounts(39, 90, 38, 90)
    grid = ParamGrid(-0.6, 0.6, 5e-4)
    H = upper_pvfn_lrt(counts, grid)
    pc = power_curve(D3, counts.p_ctrl_hat, grid)
    push = power_pvfn(H, pc)
    push60 = (push.quantile(0.2), push.quantile(0.8))
    ppv = delta_wald_power_pvfn(counts, D3)
    d60 = delta_interval(ppv, 0.60)
    assert push60[0] == pytest.approx(d60[0], abs=0.02)
    assert push60[1] == pytest.approx(d60[1], abs=0.02)


def test_delta_route_needs_interior():
    from cdinfer.errors import BoundaryError

    with pytest.raises(BoundaryError):
        delta_wald_power_pvfn(TwoArmCounts(0, 90, 38, 90), D3)


def test_design_validation():
    with pytest.raises(DomainError):
        TrialDesign(0, 100, -0.05, 0.2)
    with pytest.raises(DomainError):
        TrialDesign(100, 100, -0.05, 0.7)
    with pytest.raises(DomainError):
        TrialDesign(100, 100, 1.2, 0.2)
