"""Probability-of-success estimators and conditional variants."""

import numpy as np
import pytest

from cdinfer.binomial import TwoArmCounts
from cdinfer.errors import DegenerateMassError, TruncationWarning
from cdinfer.pos import conditional_density, conditional_pos, joint_pos, pos
from cdinfer.power import PowerCurve, TrialDesign, power_curve, power_pvfn
from cdinfer.pvfn import (
    ConfidenceDensity,
    ParamGrid,
    PValueFunction,
    confidence_density,
    upper_pvfn_lrt,
)

GRID = ParamGrid.default()
D3 = TrialDesign(365, 365, theta0=-0.12, alpha=0.025)
D2 = TrialDesign(90, 90, theta0=-0.05, alpha=0.20)
PHASE2_SUCCESS = TwoArmCounts(0.43 * 90, 90, (0.43 + 0.014) * 90, 90)
ELICITED = TwoArmCounts(516, 1200, 143.5, 350)


@pytest.fixture(scope="module")
def pc3():
    return power_curve(D3, 0.43, GRID)


@pytest.fixture(scope="module")
def pc2():
    return power_curve(D2, 0.43, GRID)


@pytest.fixture(scope="module")
def H2s():
    return upper_pvfn_lrt(PHASE2_SUCCESS, GRID)


@pytest.fixture(scope="module")
def He():
    return upper_pvfn_lrt(ELICITED, GRID)


def _const_curve(value):
    return PowerCurve(
        GRID, np.full(GRID.n_points, value), D3, 0.43, mde=0.0
    )


def test_pos_constant_curve_returns_constant(H2s):
    assert pos(H2s, _const_curve(0.37)) == pytest.approx(0.37, abs=1e-12)


def test_pos_conditioning_anchor(H2s, pc3):
    # probability-of-success estimate of phase-3 power given minimal
    # phase-2 success
    assert pos(H2s, pc3) == pytest.approx(0.781, abs=0.01)


def test_pos_refinement_oracle(H2s, pc3):
    fine_grid = ParamGrid(GRID.lo, GRID.hi, GRID.step / 10)
    H_fine = upper_pvfn_lrt(PHASE2_SUCCESS, fine_grid)
    pc_fine = power_curve(D3, 0.43, fine_grid)
    assert pos(H2s, pc3) == pytest.approx(pos(H_fine, pc_fine), abs=1e-3)


def test_pos_bounded_by_curve_range(H2s, pc3):
    val = pos(H2s, pc3)
    assert float(np.min(pc3.values)) <= val <= float(np.max(pc3.values))


def test_pos_degenerate_mass():
    H = PValueFunction(GRID, np.full(GRID.n_points, 0.5), "upper")
    with pytest.raises(DegenerateMassError):
        pos(H, _const_curve(0.5))


def test_pos_truncation_warning(pc3):
    # mass centered near the grid edge: spanned mass well below 0.99
    edge_counts = TwoArmCounts(0.43 * 90, 90, (0.43 - 0.19) * 90, 90)
    H_edge = upper_pvfn_lrt(edge_counts, GRID)
    with pytest.warns(TruncationWarning):
        pos(H_edge, pc3)


def test_pos_matches_power_axis_route(H2s, pc3):
    # the sum over the effect axis equals the sum over the power axis: the
    # pushforward only re-sorts the (beta, H) pairs
    ppv = power_pvfn(H2s, pc3)
    dH = np.diff(ppv.values)
    power_axis = float(np.sum(ppv.powers[1:] * dH) / np.sum(dH))
    assert pos(H2s, pc3) == pytest.approx(power_axis, abs=1e-6)


def test_joint_pos_reduces_when_one_curve_saturates(H2s, pc3):
    assert joint_pos(H2s, _const_curve(1.0), pc3) == pytest.approx(
        pos(H2s, pc3), abs=1e-12
    )


def test_joint_pos_pointwise_min_bound(H2s, pc2, pc3):
    joint = joint_pos(H2s, pc2, pc3)
    min_curve = PowerCurve(
        GRID, np.minimum(pc2.values, pc3.values), D3, 0.43, mde=pc3.mde
    )
    assert joint <= pos(H2s, min_curve) + 1e-12


def test_joint_pos_below_single_phase(He, pc2, pc3):
    assert joint_pos(He, pc2, pc3) < pos(He, pc3)


def test_conditional_density_identity(He, pc3):
    dens = confidence_density(He)
    out = conditional_density(He, _const_curve(1.0))
    # re-normalization only: shapes match up to the input's total mass
    assert np.allclose(out.values, dens.values / dens.mass, atol=1e-12)


def test_conditional_density_unit_mass_and_mean_shift(He, pc2):
    out = conditional_density(He, pc2)
    assert out.mass == pytest.approx(1.0, abs=1e-6)
    assert out.mean() > confidence_density(He).mean()


def test_conditional_density_accepts_density_input(He, pc2):
    dens = confidence_density(He)
    out1 = conditional_density(He, pc2)
    out2 = conditional_density(dens, pc2)
    assert np.allclose(out1.values, out2.values, atol=1e-12)


def test_conditional_pos_point_mass(pc3):
    vals = np.zeros(GRID.n_points)
    k = 400
    vals[k] = 1.0 / GRID.step
    h = ConfidenceDensity(GRID, vals)
    assert conditional_pos(h, pc3) == pytest.approx(
        float(pc3.values[k]), abs=1e-12
    )


def test_conditional_pos_in_unit_interval(He, pc2, pc3):
    h_cond = conditional_density(He, pc2)
    val = conditional_pos(h_cond, pc3)
    assert 0.0 <= val <= 1.0


def test_conditional_dual_route_agreement(He, H2s, pc2, pc3):
    # pre-posterior route: elicited density times the phase-2 curve
    route1 = conditional_pos(conditional_density(He, pc2), pc3)
    # multiply-then-differentiate route on the p-value function side
    from cdinfer.combine import multiply

    mult = multiply(He, H2s)
    dM = np.diff(mult.values)
    route2 = float(np.sum(pc3.values[1:] * dM) / np.sum(dM))
    assert abs(route1 - route2) < 0.05


def test_bias_direction_toward_half():
    # over simulated phase-2 datasets the pos estimate sits between the
    # plain power estimate and 1/2, on both sides
    from cdinfer.simlab import table1_config, operating_characteristics, TABLE1_RULES

    for theta, high_truth in ((0.0, True), (-0.12, False)):
        cfg = table1_config(theta, reps=2000, seed=11)
        rep = operating_characteristics(cfg, TABLE1_RULES, workers=None)
        mean_mle = float(np.mean(rep.samples_beta_mle))
        mean_pos = float(np.mean(rep.samples_beta_pos))
        if high_truth:
            assert mean_pos < mean_mle
        else:
            assert mean_pos > mean_mle
