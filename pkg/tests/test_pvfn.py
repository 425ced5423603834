"""P-value function construction, queries, and presentations."""

import numpy as np
import pytest

from cdinfer.binomial import TwoArmCounts
from cdinfer.errors import DomainError, OutOfRangeError
from cdinfer.pvfn import (
    ParamGrid,
    PValueFunction,
    confidence_curve,
    confidence_density,
    interval,
    lower_pvfn,
    quantile,
    upper_pvfn_lrt,
    upper_pvfn_wald,
)

GRID = ParamGrid.default()

# minimum-success datasets from the worked example: observed effects equal to
# the stated minimum detectable effects
PHASE3_COUNTS = TwoArmCounts(0.43 * 365, 365, (0.43 - 0.049) * 365, 365)
PHASE2_COUNTS = TwoArmCounts(0.43 * 90, 90, (0.43 + 0.014) * 90, 90)
ELICITED_COUNTS = TwoArmCounts(516, 1200, 143.5, 350)


@pytest.fixture(scope="module")
def H3():
    return upper_pvfn_lrt(PHASE3_COUNTS, GRID)


@pytest.fixture(scope="module")
def H2():
    return upper_pvfn_lrt(PHASE2_COUNTS, GRID)


def test_grid_validation():
    with pytest.raises(DomainError):
        ParamGrid(0.0, 0.0, 0.1)
    with pytest.raises(DomainError):
        ParamGrid(0.0, 1.0, -0.1)
    with pytest.raises(DomainError):
        ParamGrid(0.0, 0.5, 0.1)  # fewer than 10 steps
    g = ParamGrid(-0.21, 0.247, 5e-4)
    assert g.n_points == 915
    assert g.thetas[0] == pytest.approx(-0.21)
    assert g.thetas[-1] == pytest.approx(0.247)


def test_lrt_half_at_mle(H3, H2):
    assert H3.value_at(PHASE3_COUNTS.theta_hat) == pytest.approx(0.5, abs=1e-6)
    assert H2.value_at(PHASE2_COUNTS.theta_hat) == pytest.approx(0.5, abs=1e-6)


def test_lrt_phase3_anchor(H3):
    # one-sided p-value "just under 0.025" at the non-inferiority margin
    assert H3.value_at(-0.12) == pytest.approx(0.025, abs=0.004)
    assert H3.value_at(-0.12) < 0.025


def test_lrt_phase2_anchor(H2):
    assert H2.value_at(-0.05) == pytest.approx(0.20, abs=0.01)
    assert H2.value_at(-0.05) < 0.20


def test_upper_monotone(H3, H2):
    for H in (H3, H2):
        assert np.all(np.diff(H.values) >= 0)


def test_wald_half_at_mle_and_agreement_with_lrt(H3, H2):
    W3 = upper_pvfn_wald(PHASE3_COUNTS, GRID)
    assert W3.value_at(PHASE3_COUNTS.theta_hat) == pytest.approx(0.5, abs=1e-9)
    assert float(np.max(np.abs(W3.values - H3.values))) < 0.01
    W2 = upper_pvfn_wald(PHASE2_COUNTS, GRID)
    assert float(np.max(np.abs(W2.values - H2.values))) < 0.01


def test_wald_saturates_toward_tails():
    wide = ParamGrid(-0.9, 0.9, 5e-3)
    W = upper_pvfn_wald(TwoArmCounts(43, 100, 44, 100), wide)
    assert np.all(np.diff(W.values) >= 0)
    assert W.values[0] < 1e-6
    assert W.values[-1] > 1 - 1e-6


def test_lower_pvfn_complement_and_involution(H3):
    L = lower_pvfn(H3)
    assert L.tail == "lower"
    assert np.allclose(L.values, 1 - H3.values)
    assert L.value_at(-0.12) == pytest.approx(0.975, abs=0.004)
    back = lower_pvfn(L)
    assert back.tail == "upper"
    # involution up to one rounding of 1 - (1 - x)
    assert float(np.max(np.abs(back.values - H3.values))) < 1e-15


def test_lower_pvfn_constant_half():
    H = PValueFunction(GRID, np.full(GRID.n_points, 0.5), "upper")
    assert np.all(lower_pvfn(H).values == 0.5)


def test_confidence_curve_peak_and_anchor(H3, H2):
    C3 = confidence_curve(H3)
    assert float(np.max(C3.values)) == pytest.approx(0.5, abs=1e-3)
    assert C3.point_estimate == pytest.approx(PHASE3_COUNTS.theta_hat, abs=GRID.step)
    C2 = confidence_curve(H2)
    assert C2.value_at(-0.05) == pytest.approx(0.20, abs=0.01)


def test_confidence_curve_unimodal(H2):
    C = confidence_curve(H2)
    k = int(np.argmax(C.values))
    assert np.all(np.diff(C.values[: k + 1]) >= -1e-12)
    assert np.all(np.diff(C.values[k:]) <= 1e-12)


def test_confidence_density_constant_for_linear_H():
    vals = np.linspace(0.0, 1.0, GRID.n_points)
    H = PValueFunction(GRID, vals, "upper")
    d = confidence_density(H)
    assert d.values[0] == 0.0
    assert np.allclose(d.values[1:], d.values[1])


def test_confidence_density_mass_and_mode():
    He = upper_pvfn_lrt(ELICITED_COUNTS, GRID)
    d = confidence_density(He)
    assert abs(d.mass - 1.0) < 0.02
    mode = GRID.thetas[int(np.argmax(d.values))]
    assert abs(mode - ELICITED_COUNTS.theta_hat) <= 2 * GRID.step


def test_quantile_median_and_round_trip(H3):
    assert quantile(H3, 0.5) == pytest.approx(PHASE3_COUNTS.theta_hat, abs=GRID.step)
    # value -> quantile round trip at interior points
    for theta in (-0.1, -0.05, 0.0):
        p = H3.value_at(theta)
        assert quantile(H3, p) == pytest.approx(theta, abs=GRID.step)
    # quantile -> value round trip
    for p in (0.1, 0.3, 0.7):
        th = quantile(H3, p)
        assert H3.value_at(th) == pytest.approx(p, abs=1e-6)


def test_quantile_phase3_lower_limit(H3):
    assert quantile(H3, 0.025) == pytest.approx(-0.12, abs=0.004)


def test_quantile_out_of_range(H3):
    with pytest.raises(OutOfRangeError):
        quantile(H3, 1e-12)


def test_interval_nesting(H3):
    lo90, hi90 = interval(H3, 0.90)
    lo95, hi95 = interval(H3, 0.95)
    assert lo95 <= lo90 <= hi90 <= hi95


def test_interval_width_scales_with_root_n():
    c_small = TwoArmCounts(43, 100, 44, 100)
    c_big = TwoArmCounts(172, 400, 176, 400)
    w_small = np.diff(interval(upper_pvfn_lrt(c_small, GRID), 0.95))[0]
    w_big = np.diff(interval(upper_pvfn_lrt(c_big, GRID), 0.95))[0]
    assert w_small / w_big == pytest.approx(2.0, rel=0.15)


def test_values_validation():
    with pytest.raises(DomainError):
        PValueFunction(GRID, np.full(GRID.n_points, 1.5), "upper")
    with pytest.raises(DomainError):
        PValueFunction(GRID, np.zeros(3), "upper")
    with pytest.raises(DomainError):
        PValueFunction(GRID, np.zeros(GRID.n_points), "sideways")


def test_monotone_repair_and_rejection():
    vals = np.linspace(0.0, 1.0, GRID.n_points)
    noisy = vals.copy()
    noisy[100] -= 5e-10  # fp noise: repaired
    H = PValueFunction(GRID, noisy, "upper")
    assert np.all(np.diff(H.values) >= 0)
    broken = vals.copy()
    broken[100] -= 5e-3  # real violation: rejected
    with pytest.raises(DomainError):
        PValueFunction(GRID, broken, "upper")


def test_grid_infeasible_for_model():
    wide = ParamGrid(-1.5, 1.5, 0.01)
    with pytest.raises(DomainError):
        upper_pvfn_lrt(TwoArmCounts(43, 100, 44, 100), wide)


def test_value_at_outside_grid(H3):
    with pytest.raises(OutOfRangeError):
        H3.value_at(0.9)
