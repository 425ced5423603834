"""P-value functions for two-arm binomial treatment effects, inference on
power, probability-of-success estimation, and Go/No-Go decision simulation.

The central object is the upper p-value function H(theta): the one-sided
p-value testing H0: theta <= theta0 for every theta0 on a grid, given fixed
data. Everything else is built on it: confidence curves and densities,
meta-analytic combination, estimated power curves, inference on power by
change of variables or the delta method, probability-of-success estimators,
and the Monte Carlo lab for decision-rule operating characteristics.
"""

__version__ = "0.1.0"

from .binomial import (  # noqa: F401
    RateParams,
    TwoArmCounts,
    log_likelihood,
    lrt_statistic,
    mle,
    restricted_ctrl_mle,
    wald_se,
    wald_z,
)
from .combine import WeightedPvfn, convolve, multiply, or_combine  # noqa: F401
from .design import (  # noqa: F401
    ElicitationSummary,
    ShiftEstimate,
    effective_n_active,
    extrapolated_power_curve,
    extrapolated_power_pvfn,
)
from .exact import (  # noqa: F401
    binomial_exact_curve,
    binomial_exact_interval,
    exponential_cd,
)
from .pos import conditional_density, conditional_pos, joint_pos, pos  # noqa: F401
from .power import (  # noqa: F401
    PowerCurve,
    PowerPValueFunction,
    TrialDesign,
    delta_wald_power_pvfn,
    mde,
    power_at,
    power_curve,
    power_point_estimate,
    power_pvfn,
    probit_gradients,
)
from .pvfn import (  # noqa: F401
    ConfidenceCurve,
    ConfidenceDensity,
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
from .screening import (  # noqa: F401
    OperatingMatrix,
    confidence_levels,
    normalized_likelihood,
    one_sided_pvalues,
    plugin_sampling,
    posterior,
)
from .simlab import (  # noqa: F401
    DecisionRule,
    SimConfig,
    SimReport,
    coverage_study,
    estimator_sampling,
    operating_characteristics,
    simulate_phase2,
    table1_config,
)
