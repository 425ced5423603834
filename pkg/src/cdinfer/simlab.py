"""Monte Carlo evaluation of Go/No-Go decision rules.

Each replicate simulates a phase-2 dataset, builds the p-value function for
the effect, estimates the phase-3 power curve with the replicate's control
rate plugged in, and evaluates every decision rule plus two-sided power
intervals by both the change-of-variables route and the probit delta route.
Replicates are indexed into independent counter-based RNG streams, so reports
are bit-identical across worker counts and runs.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from . import power as power_mod
from . import pvfn as pvfn_mod
from .pos import pos as pos_estimate
from .binomial import TwoArmCounts
from .errors import CdinferError, DomainError, TruncationWarning
from .power import PowerCurve, TrialDesign
from .pvfn import ParamGrid

__all__ = [
    "DecisionRule",
    "SimConfig",
    "SimReport",
    "simulate_phase2",
    "evaluate_replicate",
    "operating_characteristics",
    "coverage_study",
    "estimator_sampling",
    "table1_config",
    "TABLE1_RULES",
    "TABLE1_SCENARIOS",
]

GENERATOR_ID = "numpy.random.Philox/SeedSequence(seed, spawn_key=(replicate,))"
RATE_CLAMP = 1e-6
WORKERS_ENV = "CDINFER_WORKERS"

# Simulation default grid: wide enough that the replicate p-value functions
# keep essentially all of their mass on-grid in every scenario.
SIM_GRID = ParamGrid(-0.6, 0.6, 5e-4)

COVERAGE_LEVEL = 0.60


@dataclass(frozen=True)
class DecisionRule:
    """Go/No-Go rule: threshold on an estimate of power, or a one-sided
    confidence test of power against beta0."""

    kind: str
    threshold: float | None = None
    beta0: float | None = None
    level: float | None = None

    def __post_init__(self):
        if self.kind in ("pos_threshold", "mle_threshold"):
            if self.threshold is None or not 0 < self.threshold < 1:
                raise DomainError(f"{self.kind} needs a threshold in (0, 1)")
        elif self.kind == "confidence_test":
            if self.beta0 is None or not 0 < self.beta0 < 1:
                raise DomainError("confidence_test needs beta0 in (0, 1)")
            if self.level is None or not 0 < self.level < 1:
                raise DomainError("confidence_test needs a level in (0, 1)")
        else:
            raise DomainError(f"unknown rule kind {self.kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "pos_threshold":
            return f"PoS>={self.threshold:g}"
        if self.kind == "mle_threshold":
            return f"MLE>={self.threshold:g}"
        return f"{100 * self.level:g}% Conf beta3>{self.beta0:g}"

    def to_dict(self) -> dict:
        out = {"label": self.label, "kind": self.kind}
        if self.threshold is not None:
            out["threshold"] = self.threshold
        if self.beta0 is not None:
            out["beta0"] = self.beta0
            out["level"] = self.level
        return out


TABLE1_RULES = (
    DecisionRule("pos_threshold", threshold=0.60),
    DecisionRule("pos_threshold", threshold=0.75),
    DecisionRule("pos_threshold", threshold=0.80),
    DecisionRule("mle_threshold", threshold=0.80),
    DecisionRule("confidence_test", beta0=0.50, level=0.80),
)

TABLE1_SCENARIOS = (-0.12, -0.05, 0.0)


@dataclass(frozen=True)
class SimConfig:
    """One simulation scenario: the truth, both designs, and the run setup."""

    true_theta: float
    true_ctrl_rate: float
    phase2: TrialDesign
    phase3: TrialDesign
    reps: int
    seed: int
    grid: ParamGrid = SIM_GRID

    def __post_init__(self):
        if not 0 < self.true_ctrl_rate < 1:
            raise DomainError("true control rate must lie in (0, 1)")
        pa = self.true_ctrl_rate + self.true_theta
        if not 0 < pa < 1:
            raise DomainError(f"true active rate {pa} outside (0, 1)")
        if self.reps < 1:
            raise DomainError("reps must be >= 1")
        if self.seed < 0:
            raise DomainError("seed must be a nonnegative integer")
        for n in (self.phase2.n_ctrl, self.phase2.n_active):
            if abs(n - round(n)) > 1e-9:
                raise DomainError("simulated phase-2 sample sizes must be integers")

    def to_dict(self) -> dict:
        return {
            "true_theta": self.true_theta,
            "true_ctrl_rate": self.true_ctrl_rate,
            "phase2": vars(self.phase2).copy(),
            "phase3": vars(self.phase3).copy(),
            "reps": self.reps,
            "seed": self.seed,
            "grid": {"lo": self.grid.lo, "hi": self.grid.hi, "step": self.grid.step},
        }


def table1_config(true_theta: float, reps: int, seed: int) -> SimConfig:
    """Scenario preset: N=90/arm phase 2 feeding an N=365/arm phase 3."""
    return SimConfig(
        true_theta=true_theta,
        true_ctrl_rate=0.43,
        phase2=TrialDesign(90, 90, theta0=-0.05, alpha=0.20),
        phase3=TrialDesign(365, 365, theta0=-0.12, alpha=0.025),
        reps=reps,
        seed=seed,
    )


@dataclass
class ReplicateRecord:
    index: int
    x_ctrl: float = np.nan
    x_active: float = np.nan
    theta_hat: float = np.nan
    beta_mle: float = np.nan
    beta_pos: float = np.nan
    probit_mle: float = np.nan
    p_beta0: float = np.nan
    push_interval: tuple[float, float] = (np.nan, np.nan)
    delta_interval: tuple[float, float] = (np.nan, np.nan)
    go: tuple[bool, ...] = ()
    flags: tuple[str, ...] = ()


@dataclass
class SimReport:
    """Aggregate of one scenario run; serializes to a stable JSON document."""

    config: SimConfig
    rules: tuple[DecisionRule, ...]
    go_rates: tuple[float, ...]
    go_mc_se: tuple[float, ...]
    coverage_pushforward: float
    coverage_delta: float
    coverage_mc_se: float
    true_power: float
    n_flagged: int
    samples_beta_mle: np.ndarray = field(repr=False)
    samples_beta_pos: np.ndarray = field(repr=False)
    samples_probit_mle: np.ndarray = field(repr=False)
    environment: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scenario": self.config.to_dict(),
            "rules": [
                {**rule.to_dict(), "go_rate": rate, "mc_se": se}
                for rule, rate, se in zip(self.rules, self.go_rates, self.go_mc_se)
            ],
            "coverage": {
                "level": COVERAGE_LEVEL,
                "pushforward": self.coverage_pushforward,
                "delta": self.coverage_delta,
                "mc_se": self.coverage_mc_se,
            },
            "true_power": self.true_power,
            "n_flagged": self.n_flagged,
            "reps": self.config.reps,
            "seed": self.config.seed,
            "generator_id": GENERATOR_ID,
            "environment": self.environment,
        }


def simulate_phase2(cfg: SimConfig, replicate_index: int) -> TwoArmCounts:
    """Independent binomial draws for the two arms, deterministic in
    (seed, replicate_index) via a spawned counter-based stream."""
    if not 0 <= replicate_index < cfg.reps:
        raise DomainError(f"replicate index {replicate_index} outside [0, {cfg.reps})")
    ss = np.random.SeedSequence(cfg.seed, spawn_key=(replicate_index,))
    rng = np.random.Generator(np.random.Philox(ss))
    n2c = int(round(cfg.phase2.n_ctrl))
    n2a = int(round(cfg.phase2.n_active))
    x_ctrl = int(rng.binomial(n2c, cfg.true_ctrl_rate))
    x_active = int(rng.binomial(n2a, cfg.true_ctrl_rate + cfg.true_theta))
    return TwoArmCounts(x_ctrl, n2c, x_active, n2a)


def _clamp_boundary(counts: TwoArmCounts) -> tuple[TwoArmCounts, tuple[str, ...]]:
    """Pull boundary rate estimates into [RATE_CLAMP, 1-RATE_CLAMP] so the
    replicate stays evaluable; the adjustment is flagged."""
    flags = []
    xc, xa = counts.x_ctrl, counts.x_active
    lo_c, hi_c = RATE_CLAMP * counts.n_ctrl, (1 - RATE_CLAMP) * counts.n_ctrl
    lo_a, hi_a = RATE_CLAMP * counts.n_active, (1 - RATE_CLAMP) * counts.n_active
    if not lo_c <= xc <= hi_c:
        xc = min(max(xc, lo_c), hi_c)
        flags.append("ctrl-rate-clamped")
    if not lo_a <= xa <= hi_a:
        xa = min(max(xa, lo_a), hi_a)
        flags.append("active-rate-clamped")
    if flags:
        counts = TwoArmCounts(xc, counts.n_ctrl, xa, counts.n_active)
    return counts, tuple(flags)


class _ScenarioCache:
    """Per-worker cache of phase-3 power curves keyed by the plugged rate."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.curves: dict[float, PowerCurve] = {}

    def phase3_curve(self, ctrl_rate: float) -> PowerCurve:
        pc = self.curves.get(ctrl_rate)
        if pc is None:
            pc = power_mod.power_curve(self.cfg.phase3, ctrl_rate, self.cfg.grid)
            self.curves[ctrl_rate] = pc
        return pc


def evaluate_replicate(
    counts: TwoArmCounts,
    cfg: SimConfig,
    rules: tuple[DecisionRule, ...],
    cache: _ScenarioCache | None = None,
    index: int = -1,
) -> ReplicateRecord:
    """All per-replicate estimates, intervals, and rule decisions.

    Errors raised by the statistical machinery flag the replicate instead of
    aborting the run; flagged replicates count as No-Go for every rule and
    drop out of the estimator samples and coverage denominators.
    """
    if cache is None:
        cache = _ScenarioCache(cfg)
    rec = ReplicateRecord(index=index, go=tuple(False for _ in rules))
    try:
        counts, flags = _clamp_boundary(counts)
        rec.x_ctrl, rec.x_active = counts.x_ctrl, counts.x_active
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            H = pvfn_mod.upper_pvfn_lrt(counts, cfg.grid)
            pc3 = cache.phase3_curve(counts.p_ctrl_hat)
            theta_hat = counts.theta_hat
            beta_mle = power_mod.power_point_estimate(pc3, theta_hat)
            beta_pos = pos_estimate(H, pc3)
            H_power = power_mod.power_pvfn(H, pc3)
            push_lo = H_power.quantile((1 - COVERAGE_LEVEL) / 2)
            push_hi = H_power.quantile(1 - (1 - COVERAGE_LEVEL) / 2)
            beta_clamped = float(np.clip(beta_mle, RATE_CLAMP, 1 - RATE_CLAMP))
            d_theta, d_rate = power_mod.probit_gradients(
                cfg.phase3, counts.p_ctrl_hat, theta_hat
            )
            pc_hat, pa_hat = counts.p_ctrl_hat, counts.p_active_hat
            var_theta = (
                pc_hat * (1 - pc_hat) / counts.n_ctrl
                + pa_hat * (1 - pa_hat) / counts.n_active
            )
            var_pc = pc_hat * (1 - pc_hat) / counts.n_ctrl
            se2 = (
                d_theta**2 * var_theta
                + d_rate**2 * var_pc
                - 2 * d_theta * d_rate * var_pc
            )
            se = float(np.sqrt(max(se2, 0.0)))
            z = float(ndtri(1 - (1 - COVERAGE_LEVEL) / 2))
            g0 = float(ndtri(beta_clamped))
            from scipy.special import ndtr

            delta_lo = float(ndtr(g0 - z * se))
            delta_hi = float(ndtr(g0 + z * se))
        go = []
        for rule in rules:
            if rule.kind == "pos_threshold":
                go.append(beta_pos >= rule.threshold)
            elif rule.kind == "mle_threshold":
                go.append(beta_mle >= rule.threshold)
            else:
                p = H_power.value_at(rule.beta0)
                go.append(p <= 1 - rule.level)
        rec.theta_hat = theta_hat
        rec.beta_mle = float(beta_mle)
        rec.beta_pos = float(beta_pos)
        rec.probit_mle = float(ndtri(beta_clamped))
        rec.p_beta0 = float(H_power.value_at(0.5))
        rec.push_interval = (float(push_lo), float(push_hi))
        rec.delta_interval = (delta_lo, delta_hi)
        rec.go = tuple(bool(g) for g in go)
        rec.flags = flags
    except CdinferError as exc:
        rec.flags = rec.flags + (f"error:{type(exc).__name__}:{exc}",)
    return rec


def _run_chunk(args) -> list[ReplicateRecord]:
    cfg, rules, lo, hi = args
    cache = _ScenarioCache(cfg)
    out = []
    for i in range(lo, hi):
        counts = simulate_phase2(cfg, i)
        out.append(evaluate_replicate(counts, cfg, rules, cache, index=i))
    return out


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    return max(1, workers)


def _run_replicates(
    cfg: SimConfig, rules: tuple[DecisionRule, ...], workers: int | None
) -> list[ReplicateRecord]:
    workers = _resolve_workers(workers)
    if workers == 1:
        return _run_chunk((cfg, rules, 0, cfg.reps))
    chunk = max(1, -(-cfg.reps // (workers * 4)))
    spans = [
        (cfg, rules, lo, min(lo + chunk, cfg.reps))
        for lo in range(0, cfg.reps, chunk)
    ]
    records: list[ReplicateRecord] = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_run_chunk, spans):
            records.extend(part)
    return records


def true_phase3_power(cfg: SimConfig) -> float:
    """The estimand: the power-curve approximation evaluated at the truth."""
    return power_mod.power_at(cfg.phase3, cfg.true_ctrl_rate, cfg.true_theta)


def _is_flagged(rec: ReplicateRecord) -> bool:
    return any(f.startswith("error:") for f in rec.flags)


def operating_characteristics(
    cfg: SimConfig,
    rules: tuple[DecisionRule, ...] = TABLE1_RULES,
    workers: int | None = None,
) -> SimReport:
    """Go rates, coverage, and estimator samples over the configured replicates."""
    from .io import report_environment

    records = _run_replicates(cfg, rules, workers)
    reps = cfg.reps
    n_flagged = sum(_is_flagged(r) for r in records)
    if n_flagged > 0.01 * reps:
        warnings.warn(
            f"{n_flagged} of {reps} replicates flagged (> 1%); "
            "go rates treat them as No-Go",
            UserWarning,
            stacklevel=2,
        )
    go_matrix = np.array([r.go for r in records], dtype=bool)
    go_rates = go_matrix.mean(axis=0)
    go_se = np.sqrt(go_rates * (1 - go_rates) / reps)

    ok = [r for r in records if not _is_flagged(r)]
    truth = true_phase3_power(cfg)
    n_ok = len(ok)
    if n_ok:
        cover_push = float(
            np.mean([r.push_interval[0] <= truth <= r.push_interval[1] for r in ok])
        )
        cover_delta = float(
            np.mean([r.delta_interval[0] <= truth <= r.delta_interval[1] for r in ok])
        )
        cov_se = float(np.sqrt(0.25 / n_ok))
    else:
        cover_push = cover_delta = 0.0
        cov_se = float("nan")
    return SimReport(
        config=cfg,
        rules=tuple(rules),
        go_rates=tuple(float(r) for r in go_rates),
        go_mc_se=tuple(float(s) for s in go_se),
        coverage_pushforward=cover_push,
        coverage_delta=cover_delta,
        coverage_mc_se=cov_se,
        true_power=float(truth),
        n_flagged=n_flagged,
        samples_beta_mle=np.array([r.beta_mle for r in ok]),
        samples_beta_pos=np.array([r.beta_pos for r in ok]),
        samples_probit_mle=np.array([r.probit_mle for r in ok]),
        environment=report_environment(),
    )


def coverage_study(cfg: SimConfig, workers: int | None = None) -> dict:
    """Two-sided 60% power-interval coverage by both routes."""
    report = operating_characteristics(cfg, TABLE1_RULES, workers)
    return {
        "true_power": report.true_power,
        "level": COVERAGE_LEVEL,
        "pushforward": report.coverage_pushforward,
        "delta": report.coverage_delta,
        "mc_se": report.coverage_mc_se,
        "n_flagged": report.n_flagged,
    }


def estimator_sampling(cfg: SimConfig, workers: int | None = None) -> dict:
    """Raw estimator samples with binned summaries for plotting."""
    report = operating_characteristics(cfg, TABLE1_RULES, workers)
    bins = np.linspace(0.0, 1.0, 51)
    zbins = np.linspace(-5.0, 5.0, 51)
    return {
        "true_power": report.true_power,
        "beta_mle": report.samples_beta_mle,
        "beta_pos": report.samples_beta_pos,
        "probit_mle": report.samples_probit_mle,
        "hist_beta_mle": np.histogram(report.samples_beta_mle, bins=bins),
        "hist_beta_pos": np.histogram(report.samples_beta_pos, bins=bins),
        "hist_probit_mle": np.histogram(
            report.samples_probit_mle[np.isfinite(report.samples_probit_mle)],
            bins=zbins,
        ),
    }
