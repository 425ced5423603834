"""Command-line frontend.

Subcommands map onto the library modules and emit data files (CSV/JSON), not
rendered plots: cdist (p-value functions), power (power curves, inference on
power, probability of success), combine (meta-analytic combination), simulate
(decision-rule operating characteristics), screen (discrete-status tables),
and oracle (exact reference constructions).

Exit codes: 0 success, 2 usage or validation failure, 3 completed with a
quality warning (e.g. more than 1% of replicates flagged).
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, combine, design, exact, io, power, pvfn, screening, simlab
from .pos import conditional_density, conditional_pos, joint_pos
from .pos import pos as pos_estimate
from .binomial import TwoArmCounts, wald_se
from .errors import CdinferError, SchemaError
from .power import TrialDesign
from .pvfn import ParamGrid

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_QUALITY = 3


def _parse_grid(text: str) -> ParamGrid:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"--grid expects lo:hi:step, got {text!r}"
        )
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--grid parts must be reals: {text!r}")
    return ParamGrid(lo, hi, step)


def _parse_counts(text: str) -> TwoArmCounts:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(
            f"expected x_ctrl,n_ctrl,x_active,n_active, got {text!r}"
        )
    return TwoArmCounts(*(float(p) for p in parts))


def _parse_sweep(text: str) -> tuple[int, int, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"--sweep expects lo:hi:step, got {text!r}")
    lo, hi, step = (int(p) for p in parts)
    if lo <= 0 or hi < lo or step <= 0:
        raise argparse.ArgumentTypeError(f"--sweep bounds invalid: {text!r}")
    return lo, hi, step


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _add_counts_flags(p: argparse.ArgumentParser):
    p.add_argument("--x-ctrl", type=float, required=True, help="control events")
    p.add_argument("--n-ctrl", type=float, required=True, help="control sample size")
    p.add_argument("--x-active", type=float, required=True, help="active events")
    p.add_argument("--n-active", type=float, required=True, help="active sample size")


def _add_design_flags(p: argparse.ArgumentParser):
    p.add_argument("--n-ctrl", type=float, required=True,
                   help="per-arm control sample size")
    p.add_argument("--n-active", type=float, required=True,
                   help="per-arm active sample size")
    p.add_argument("--theta0", type=float, required=True, help="null margin")
    p.add_argument("--alpha", type=float, required=True,
                   help="one-sided significance level")


def cmd_cdist(args) -> int:
    counts = TwoArmCounts(args.x_ctrl, args.n_ctrl, args.x_active, args.n_active)
    grid = args.grid
    out = _outdir(args)
    build = pvfn.upper_pvfn_lrt if args.test == "lrt" else pvfn.upper_pvfn_wald
    H = build(counts, grid)
    io.write_pvfn(out / f"{args.prefix}_H.csv", H)
    curve = pvfn.confidence_curve(H)
    io.write_curve_csv(
        out / f"{args.prefix}_C.csv", grid.thetas, curve.values, "confidence-curve",
        {"source": H.source, "point_estimate": io.fmt(curve.point_estimate)},
        "theta,value",
    )
    dens = pvfn.confidence_density(H)
    io.write_curve_csv(
        out / f"{args.prefix}_h.csv", grid.thetas, dens.values, "confidence-density",
        {"source": H.source, "mass": io.fmt(dens.mass)},
        "theta,value",
    )
    if args.compare_tests:
        other = pvfn.upper_pvfn_wald(counts, grid) if args.test == "lrt" \
            else pvfn.upper_pvfn_lrt(counts, grid)
        diff = np.abs(H.values - other.values)
        io.write_curve_csv(
            out / f"{args.prefix}_test_diff.csv", grid.thetas, diff, "test-diff",
            {"sup_norm": io.fmt(float(diff.max())), "tests": "lrt vs wald"},
            "theta,abs_diff",
        )
    print(f"wrote {args.prefix}_H.csv, {args.prefix}_C.csv, {args.prefix}_h.csv in {out}")
    return EXIT_OK


def cmd_power(args) -> int:
    grid = args.grid
    d3 = TrialDesign(args.n_ctrl, args.n_active, args.theta0, args.alpha)
    out = _outdir(args)
    pc3 = power.power_curve(d3, args.ctrl_rate, grid)
    meta3 = {
        "design": f"n_ctrl={d3.n_ctrl:g} n_active={d3.n_active:g} "
                  f"theta0={d3.theta0:g} alpha={d3.alpha:g}",
        "ctrl_rate": io.fmt(args.ctrl_rate),
        "mde": io.fmt(pc3.mde),
    }
    io.write_curve_csv(out / "power_curve.csv", grid.thetas, pc3.values,
                       "power-curve", meta3, "theta,power")
    scalars: dict = {"mde": pc3.mde, "alpha_anchor": pc3.value_at(d3.theta0)}

    pc2 = None
    if args.phase2_n_ctrl is not None:
        d2 = TrialDesign(args.phase2_n_ctrl, args.phase2_n_active,
                         args.phase2_theta0, args.phase2_alpha)
        pc2 = power.power_curve(d2, args.ctrl_rate, grid)
        io.write_curve_csv(
            out / "power_curve_phase2.csv", grid.thetas, pc2.values, "power-curve",
            {"design": f"n_ctrl={d2.n_ctrl:g} n_active={d2.n_active:g} "
                       f"theta0={d2.theta0:g} alpha={d2.alpha:g}",
             "ctrl_rate": io.fmt(args.ctrl_rate), "mde": io.fmt(pc2.mde)},
            "theta,power")
        io.write_curve_csv(
            out / "power_curve_joint.csv", grid.thetas, pc2.values * pc3.values,
            "power-curve", {"design": "product of phase2 and phase3 curves"},
            "theta,power")
        scalars["mde_phase2"] = pc2.mde

    H = None
    if args.h_input:
        H = io.read_pvfn(args.h_input)
        H.grid.require_same(grid)
        ppv = power.power_pvfn(H, pc3)
        io.write_power_pvfn(out / "power_pvfn.csv", ppv)
        scalars["power_mle"] = power.power_point_estimate(pc3, H.median)
        scalars["power_pos"] = pos_estimate(H, pc3)
        if pc2 is not None:
            scalars["power_mle_phase2"] = power.power_point_estimate(pc2, H.median)
            scalars["power_pos_phase2"] = pos_estimate(H, pc2)
            scalars["joint_pos"] = joint_pos(H, pc2, pc3)

    if args.external_counts is not None:
        ppv_delta = power.delta_wald_power_pvfn(args.external_counts, d3)
        io.write_power_pvfn(out / "power_pvfn_delta.csv", ppv_delta)
        scalars["delta_beta_hat"] = ppv_delta.beta_hat
        scalars["delta_interval_80"] = list(power.delta_interval(ppv_delta, 0.80))

    if args.given_phase2_success:
        if pc2 is None:
            print("cdinfer power: --given-phase2-success requires the "
                  "--phase2-* design flags", file=sys.stderr)
            return EXIT_USAGE
        effect = args.phase2_effect if args.phase2_effect is not None else pc2.mde
        succ_counts = TwoArmCounts(
            args.ctrl_rate * pc2.design.n_ctrl, pc2.design.n_ctrl,
            (args.ctrl_rate + effect) * pc2.design.n_active, pc2.design.n_active,
        )
        H2s = pvfn.upper_pvfn_lrt(succ_counts, grid)
        io.write_pvfn(out / "phase2_success_H.csv", H2s)
        ppv_cond = power.power_pvfn(H2s, pc3)
        io.write_power_pvfn(out / "phase3_power_given_phase2.csv", ppv_cond)
        h_cond = conditional_density(H, pc2) if H is not None else None
        scalars["conditional"] = {
            "phase2_effect": effect,
            "mle": power.power_point_estimate(pc3, effect),
            "pos": pos_estimate(H2s, pc3),
            "pvalue_beta3_le_half": ppv_cond.value_at(0.5),
        }
        if h_cond is not None:
            io.write_curve_csv(out / "conditional_density.csv", grid.thetas,
                               h_cond.values, "confidence-density",
                               {"source": "pre-posterior"}, "theta,value")
            scalars["conditional"]["pos_preposterior"] = conditional_pos(h_cond, pc3)

    if args.sweep is not None:
        if H is None:
            print("cdinfer power: --sweep requires --h-input for the inference "
                  "source", file=sys.stderr)
            return EXIT_USAGE
        lo, hi, step = args.sweep
        rows = []
        theta_hat = H.median
        for n in range(lo, hi + 1, step):
            dn = TrialDesign(n, n, args.theta0, args.alpha)
            pcn = power.power_curve(dn, args.ctrl_rate, grid)
            ppv_n = power.power_pvfn(H, pcn)
            est = power.power_point_estimate(pcn, theta_hat)
            lo80, hi80 = ppv_n.interval(0.80)
            rows.append((n, est, lo80, hi80))
        lines = [f"{io.MAGIC} power-sweep", "# columns: per-arm n, power at the "
                 "inference median, two-sided 80% limits", "n,estimate,lo80,hi80"]
        for n, est, lo80, hi80 in rows:
            lines.append(f"{n},{io.fmt(est)},{io.fmt(lo80)},{io.fmt(hi80)}")
        (out / "power_sweep.csv").write_text("\n".join(lines) + "\n")

    (out / "power_scalars.json").write_text(
        json.dumps({"version": __version__, **scalars}, sort_keys=True, indent=2)
        + "\n"
    )
    print(f"wrote power outputs in {out}")
    return EXIT_OK


def cmd_combine(args) -> int:
    a = io.read_pvfn(args.a)
    b = io.read_pvfn(args.b)
    out = _outdir(args)
    if args.op == "convolve":
        se_a = args.se_a if args.se_a is not None else (
            wald_se(args.counts_a) if args.counts_a else None)
        se_b = args.se_b if args.se_b is not None else (
            wald_se(args.counts_b) if args.counts_b else None)
        if se_a is None or se_b is None:
            print("cdinfer combine: convolve needs --se-a/--se-b or "
                  "--counts-a/--counts-b", file=sys.stderr)
            return EXIT_USAGE
        result = combine.convolve(
            combine.WeightedPvfn(a, se_a), combine.WeightedPvfn(b, se_b)
        )
    elif args.op == "multiply":
        result = combine.multiply(a, b)
    else:
        if args.complement:
            a, b = pvfn.lower_pvfn(a), pvfn.lower_pvfn(b)
        result = combine.or_combine(a, b)
    io.write_pvfn(out / f"combined_{args.op}.csv", result)
    if result.tail == "upper":
        curve = pvfn.confidence_curve(result)
        io.write_curve_csv(out / f"combined_{args.op}_C.csv", result.grid.thetas,
                           curve.values, "confidence-curve",
                           {"source": result.source,
                            "point_estimate": io.fmt(curve.point_estimate)},
                           "theta,value")
    print(f"wrote combined_{args.op}.csv in {out}")
    return EXIT_OK


def _config_from_file(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read scenario config {path}: {exc}") from None


def _sim_config(args, true_theta: float | None = None) -> simlab.SimConfig:
    base: dict = {}
    if args.config:
        base = _config_from_file(args.config)
    theta = true_theta if true_theta is not None else (
        args.theta if args.theta is not None else base.get("true_theta"))
    if theta is None:
        raise SchemaError("true theta missing: pass --theta, --table1, or a config")
    grid_spec = base.get("grid")
    grid = (ParamGrid(grid_spec["lo"], grid_spec["hi"], grid_spec["step"])
            if grid_spec else simlab.SIM_GRID)
    if args.grid is not None:
        grid = args.grid

    def design_of(section: str, default: TrialDesign) -> TrialDesign:
        spec = base.get(section)
        if spec is None:
            return default
        return TrialDesign(spec["n_ctrl"], spec["n_active"],
                           spec["theta0"], spec["alpha"])

    return simlab.SimConfig(
        true_theta=theta,
        true_ctrl_rate=args.ctrl_rate if args.ctrl_rate is not None
        else base.get("true_ctrl_rate", 0.43),
        phase2=design_of("phase2", TrialDesign(90, 90, -0.05, 0.20)),
        phase3=design_of("phase3", TrialDesign(365, 365, -0.12, 0.025)),
        reps=args.reps if args.reps is not None else base.get("reps", 10000),
        seed=args.seed if args.seed is not None else base.get("seed"),
        grid=grid,
    )


def cmd_simulate(args) -> int:
    if args.seed is None and not args.config:
        print("cdinfer simulate: --seed is required", file=sys.stderr)
        return EXIT_USAGE
    out = _outdir(args)
    thetas = list(simlab.TABLE1_SCENARIOS) if args.table1 else [None]
    worst_flag_fraction = 0.0
    summaries = []
    for theta in thetas:
        cfg = _sim_config(args, true_theta=theta)
        if cfg.seed is None:
            print("cdinfer simulate: --seed is required", file=sys.stderr)
            return EXIT_USAGE
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            report = simlab.operating_characteristics(
                cfg, simlab.TABLE1_RULES, workers=args.workers
            )
        tag = f"theta_{cfg.true_theta:+.4g}".replace("+", "p").replace("-", "m")
        io.write_sim_report(out / f"simreport_{tag}.json", report)
        summaries.append(report.to_dict())
        worst_flag_fraction = max(worst_flag_fraction, report.n_flagged / cfg.reps)
        if args.samples:
            samples = np.column_stack([
                report.samples_beta_mle,
                report.samples_beta_pos,
                report.samples_probit_mle,
            ])
            lines = [f"{io.MAGIC} estimator-samples", "beta_mle,beta_pos,probit_mle"]
            lines += [",".join(io.fmt(v) for v in row) for row in samples]
            (out / f"samples_{tag}.csv").write_text("\n".join(lines) + "\n")
    (out / "simreports.json").write_text(
        json.dumps(summaries, sort_keys=True, indent=2) + "\n"
    )
    print(f"wrote {len(summaries)} simulation report(s) in {out}")
    if worst_flag_fraction > 0.01:
        print(
            f"warning: {100 * worst_flag_fraction:.2f}% of replicates flagged",
            file=sys.stderr,
        )
        return EXIT_QUALITY
    return EXIT_OK


def cmd_screen(args) -> int:
    statuses, results, probs = io.read_matrix_csv(args.matrix)
    m = screening.OperatingMatrix(statuses, results, probs)
    out = _outdir(args)
    try:
        weights = [float(w) for w in args.prior.split(":")]
    except ValueError:
        print(f"cdinfer screen: malformed --prior {args.prior!r}", file=sys.stderr)
        return EXIT_USAGE

    io.write_table_csv(out / "operating_characteristics.csv", m.results,
                       m.statuses, m.probs, "screen-operating", corner="result")
    pvals = screening.one_sided_pvalues(m)
    cells = [[pvals[(r, s)].display for s in m.statuses] for r in m.results]
    io.write_table_csv(out / "one_sided_pvalues.csv", m.results, m.statuses,
                       cells, "screen-pvalues", corner="result")
    levels = screening.confidence_levels(m)
    level_cells = []
    for i, r in enumerate(m.results):
        row = []
        for j, s in enumerate(m.statuses):
            if i == j:
                row.append(f"{levels[r][1]:.2f}")
            else:
                row.append(f"{pvals[(r, s)].single():.2f}")
        level_cells.append(row)
    io.write_table_csv(out / "confidence_levels.csv", m.results, m.statuses,
                       level_cells, "screen-confidence", corner="result")
    io.write_table_csv(out / "posterior.csv", m.results, m.statuses,
                       screening.posterior(m, weights), "screen-posterior",
                       {"prior": args.prior}, corner="result")
    io.write_table_csv(out / "normalized_likelihood.csv", m.results, m.statuses,
                       screening.normalized_likelihood(m), "screen-likelihood",
                       corner="result")
    io.write_table_csv(out / "plugin_sampling.csv", m.results, m.statuses,
                       screening.plugin_sampling(m), "screen-plugin",
                       corner="result")
    print(f"wrote 5 screening tables in {out}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    out = _outdir(args)
    if args.kind == "exponential":
        H = exact.exponential_cd(args.xbar, args.n, args.grid)
        io.write_pvfn(out / "exponential_H.csv", H)
        dens = pvfn.confidence_density(H)
        io.write_curve_csv(out / "exponential_h.csv", args.grid.thetas, dens.values,
                           "confidence-density", {"source": H.source}, "theta,value")
    else:
        curve = exact.binomial_exact_curve(args.x, args.n, args.grid)
        io.write_curve_csv(out / "binomial_C.csv", args.grid.thetas, curve.values,
                           "confidence-curve",
                           {"point_estimate": io.fmt(curve.point_estimate)},
                           "theta,value")
        lo, hi = exact.binomial_exact_interval(args.x, args.n, args.level)
        (out / "binomial_interval.json").write_text(json.dumps(
            {"x": args.x, "n": args.n, "level": args.level,
             "lower": lo, "upper": hi}, sort_keys=True, indent=2) + "\n")
    print(f"wrote oracle outputs in {out}")
    return EXIT_OK


# Accept values like "-0.21:0.247:0.0005" after --grid: anything starting
# with a minus and a digit (or decimal point) is a value, not an option.
_NEGATIVE_VALUE = re.compile(r"^-\.?\d")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cdinfer",
        description="P-value functions, inference on power, probability of "
                    "success, and Go/No-Go simulation for two-arm binomial "
                    "trials.",
    )
    ap.add_argument("--version", action="version", version=f"cdinfer {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cdist", help="p-value function, confidence curve, density")
    _add_counts_flags(p)
    p.add_argument("--test", choices=("lrt", "wald"), default="lrt")
    p.add_argument("--grid", type=_parse_grid, default=ParamGrid.default())
    p.add_argument("--compare-tests", action="store_true",
                   help="also write the lrt-vs-wald absolute difference")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--prefix", default="cdist")
    p.set_defaults(func=cmd_cdist)

    p = sub.add_parser("power", help="power curves and inference on power")
    _add_design_flags(p)
    p.add_argument("--ctrl-rate", type=float, required=True,
                   help="plugged-in control response rate")
    p.add_argument("--grid", type=_parse_grid, default=ParamGrid.default())
    p.add_argument("--h-input", help="p-value function CSV for the effect")
    p.add_argument("--external-counts", type=_parse_counts,
                   help="x_ctrl,n_ctrl,x_active,n_active for the delta route")
    p.add_argument("--phase2-n-ctrl", type=float, dest="phase2_n_ctrl")
    p.add_argument("--phase2-n-active", type=float, dest="phase2_n_active")
    p.add_argument("--phase2-theta0", type=float, dest="phase2_theta0")
    p.add_argument("--phase2-alpha", type=float, dest="phase2_alpha")
    p.add_argument("--phase2-effect", type=float, dest="phase2_effect",
                   help="observed phase-2 effect defining minimum success "
                        "(default: the phase-2 minimum detectable effect)")
    p.add_argument("--given-phase2-success", action="store_true",
                   help="inference on later-phase power conditional on "
                        "minimal success in phase 2")
    p.add_argument("--sweep", type=_parse_sweep,
                   help="per-arm n sweep lo:hi:step (needs --h-input)")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("combine", help="combine two p-value functions")
    p.add_argument("--a", required=True, help="first pvfn CSV")
    p.add_argument("--b", required=True, help="second pvfn CSV")
    p.add_argument("--op", choices=("convolve", "multiply", "or"), required=True)
    p.add_argument("--se-a", type=float, help="standard error weight for --a")
    p.add_argument("--se-b", type=float, help="standard error weight for --b")
    p.add_argument("--counts-a", type=_parse_counts,
                   help="counts to derive --se-a from")
    p.add_argument("--counts-b", type=_parse_counts)
    p.add_argument("--complement", action="store_true",
                   help="complement upper-tail inputs before the or-combination")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_combine)

    p = sub.add_parser("simulate", help="decision-rule operating characteristics")
    p.add_argument("--table1", action="store_true",
                   help="run the three preset scenarios")
    p.add_argument("--theta", type=float, help="true effect (single scenario)")
    p.add_argument("--ctrl-rate", type=float, help="true control rate")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--grid", type=_parse_grid)
    p.add_argument("--config", help="scenario config JSON (flags override)")
    p.add_argument("--workers", type=int,
                   help=f"worker processes (default ${simlab.WORKERS_ENV} or 1)")
    p.add_argument("--samples", action="store_true",
                   help="also dump raw estimator samples")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("screen", help="discrete-status screening tables")
    p.add_argument("--matrix", required=True, help="operating matrix CSV")
    p.add_argument("--prior", default="1:1:1", help="prior weights a:b:c")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("oracle", help="exact reference constructions")
    p.add_argument("--kind", choices=("exponential", "binomial"), required=True)
    p.add_argument("--xbar", type=float, help="exponential sample mean")
    p.add_argument("--n", type=int, required=True, help="sample size")
    p.add_argument("--x", type=int, help="binomial event count")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--grid", type=_parse_grid, required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_oracle)

    ap._negative_number_matcher = _NEGATIVE_VALUE
    for action in ap._subparsers._group_actions:
        for child in getattr(action, "choices", {}).values():
            child._negative_number_matcher = _NEGATIVE_VALUE
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except (argparse.ArgumentTypeError, CdinferError) as exc:
        print(f"cdinfer: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except CdinferError as exc:
        print(f"cdinfer {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
