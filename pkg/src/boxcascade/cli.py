"""Command-line interface.

Subcommands:
  constants        critical exponents and asymptotic constants of a law
  simulate         one occupancy realization: height, saturation, optional
                   per-generation statistics
  martingale-check one-step mean check of the additive martingale
  biggins-check    empirical vs predicted box counts in a mass window
  scan-j           height slopes over a list of fixed thresholds
  scan-alpha       height/saturation slopes over power thresholds n^alpha
  spacings         extreme spacing exponents of uniform order statistics

Law specs: uniform-stick | dirac-half | mix23:alpha=<f> | law075u |
heavytail:samples=<n>,seed=<u64>

Exit codes: 0 success, 2 unsupported regime, 3 expansion budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import cascade, constants as const_mod, experiments as exp_mod
from .errors import BoxCascadeError, BudgetExceededError, UnsupportedRegimeError
from .laws import parse_law_spec


def _add_law(p):
    p.add_argument("--law", required=True,
                   help="uniform-stick | dirac-half | mix23:alpha=<f> | "
                        "law075u | heavytail:samples=<n>,seed=<u64>")


def _add_grid(p):
    p.add_argument("--n-min", type=int, default=1024)
    p.add_argument("--n-max", type=int, default=2 ** 20)
    p.add_argument("--grid-points", type=int, default=8)
    p.add_argument("--replicas", type=int, default=20)
    p.add_argument("--seed", type=int, default=20260808)
    p.add_argument("--mode", choices=["exact", "poisson"], default="exact")
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.add_argument("--format", choices=["csv", "table"], default="csv")
    p.add_argument("--budget", type=int, default=cascade.DEFAULT_BUDGET)
    p.add_argument("--workers", type=int, default=None,
                   help="replica fan-out processes (default: BOXCASCADE_WORKERS or cpu count)")


def _geometric_grid(n_min: int, n_max: int, points: int) -> tuple:
    if points < 4:
        raise ValueError("need at least 4 grid points")
    ratio = (n_max / n_min) ** (1.0 / (points - 1))
    grid = sorted({int(round(n_min * ratio ** i)) for i in range(points)})
    if len(grid) < 4:
        raise ValueError("grid collapsed; widen the n range")
    return tuple(grid)


def _csv_int_list(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


def _csv_float_list(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_constants(args) -> int:
    law = parse_law_spec(args.law)
    profile = law.profile()
    exps = const_mod.critical_exponents(profile)
    hyp2, hyp3 = const_mod.check_hypotheses(profile, exps)
    record = {
        "law": law.name,
        "theta_lower": profile.theta_lower,
        "theta_star_lower": exps.lower,
        "theta_star_upper": exps.upper,
        "c_lower": math.nan,
        "c_upper": math.nan,
        "residual_lower": exps.residual_lower,
        "residual_upper": exps.residual_upper,
        "hyp2": hyp2,
        "hyp3": hyp3,
    }
    named = []
    notes = []
    try:
        cc = const_mod.limit_constants(profile, exps)
        record["c_lower"] = cc.c_lower
        record["c_upper"] = cc.c_upper
        for j in args.j:
            _try_constant(named, notes, f"height_constant[j={j}]",
                          lambda: const_mod.height_constant(cc, profile, ("fixed", j)))
        for a in args.alpha:
            _try_constant(named, notes, f"height_constant[alpha={a:g}]",
                          lambda: const_mod.height_constant(cc, profile, ("power", a)))
        for j in args.j:
            _try_constant(named, notes, f"saturation_constant[j={j}]",
                          lambda: const_mod.saturation_constant(cc, ("fixed", max(1, j))))
        for a in args.alpha:
            _try_constant(named, notes, f"saturation_constant[alpha={a:g}]",
                          lambda: const_mod.saturation_constant(cc, ("power", a)))
    except BoxCascadeError as exc:
        notes.append(str(exc))
    if args.json:
        record["constants"] = dict(named)
        if notes:
            record["notes"] = notes
        json.dump(record, sys.stdout, indent=2, default=str)
        sys.stdout.write("\n")
        return 0
    scalar_cols = ["law", "theta_lower", "theta_star_lower", "theta_star_upper",
                   "c_lower", "c_upper", "residual_lower", "residual_upper",
                   "hyp2", "hyp3"]
    scalars = tuple(record[c] for c in scalar_cols)
    rows = [scalars + (name, value) for name, value in named] or [scalars + ("", "")]
    table = exp_mod.Table(meta={"notes": "; ".join(notes)} if notes else {},
                          columns=scalar_cols + ["name", "value"], rows=rows)
    exp_mod.emit(table, format="table" if args.table else "csv", destination="-")
    return 0


def _try_constant(named, notes, name, fn):
    try:
        named.append((name, fn()))
    except UnsupportedRegimeError as exc:
        notes.append(f"{name}: {exc}")


def cmd_simulate(args) -> int:
    law = parse_law_spec(args.law)
    env = cascade.build_environment(law, args.env_seed)
    occ = cascade.throw_balls(env, args.n, mode=args.mode, ball_seed=args.ball_seed)
    h, g = cascade.height_and_saturation(occ, args.j, budget=args.budget)
    cols = ["n", "j", "mode", "env_seed", "ball_seed", "realized_total", "H", "G"]
    row = [args.n, args.j, args.mode, args.env_seed, args.ball_seed,
           occ.realized_total, h, g]
    if args.stats_upto is not None:
        for k in range(args.stats_upto + 1):
            st = cascade.generation_stats(occ, k, budget=args.budget)
            cols += [f"N{k}", f"M{k}", f"p_min{k}", f"p_max{k}", f"W{k}"]
            row += [st.boxes_with_at_least(args.j), st.boxes_below(args.j),
                    st.p_min, st.p_max, st.martingale(args.w_theta)]
    table = exp_mod.Table(meta={"law": law.name, "w_theta": f"{args.w_theta:g}"},
                          columns=cols, rows=[tuple(row)])
    exp_mod.emit(table, format=args.format, destination=args.out)
    return 0


def cmd_martingale_check(args) -> int:
    law = parse_law_spec(args.law)
    rows = []
    for theta in args.theta:
        res = cascade.martingale_step_check(
            law, theta, args.k, args.replicas, args.env_seed, args.seed)
        rows.append((theta, args.k, res["target"], res["mean"], res["se"], res["z"]))
    table = exp_mod.Table(
        meta={"law": law.name, "replicas": str(args.replicas),
              "env_seed": str(args.env_seed), "seed": str(args.seed)},
        columns=["theta", "k", "target", "mean", "se", "z"], rows=rows)
    exp_mod.emit(table, format=args.format, destination=args.out)
    return 0


def cmd_biggins_check(args) -> int:
    law = parse_law_spec(args.law)
    rows = []
    for rep in range(args.replicas):
        env_seed = exp_mod.replica_seeds(args.seed, 0, rep)[0]
        env = cascade.build_environment(law, env_seed)
        emp, pred = cascade.biggins_check(env, args.k, args.theta, args.a, args.b,
                                          budget=args.budget)
        rows.append((rep, emp, pred, emp / pred if pred else math.nan))
    table = exp_mod.Table(
        meta={"law": law.name, "theta": f"{args.theta:g}", "k": str(args.k),
              "a": f"{args.a:g}", "b": f"{args.b:g}", "seed": str(args.seed),
              "note": "prediction uses the generation-k martingale value in "
                      "place of its limit (gap vanishes in k)"},
        columns=["replica", "empirical", "predicted", "ratio"], rows=rows)
    exp_mod.emit(table, format=args.format, destination=args.out)
    return 0


def cmd_scan_j(args) -> int:
    workers = args.workers if args.workers else exp_mod.default_workers()
    grid = _geometric_grid(args.n_min, args.n_max, args.grid_points)
    estimates = exp_mod.phase_scan(args.law, args.j, grid, args.replicas,
                                   args.seed, mode=args.mode,
                                   budget=args.budget, workers=workers)
    exp_mod.emit(estimates, format=args.format, destination=args.out)
    return 0


def cmd_scan_alpha(args) -> int:
    workers = args.workers if args.workers else exp_mod.default_workers()
    grid = _geometric_grid(args.n_min, args.n_max, args.grid_points)
    estimates = []
    for a in args.alpha:
        cfg = exp_mod.ExperimentConfig(
            law=args.law, target=args.target, threshold=("power", a),
            n_grid=grid, replicas=args.replicas, base_seed=args.seed,
            mode=args.mode, budget=args.budget, workers=workers)
        estimates.append(exp_mod.slope_run(cfg))
    exp_mod.emit(estimates, format=args.format, destination=args.out)
    return 0


def cmd_spacings(args) -> int:
    grid = _geometric_grid(args.n_min, args.n_max, args.grid_points)
    res = exp_mod.spacing_experiment(grid, args.j, args.alpha, args.replicas,
                                     args.seed)
    exp_mod.emit(res, format=args.format, destination=args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="boxcascade", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="critical exponents and constants")
    _add_law(p)
    p.add_argument("--j", type=_csv_int_list, default=[2, 3, 4, 5])
    p.add_argument("--alpha", type=_csv_float_list, default=[])
    group = p.add_mutually_exclusive_group()
    group.add_argument("--json", action="store_true")
    group.add_argument("--csv", action="store_true", help="(default)")
    group.add_argument("--table", action="store_true")
    p.set_defaults(fn=cmd_constants)

    p = sub.add_parser("simulate", help="one occupancy realization")
    _add_law(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--mode", choices=["exact", "poisson"], default="exact")
    p.add_argument("--env-seed", type=int, default=1)
    p.add_argument("--ball-seed", type=int, default=1)
    p.add_argument("--stats-upto", type=int, default=None)
    p.add_argument("--w-theta", type=float, default=2.0)
    p.add_argument("--budget", type=int, default=cascade.DEFAULT_BUDGET)
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=["csv", "table"], default="csv")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("martingale-check", help="one-step martingale mean check")
    _add_law(p)
    p.add_argument("--theta", type=_csv_float_list, default=[0.5, 2.0])
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--replicas", type=int, default=10000)
    p.add_argument("--env-seed", type=int, default=1)
    p.add_argument("--seed", type=int, default=20260808)
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=["csv", "table"], default="csv")
    p.set_defaults(fn=cmd_martingale_check)

    p = sub.add_parser("biggins-check", help="mass-window box count check")
    _add_law(p)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=math.log(2.0))
    p.add_argument("--replicas", type=int, default=200)
    p.add_argument("--seed", type=int, default=20260808)
    p.add_argument("--budget", type=int, default=cascade.DEFAULT_BUDGET)
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=["csv", "table"], default="csv")
    p.set_defaults(fn=cmd_biggins_check)

    p = sub.add_parser("scan-j", help="height slopes over fixed thresholds")
    _add_law(p)
    p.add_argument("--j", type=_csv_int_list, default=[2, 3, 4, 5])
    _add_grid(p)
    p.set_defaults(fn=cmd_scan_j)

    p = sub.add_parser("scan-alpha", help="slopes over power thresholds")
    _add_law(p)
    p.add_argument("--alpha", type=_csv_float_list, default=[0.5])
    p.add_argument("--target", choices=["height", "saturation"], default="height")
    _add_grid(p)
    p.set_defaults(fn=cmd_scan_alpha)

    p = sub.add_parser("spacings", help="uniform order-statistics spacing exponents")
    p.add_argument("--law", default=None,
                   help="accepted for flag uniformity; the spacing experiment "
                        "works on raw order statistics and ignores it")
    p.add_argument("--j", type=int, default=2)
    p.add_argument("--alpha", type=_csv_float_list, default=[0.5])
    _add_grid(p)
    p.set_defaults(fn=cmd_spacings)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except UnsupportedRegimeError as exc:
        print(f"unsupported regime: {exc}", file=sys.stderr)
        return 2
    except BudgetExceededError as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return 3
    except (BoxCascadeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
