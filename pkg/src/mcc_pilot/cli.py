"""``mcc-pilot`` command line."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .bundle import load_bundle, save_bundle, to_bundle
from .channel import SimConfig, build_dictionaries, channel_at, observe, sample_channel
from .geometry import enumerate_modular_lines
from .harness import (
    PATTERN_NAMES,
    SWEEP_KINDS,
    SweepSpec,
    compare_patterns,
    design_pattern,
    pattern_metrics,
    report_csv,
    run_sweep,
    sweep_csv,
)
from .lpformat import export_lp
from .patterns import read_pattern, write_pattern
from .recovery import RecoveryConfig, nmse, recover
from .rng import make_rng
from .solver import GAP, INFEASIBLE, OPTIMAL, TIMEOUT, SolverConfig, check_result, solve_mcc, tighten_budget

EXIT_CODES = {OPTIMAL: 0, GAP: 3, INFEASIBLE: 4, TIMEOUT: 5}

log = logging.getLogger("mcc_pilot")


def _sim_args(p):
    g = p.add_argument_group("channel model")
    g.add_argument("--k", type=int, default=17, help="period / number of subbands (default 17)")
    g.add_argument("--M", type=int, default=24, help="subcarriers per subband (default 24)")
    g.add_argument("--n-tau", type=int, default=64, help="delay grid size (default 64)")
    g.add_argument("--n-nu", type=int, default=16, help="Doppler grid size (default 16)")
    g.add_argument("--paths", type=int, default=6, help="number of on-grid paths S (default 6)")
    g.add_argument("--max-doppler", type=float, default=0.02, help="cycles per slot at interval 1")
    g.add_argument("--interval", type=float, default=1.0, help="pilot interval multiplier")
    g.add_argument("--pdp-decay", type=float, default=0.1, help="exponential PDP rate per delay bin")
    g.add_argument("--snr", type=float, default=30.0, help="SNR in dB (default 30)")
    g.add_argument("--window", type=int, default=10, help="observation window T (default 10)")


def _sim_from(args, seed=0) -> SimConfig:
    return SimConfig(k=args.k, M=args.M, N_tau=args.n_tau, N_nu=args.n_nu, num_paths=args.paths,
                     max_doppler=args.max_doppler, pilot_interval=args.interval,
                     pdp_decay=args.pdp_decay, snr_db=args.snr, window=args.window, seed=seed)


def _recovery_args(p):
    g = p.add_argument_group("recovery")
    g.add_argument("--iterations", type=int, default=500)
    g.add_argument("--lambda", dest="lam", type=float, default=None, help="override the lambda rule")
    g.add_argument("--doppler-truncation", type=int, default=None, help="half-width in Doppler bins")
    g.add_argument("--no-debias", action="store_true", help="skip least-squares refit on the support")
    g.add_argument("--support-threshold", type=float, default=0.05)


def _recovery_from(args) -> RecoveryConfig:
    return RecoveryConfig(iterations=args.iterations, lambda_override=args.lam,
                          doppler_truncation=args.doppler_truncation,
                          debias_on_support=not args.no_debias,
                          support_threshold=args.support_threshold)


def _pattern_from(args, k):
    if args.pattern:
        p = read_pattern(args.pattern)
        if p.k != k:
            raise SystemExit(f"pattern file has k={p.k} but --k is {k}")
        return p
    return design_pattern(args.name, k, seed=args.seed, time_limit=args.design_time_limit)


def _pattern_args(p):
    p.add_argument("--pattern", help="pattern file (text or JSON)")
    p.add_argument("--name", choices=PATTERN_NAMES, default="3gpp",
                   help="named pattern when --pattern is absent (default 3gpp)")
    p.add_argument("--design-time-limit", type=float, default=600.0,
                   help="solver time limit for uncached designs, seconds")


def _out(args, name) -> Path:
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _print_json(obj):
    print(json.dumps(obj, indent=1, default=str))


# --- subcommands ----------------------------------------------------------------

def cmd_design(args):
    k = args.k
    n_lines = len(enumerate_modular_lines(k)) if k >= 2 else 0
    base = SolverConfig(k, forbid_four_collinear=not args.allow_four_collinear,
                        symmetric_exclusion=not args.no_symmetry_exclusion,
                        time_limit=args.time_limit, gap=args.gap, objective=args.objective)
    budget = args.budget
    if budget == "tighten":
        try:
            budget, res = tighten_budget(k, threshold=args.threshold, base=base, bisect=True)
        except RuntimeError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_CODES[INFEASIBLE]
    else:
        if budget == "all":
            budget = n_lines
        elif budget == "none":
            budget = None
        else:
            budget = int(budget)
        res = solve_mcc(replace(base, budget=budget))
    summary = {
        "k": k, "status": res.status, "objective": res.objective, "radius_bound": res.radius_bound,
        "budget": budget, "gap": res.gap, "nodes_explored": res.nodes_explored,
        "wall_time": round(res.wall_time, 3),
        "schedule": None if res.pattern is None else list(res.pattern.schedule),
        "problems": check_result(res),
    }
    if res.pattern is not None and args.out:
        write_pattern(res.pattern, args.out)
        summary["pattern_file"] = args.out
    if args.export_lp:
        stats = export_lp(res.config, args.export_lp, radius=res.radius_bound)
        summary["lp"] = {"path": args.export_lp, "variables": stats.n_vars, "rows": stats.n_rows}
    _print_json(summary)
    return EXIT_CODES[res.status]


def cmd_metrics(args):
    p = _pattern_from(args, args.k)
    rep = pattern_metrics(args.name if not args.pattern else Path(args.pattern).stem, p)
    out = asdict(rep)
    out.pop("nmse")
    out["schedule"] = list(rep.schedule)
    _print_json(out)
    return 0


def cmd_simulate(args):
    sim = _sim_from(args, args.seed)
    p = _pattern_from(args, sim.k)
    F, G = build_dictionaries(sim)
    channel = sample_channel(sim, make_rng(args.seed, 0))
    window = observe(p, args.shift, channel, sim, rng=make_rng(args.seed, 1, args.shift), F=F, G=G)
    path = Path(args.out) if args.out else _out(args, "observation.json")
    save_bundle(to_bundle(window, sim, p, args.shift, None if args.no_truth else channel), path)
    _print_json({"bundle": str(path), "T": window.T, "t0": window.t0,
                 "subbands": window.subbands.tolist()})
    return 0


def cmd_recover(args):
    sim, window, channel = load_bundle(args.bundle)
    F, G = build_dictionaries(sim)
    res = recover(window, F, G, _recovery_from(args))
    out = {
        "nmse": None,
        "lambda_used": res.lambda_used,
        "iterations": len(res.objective_trace),
        "objective_first": float(res.objective_trace[0]),
        "objective_last": float(res.objective_trace[-1]),
        "rank_deficient": res.rank_deficient,
    }
    if channel is not None:
        out["nmse"] = nmse(res.latest_channel, channel_at(channel.h, F, G, window.t0))
    if args.channel_csv:
        np.savetxt(args.channel_csv, np.column_stack([res.latest_channel.real, res.latest_channel.imag]),
                   delimiter=",", header="re,im", comments="", fmt="%.17g")
    _print_json(out)
    return 0


def _parse_values(text):
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        vals.append(int(tok) if tok.lstrip("-").isdigit() else float(tok))
    return tuple(vals)


def cmd_sweep(args):
    if args.config:
        d = json.loads(Path(args.config).read_text())
        d.setdefault("seed", args.seed)
        spec = SweepSpec.from_dict(d)
    else:
        if not args.kind or not args.values:
            raise SystemExit("sweep needs --config or both --kind and --values")
        spec = SweepSpec(args.kind, _parse_values(args.values), sim=_sim_from(args, args.seed),
                         recovery=_recovery_from(args), patterns=tuple(args.patterns.split(",")),
                         realizations=args.realizations, seed=args.seed,
                         design_time_limit=args.design_time_limit)
    rows = run_sweep(spec, out_dir=args.out_dir, jobs=args.jobs)
    sys.stdout.write(sweep_csv(rows))
    return 0


def cmd_compare(args):
    sim = _sim_from(args, args.seed)
    reports = compare_patterns(args.k, sim, _recovery_from(args), patterns=tuple(args.patterns.split(",")),
                               realizations=args.realizations, seed=args.seed, jobs=args.jobs,
                               design_time_limit=args.design_time_limit, with_nmse=not args.no_nmse)
    text = report_csv(reports)
    _out(args, f"compare_k{args.k}.csv").write_text(text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcc-pilot", description=__doc__)
    ap.add_argument("--version", action="version", version=f"mcc-pilot {__version__}")
    ap.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    ap.add_argument("--out-dir", default=".", help="directory for generated files")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="solve for a pilot pattern",
                       description="Exit codes: 0 optimal, 3 stopped within --gap, "
                                   "4 proven infeasible, 5 time limit reached.")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--budget", default="all",
                   help="redundant-line budget: an integer, 'all' (every line), 'none' "
                        "(no line constraints) or 'tighten' (search the smallest admissible budget)")
    p.add_argument("--threshold", type=float, default=0.05,
                   help="coverage degradation allowed by --budget tighten (default 0.05)")
    p.add_argument("--objective", choices=("coverage", "collinearity"), default="coverage")
    p.add_argument("--no-symmetry-exclusion", action="store_true")
    p.add_argument("--allow-four-collinear", action="store_true")
    p.add_argument("--time-limit", type=float, default=60.0)
    p.add_argument("--gap", type=float, default=0.0)
    p.add_argument("--export-lp", metavar="PATH")
    p.add_argument("--out", metavar="PATTERN_FILE")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("metrics", help="geometry metrics of a pattern")
    p.add_argument("--k", type=int, default=17)
    _pattern_args(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("simulate", help="write an observation bundle")
    _sim_args(p)
    _pattern_args(p)
    p.add_argument("--shift", type=int, default=0)
    p.add_argument("--out", metavar="BUNDLE")
    p.add_argument("--no-truth", action="store_true", help="omit the true channel from the bundle")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("recover", help="recover the latest-slot channel from a bundle")
    p.add_argument("bundle")
    _recovery_args(p)
    p.add_argument("--channel-csv", metavar="PATH", help="write the latest-slot estimate as re,im rows")
    p.set_defaults(func=cmd_recover)

    help_wq = ("Each realization averages the worst floor(k/4) cyclic-shift NMSEs "
               "(the single worst shift when k < 4); rows report the median over realizations.")
    p = sub.add_parser("sweep", help="median worst-quarter NMSE over a parameter sweep", description=help_wq)
    p.add_argument("--config", help="JSON sweep specification")
    p.add_argument("--kind", choices=SWEEP_KINDS)
    p.add_argument("--values", help="comma-separated sweep values")
    p.add_argument("--patterns", default="mcc,3gpp,chirp")
    p.add_argument("--realizations", type=int, default=50)
    p.add_argument("--design-time-limit", type=float, default=600.0)
    _sim_args(p)
    _recovery_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="tabulate all named patterns", description=help_wq)
    p.add_argument("--patterns", default=",".join(PATTERN_NAMES))
    p.add_argument("--realizations", type=int, default=50)
    p.add_argument("--no-nmse", action="store_true", help="geometry metrics only")
    p.add_argument("--design-time-limit", type=float, default=600.0)
    _sim_args(p)
    _recovery_args(p)
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"mcc-pilot: error: {exc}", file=sys.stderr)
        return 1
