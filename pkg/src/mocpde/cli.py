"""Command-line entry point: ``mocpde <command> [options]``.

Reports go to stdout as JSON unless ``--out`` is given.  Exit status is 0 when
the run passes (no violations, all comparisons hold) and 1 otherwise; usage
and input errors exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import harness
from .errors import MocPdeError
from .modulus import compute_moc
from .onedim import erf_profile, plaplace_profile, solve_1d, t_kappa
from .operators import BUILTIN_NAMES, get_pair, pair_names
from .solver import load_trajectory, save_trajectory
from .structure import check_all_builtin, check_pair


def _emit(obj, out=None, name="report.json"):
    text = json.dumps(harness._clean(obj), indent=2, sort_keys=True)
    if out is None:
        print(text)
        return
    path = out
    if not out.endswith(".json"):
        os.makedirs(out, exist_ok=True)
        path = os.path.join(out, name)
    with open(path, "w") as fh:
        fh.write(text + "\n")


def _load_config(args):
    if not args.config:
        raise MocPdeError("--config FILE is required")
    with open(args.config) as fh:
        obj = json.load(fh)
    if args.seed is not None:
        obj["seed"] = args.seed
    return harness.ExperimentConfig.from_dict(obj)


def cmd_catalog(args):
    pairs = []
    for name in pair_names():
        F, f = get_pair(name)
        pairs.append(dict(name=name, builtin=name in BUILTIN_NAMES, F=F.kind.value, f=f.kind.value,
                          F_label=F.name, f_label=f.name))
    _emit(dict(pairs=pairs), args.out, "catalog.json")
    return 0


def cmd_check_sc(args):
    seed = 0 if args.seed is None else args.seed
    if args.pair == "all":
        reports = check_all_builtin(args.samples, seed, args.tol)
        _emit({k: v.to_dict() for k, v in reports.items()}, args.out, "check_sc.json")
        return 0 if all(r.ok for r in reports.values()) else 1
    overrides = json.loads(args.params) if args.params else {}
    F, f = get_pair(args.pair, **overrides)
    report = check_pair(F, f, args.dim, args.samples, seed, args.tol, args.grad_sign, args.mode)
    _emit(report.to_dict(), args.out, "check_sc.json")
    return 0 if report.ok else 1


def cmd_solve(args):
    cfg = _load_config(args)
    traj = harness.run_trajectory(cfg)
    out = args.out or "trajectory"
    save_trajectory(traj, out)
    print(json.dumps(dict(out=out, times=traj.times, steps=len(traj.dt_history))))
    return 0


def cmd_moc(args):
    traj = load_trajectory(args.input)
    snaps = traj.snapshots
    if args.time is not None:
        snaps = [min(snaps, key=lambda s: abs(s.t - args.time))]
    curves = [compute_moc(s, args.bins) for s in snaps]
    if args.out and args.out.endswith(".csv"):
        curves[-1].to_csv(args.out)
    else:
        out = args.out or os.path.join(args.input, "moc")
        os.makedirs(out, exist_ok=True)
        for c in curves:
            c.to_csv(os.path.join(out, f"moc_t_{c.t:.10g}.csv"))
    return 0


def _phi0(spec):
    kind, _, value = spec.partition(":")
    if kind != "const" or not value:
        raise MocPdeError("--phi0 must look like const:M")
    M = float(value)
    return M, (lambda s: np.full_like(s, M / 2))


def cmd_solve1d(args):
    f = harness._one_dim(args.f, {})
    M, phi0 = _phi0(args.phi0)
    times = [float(t) for t in args.times.split(",")] if args.times else []
    traj = solve_1d(f, phi0, args.S, args.left_bc, args.right_bc, args.t_end, args.nodes, times)
    out = args.out or "solve1d"
    os.makedirs(out, exist_ok=True)
    for p in traj.snapshots:
        np.savetxt(os.path.join(out, f"t_{p.t:.10g}.csv"), np.column_stack([p.s_grid, p.phi]),
                   delimiter=",", header="s,phi", comments="", fmt="%.17g")
    meta = dict(traj.meta, M=M, times=traj.times, steps=len(traj.dt_history))
    with open(os.path.join(out, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=1)
    return 0


def cmd_profile(args):
    s = np.linspace(0.0, args.s_max, args.points)
    if args.kind == "erf":
        phi = erf_profile(args.M, s, args.t)
    elif args.kind == "plaplace":
        phi = plaplace_profile(args.p, args.M, s, args.t)
    else:
        phi = np.array([t_kappa(args.kappa, x) for x in s])
    data = np.column_stack([s, phi])
    if args.out:
        np.savetxt(args.out, data, delimiter=",", header="s,phi", comments="", fmt="%.17g")
    else:
        np.savetxt(sys.stdout, data, delimiter=",", header="s,phi", comments="", fmt="%.17g")
    return 0


def cmd_verify(args):
    cfg = _load_config(args)
    report, traj = harness.run_comparison(cfg)
    _emit(report.to_dict(), args.out, "verify.json")
    if args.out and not args.out.endswith(".json"):
        save_trajectory(traj, os.path.join(args.out, "trajectory"))
        for snap in traj.snapshots:
            compute_moc(snap, cfg.bins).to_csv(os.path.join(args.out, f"moc_t_{snap.t:.10g}.csv"))
    return 0 if report.ok else 1


def cmd_sharpness(args):
    cfg = _load_config(args)
    report, _ = harness.run_sharpness(cfg)
    ok = args.low <= report["min_ratio"] and report["max_ratio"] <= args.high
    report["window"] = [args.low, args.high]
    report["ok"] = ok
    _emit(report, args.out, "sharpness.json")
    return 0 if ok else 1


def build_parser():
    ap = argparse.ArgumentParser(prog="mocpde", description="Modulus-of-continuity verification laboratory")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("--config", default=None, help="experiment configuration (JSON)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", parents=[common], help="list operator pairs")
    p.set_defaults(fn=cmd_catalog)

    p = sub.add_parser("check-sc", parents=[common], help="Monte Carlo structure-condition check")
    p.add_argument("--pair", required=True, help="catalog name, or 'all' for every builtin pair")
    p.add_argument("--params", default=None, help="JSON object of parameter overrides")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--grad-sign", choices=("nonneg", "any"), default="nonneg")
    p.add_argument("--mode", choices=("mixed", "interior", "boundary"), default="mixed")
    p.set_defaults(fn=cmd_check_sc)

    p = sub.add_parser("solve", parents=[common], help="evolve a configured experiment, save CSV snapshots")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("moc", parents=[common], help="modulus of continuity of saved snapshots")
    p.add_argument("--in", dest="input", required=True, help="trajectory directory")
    p.add_argument("--bins", type=int, default=None, help="bin count (default: exact distances)")
    p.add_argument("--time", type=float, default=None, help="only the snapshot nearest to this time")
    p.set_defaults(fn=cmd_moc)

    p = sub.add_parser("solve1d", parents=[common], help="solve the 1D comparison equation")
    p.add_argument("--f", required=True, help="pair name whose 1D operator is used, or 'zero'")
    p.add_argument("--phi0", default="const:2", help="initial datum, const:M gives phi0 = M/2")
    p.add_argument("--S", type=float, default=10.0)
    p.add_argument("--nodes", type=int, default=401)
    p.add_argument("--t-end", type=float, default=0.25)
    p.add_argument("--times", default=None, help="comma-separated output times")
    p.add_argument("--left-bc", default="auto", choices=("auto", "odd_reflection", "dirichlet_zero"))
    p.add_argument("--right-bc", default="neumann_zero", choices=("neumann_zero", "dirichlet_value"))
    p.set_defaults(fn=cmd_solve1d)

    p = sub.add_parser("profile", parents=[common], help="closed-form profiles as CSV s,phi")
    p.add_argument("--kind", required=True, choices=("erf", "plaplace", "tkappa"))
    p.add_argument("--M", type=float, default=2.0)
    p.add_argument("--t", type=float, default=0.25)
    p.add_argument("--p", type=float, default=3.0)
    p.add_argument("--kappa", type=float, default=-1.0)
    p.add_argument("--s-max", type=float, default=5.0)
    p.add_argument("--points", type=int, default=101)
    p.set_defaults(fn=cmd_profile)

    p = sub.add_parser("verify", parents=[common], help="comparison of omega with the 1D target")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("sharpness", parents=[common], help="omega/phi ratios for square-wave data")
    p.add_argument("--low", type=float, default=0.95)
    p.add_argument("--high", type=float, default=1.001)
    p.set_defaults(fn=cmd_sharpness)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (MocPdeError, OSError, json.JSONDecodeError) as exc:
        print(f"mocpde {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
