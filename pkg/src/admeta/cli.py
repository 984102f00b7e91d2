"""Experiment runner CLI.

Subcommands: run, compare, demo-ema-dema, gradcheck, presets.
Exit codes: 0 success, 1 acceptance-threshold failure, 2 usage/config
error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .metrics import grad_check
from .presets import PRESETS
from .problems import make_problem
from .runner import (
    DEMO_LAMBDA,
    DEMO_LR_GRID,
    DEMO_STEPS,
    RunConfig,
    compare_ablations,
    demo_ema_vs_dema,
    execute_run,
    write_run_outputs,
    write_trajectory_csv,
)

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_USAGE = 2
EXIT_IO = 3

GRADCHECK_THRESHOLD = 1e-4


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", help="valley[:diag][:noise=S] | rosenbrock[:dim] | online[:dim] | tinymlp[:n]")
    p.add_argument("--optimizer", help="sgd | sgdm | adam | radam | admetas | admetar")
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lambda", dest="lam", type=float, help="inner-EMA coefficient in (0,1)")
    p.add_argument("--beta", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--eta-schedule", dest="eta_schedule", help="const:<v> | dyn05 | dyn08")
    p.add_argument("--ablate", help="comma list of dema,lb,lf,const-lf")
    p.add_argument("--v-update", dest="v_update", choices=["always", "tractable-only"])
    p.add_argument("--nesterov", action="store_const", const=True, default=None)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--lr-schedule", dest="lr_schedule", help="const | invsqrt | milestone:<s1,..>@<f>")
    p.add_argument("--preset", help="named hyperparameter bundle (see `admeta presets`)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seeds", type=int, help="number of seeds (compare)")
    p.add_argument("--snapshot-stride", dest="snapshot_stride", type=int)
    p.add_argument("--hit-eps", dest="hit_eps", type=float)
    p.add_argument("--config", help="config file of key = value lines; flags override")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.config:
        with open(args.config) as fh:
            cfg = RunConfig.from_text(fh.read())
    else:
        cfg = RunConfig()
    overrides = {}
    for f in dataclasses.fields(RunConfig):
        if f.name.startswith("_"):
            continue
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value
    return dataclasses.replace(cfg, **overrides)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = _config_from_args(args)
        cfg.resolve()  # fail fast on bad hyperparameters
        make_problem(cfg.problem, steps=cfg.steps, seed=cfg.seed)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    result = execute_run(cfg)
    out_dir = cfg.out or "."
    try:
        trace_path, summary_path = write_run_outputs(out_dir, result)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    print(f"trace: {trace_path}\nsummary: {summary_path}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    try:
        cfg = _config_from_args(args)
        if cfg.seeds < 1:
            raise ValueError("--seeds must be >= 1")
        kind, _ = cfg.resolve()
        if kind not in ("admetas", "admetar"):
            raise ValueError("compare runs the ablation grid; pick an admetas/admetar optimizer or preset")
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    table = compare_ablations(cfg)
    lines = ["variant,mean_final_loss,sd,per_seed"]
    for name in table["variants"]:
        cell = table["cells"][name]
        per_seed = ";".join("failed" if s.startswith("failed") else repr(x)
                            for x, s in zip(cell["final_losses"], cell["status"]))
        mean = "" if cell["mean"] is None else repr(cell["mean"])
        sd = "" if cell["sd"] is None else repr(cell["sd"])
        lines.append(f"\"{name}\",{mean},{sd},\"{per_seed}\"")
    csv_text = "\n".join(lines) + "\n"
    print(csv_text, end="")
    if cfg.out:
        try:
            os.makedirs(cfg.out, exist_ok=True)
            with open(os.path.join(cfg.out, "compare.json"), "w") as fh:
                json.dump(table, fh, indent=2, sort_keys=True)
                fh.write("\n")
            with open(os.path.join(cfg.out, "compare.csv"), "w") as fh:
                fh.write(csv_text)
        except OSError as exc:
            print(f"I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


def cmd_demo(args: argparse.Namespace) -> int:
    out_dir = args.out or "."
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    ema_path = os.path.join(out_dir, "ema_trajectory.csv")
    dema_path = os.path.join(out_dir, "dema_trajectory.csv")
    verdict_path = os.path.join(out_dir, "verdict.json")
    try:
        if args.steps <= 0:
            write_trajectory_csv(ema_path, [])
            write_trajectory_csv(dema_path, [])
            verdict = {"error": f"steps must be positive, got {args.steps}"}
            with open(verdict_path, "w") as fh:
                json.dump(verdict, fh, indent=2, sort_keys=True)
                fh.write("\n")
            print(f"error: {verdict['error']}", file=sys.stderr)
            return EXIT_USAGE
        if not 0.0 < args.lam < 1.0:
            print(f"error: lambda must be in (0,1), got {args.lam}", file=sys.stderr)
            return EXIT_USAGE
        grid = tuple(float(v) for v in args.lr_grid.split(","))
        verdict = demo_ema_vs_dema(lam=args.lam, lr_grid=grid, steps=args.steps,
                                   seed=args.seed)
        trajectories = verdict.pop("_trajectories")
        write_trajectory_csv(ema_path, trajectories["ema"])
        write_trajectory_csv(dema_path, trajectories["dema"])
        with open(verdict_path, "w") as fh:
            json.dump(verdict, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(verdict, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    try:
        problem = make_problem(args.problem, steps=100, seed=args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.trials):
        theta = problem.initial_point(rng)
        worst = max(worst, grad_check(problem, theta, h=args.h))
    ok = worst < GRADCHECK_THRESHOLD
    print(f"problem={args.problem} trials={args.trials} h={args.h:g} "
          f"max_relative_error={worst:.3e} threshold={GRADCHECK_THRESHOLD:g} "
          f"{'OK' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_presets(_args: argparse.Namespace) -> int:
    for name in sorted(PRESETS):
        kind, hp = PRESETS[name]
        fields = [f"alpha={hp.alpha:g}"]
        if kind in ("sgdm", "admetas"):
            fields.append(f"beta={hp.beta:g}")
        if kind in ("adam", "radam", "admetar"):
            fields.append(f"beta1={hp.beta1:g} beta2={hp.beta2:g} eps={hp.epsilon:g}")
        if kind in ("admetas", "admetar"):
            fields.append(f"lambda={hp.lam:g} k={hp.k} eta={hp.eta.describe()}")
        if hp.nesterov:
            fields.append("nesterov")
        if hp.weight_decay:
            fields.append(f"wd={hp.weight_decay:g}")
        print(f"{name}: {kind} {' '.join(fields)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="admeta",
        description="Bidirectional-looking optimizer experiments on desk-scale problems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one seeded experiment, write trace + summary")
    _add_run_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run the ablation grid, tabulate final losses")
    _add_run_flags(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_demo = sub.add_parser("demo-ema-dema", help="EMA vs DEMA first-hit comparison on the valley")
    p_demo.add_argument("--lambda", dest="lam", type=float, default=DEMO_LAMBDA)
    p_demo.add_argument("--lr-grid", dest="lr_grid", default=",".join(str(v) for v in DEMO_LR_GRID))
    p_demo.add_argument("--steps", type=int, default=DEMO_STEPS)
    p_demo.add_argument("--seed", type=int, default=1)
    p_demo.add_argument("--out", help="output directory")
    p_demo.set_defaults(func=cmd_demo)

    p_gc = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p_gc.add_argument("--problem", required=True)
    p_gc.add_argument("--trials", type=int, default=100)
    p_gc.add_argument("--h", type=float, default=1e-6)
    p_gc.add_argument("--seed", type=int, default=0)
    p_gc.set_defaults(func=cmd_gradcheck)

    p_pre = sub.add_parser("presets", help="list named hyperparameter bundles")
    p_pre.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors already
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
