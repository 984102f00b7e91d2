"""Run configurations and the seeded experiment loop."""
from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import (
    AblationFlags,
    HyperParams,
    LrSchedule,
    RunTrace,
    StepRecord,
)
from .lookahead import EtaSchedule
from .metrics import first_hit_time
from .optimizers import Optimizer, make_optimizer
from .presets import PRESETS, apply_overrides, get_preset
from .problems import (
    OnlineQuadraticStream,
    QuadraticValley,
    TinyMlp,
    make_problem,
)


def parse_lr_schedule(text: str, alpha: float) -> LrSchedule:
    """Parse --lr-schedule: const | invsqrt | milestone:<s1,s2,...>@<factor>."""
    text = text.strip().lower()
    if text == "const":
        return LrSchedule.constant(alpha)
    if text == "invsqrt":
        return LrSchedule.inverse_sqrt(alpha)
    if text.startswith("milestone:"):
        body = text.split(":", 1)[1]
        steps_part, _, factor_part = body.partition("@")
        milestones = [int(s) for s in steps_part.split(",") if s]
        factor = float(factor_part) if factor_part else 0.1
        return LrSchedule.milestone(alpha, milestones, factor)
    raise ValueError(f"cannot parse lr schedule {text!r}")


@dataclass
class RunConfig:
    """One experiment: problem, optimizer, hyperparameters, outputs.

    Round-trips losslessly through the flat key=value config format; every
    CLI flag maps to exactly one field here.
    """

    problem: str = "valley"
    optimizer: str = "admetas"
    steps: int = 1000
    seed: int = 1
    lr: float | None = None
    lam: float | None = None
    beta: float | None = None
    beta1: float | None = None
    beta2: float | None = None
    eps: float | None = None
    k: int | None = None
    eta_schedule: str | None = None       # const:<v> | dyn05 | dyn08
    ablate: str = ""                      # comma list of dema,lb,lf,const-lf
    v_update: str | None = None           # always | tractable-only
    nesterov: bool | None = None
    weight_decay: float | None = None
    lr_schedule: str | None = None        # const | invsqrt | milestone:...@f
    preset: str | None = None
    out: str | None = None
    seeds: int = 1
    snapshot_stride: int = 10
    hit_eps: float = 0.01

    _BOOL_FIELDS = ("nesterov",)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            if f.name.startswith("_"):
                continue
            value = getattr(self, f.name)
            if value is None:
                continue
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        values: dict[str, str] = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line is not key = value: {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key] = val
        return cls.from_strings(values)

    @classmethod
    def from_strings(cls, values: dict[str, str]) -> "RunConfig":
        kwargs = {}
        by_name = {f.name: f for f in dataclasses.fields(cls)}
        for key, val in values.items():
            if key not in by_name:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = cls._coerce(key, val)
        return cls(**kwargs)

    @staticmethod
    def _coerce(key: str, val: str):
        if key in ("steps", "seed", "k", "seeds", "snapshot_stride"):
            return int(val)
        if key in ("lr", "lam", "beta", "beta1", "beta2", "eps", "weight_decay", "hit_eps"):
            return float(val)
        if key in RunConfig._BOOL_FIELDS:
            return val.strip().lower() in ("1", "true", "yes", "on")
        return val

    # -- resolution ---------------------------------------------------------

    def resolve(self) -> tuple[str, HyperParams]:
        """Combine preset (if any) and explicit overrides into (kind, hp)."""
        if self.preset:
            kind, hp = get_preset(self.preset)
        else:
            kind, hp = self.optimizer, HyperParams()
        hp = apply_overrides(
            hp,
            alpha=self.lr,
            lam=self.lam,
            beta=self.beta,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.eps,
            k=self.k,
            nesterov=self.nesterov,
            weight_decay=self.weight_decay,
            v_update=self.v_update,
        )
        if self.eta_schedule:
            hp = dataclasses.replace(hp, eta=EtaSchedule.parse(self.eta_schedule))
        if self.ablate:
            hp = dataclasses.replace(hp, ablation=AblationFlags.parse(self.ablate))
        if self.lr_schedule:
            hp = dataclasses.replace(hp, lr_schedule=parse_lr_schedule(self.lr_schedule, hp.alpha))
        return kind, hp


@dataclass
class RunResult:
    trace: RunTrace
    summary: dict
    final_theta: np.ndarray


def _wants_stochastic(problem) -> bool:
    if isinstance(problem, TinyMlp):
        return True
    if isinstance(problem, QuadraticValley):
        return problem.noise_std > 0.0
    return False


def execute_run(cfg: RunConfig) -> RunResult:
    """Run one seeded experiment and collect its trace and summary.

    Online streams record the loss of the iterate actually played each
    round (before the update); all other problems record the loss after
    the step. Parameter snapshots are taken every snapshot_stride steps
    and at the final step.
    """
    kind, hp = cfg.resolve()
    problem = make_problem(cfg.problem, steps=cfg.steps, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    theta = problem.initial_point(rng)
    opt = make_optimizer(kind, hp, problem.dim)
    online = isinstance(problem, OnlineQuadraticStream)
    stochastic = _wants_stochastic(problem)
    trace = RunTrace()
    start = time.perf_counter()
    diverged_at = None
    for t in range(1, cfg.steps + 1):
        if online:
            loss_val = problem.round_loss(t, theta)
            g = problem.round_grad(t, theta)
        elif stochastic:
            g = problem.stochastic_grad(theta, rng)
        else:
            g = problem.grad(theta)
        theta_next = opt.step(theta, g, t)
        if not np.all(np.isfinite(theta_next)):
            diverged_at = t
            break
        theta = theta_next
        if not online:
            loss_val = problem.loss(theta)
        snap = cfg.snapshot_stride > 0 and (t % cfg.snapshot_stride == 0 or t == cfg.steps)
        trace.append(StepRecord(
            step=t,
            lr=opt.lr(t),
            loss=loss_val,
            grad_norm=float(np.linalg.norm(g)),
            eta=opt.last_sync_eta(),
            synced=opt.last_sync_eta() is not None,
            params=theta.copy() if snap else None,
        ))
    wall = time.perf_counter() - start

    summary = {
        "optimizer": opt.label,
        "problem": cfg.problem,
        "steps": cfg.steps,
        "seed": cfg.seed,
        "backend": _kernels.BACKEND,
        "final_loss": float(trace.records[-1].loss) if len(trace) else None,
        "diverged_at": diverged_at,
        "wall_time_s": wall,
    }
    optimum = problem.optimum()
    if optimum is not None and len(trace):
        summary["first_hit_time"] = first_hit_time(trace, optimum, cfg.hit_eps)
        summary["hit_eps"] = cfg.hit_eps
    return RunResult(trace, summary, theta)


# ---------------------------------------------------------------------------
# Ablation comparison grid
# ---------------------------------------------------------------------------

ABLATION_VARIANTS: tuple[tuple[str, AblationFlags], ...] = (
    ("full", AblationFlags()),
    ("-DEMA", AblationFlags(use_dema=False)),
    ("-LB", AblationFlags(use_backward=False)),
    ("-LF", AblationFlags(use_forward=False)),
    ("-LB-LF", AblationFlags(use_backward=False, use_forward=False)),
    ("w/ constant LF", AblationFlags(forward_constant=True)),
)


def _flags_to_ablate_string(flags: AblationFlags) -> str:
    parts = []
    if not flags.use_dema:
        parts.append("dema")
    if not flags.use_backward:
        parts.append("lb")
    if not flags.use_forward:
        parts.append("lf")
    if flags.forward_constant:
        parts.append("const-lf")
    return ",".join(parts)


def compare_ablations(cfg: RunConfig, variants=ABLATION_VARIANTS) -> dict:
    """Run the ablation grid, multi-seed, and tabulate final losses.

    Seeds are cfg.seed, cfg.seed+1, ... cfg.seed+cfg.seeds-1. A failed or
    diverged member run marks its cell "failed" and the grid continues.
    """
    table = {}
    seeds = [cfg.seed + i for i in range(cfg.seeds)]
    for name, flags in variants:
        finals, statuses = [], []
        for seed in seeds:
            member = dataclasses.replace(
                cfg, seed=seed, ablate=_flags_to_ablate_string(flags), out=None,
                snapshot_stride=0,
            )
            try:
                result = execute_run(member)
                if result.summary["diverged_at"] is not None:
                    finals.append(float("inf"))
                    statuses.append("diverged")
                else:
                    finals.append(result.summary["final_loss"])
                    statuses.append("ok")
            except Exception as exc:  # keep the grid going
                finals.append(float("nan"))
                statuses.append(f"failed: {exc}")
        clean = [x for x in finals if np.isfinite(x)]
        table[name] = {
            "final_losses": finals,
            "status": statuses,
            "mean": float(np.mean(clean)) if clean else None,
            "sd": float(np.std(clean, ddof=1)) if len(clean) > 1 else 0.0 if clean else None,
        }
    return {"seeds": seeds, "variants": list(table), "cells": table}


# ---------------------------------------------------------------------------
# EMA vs DEMA speed demo
# ---------------------------------------------------------------------------

DEMO_LR_GRID = (0.001, 0.003, 0.01, 0.03, 0.1)
DEMO_LAMBDA = 0.4
DEMO_BETA = 0.9
DEMO_STEPS = 3000
DEMO_HIT_EPS = 0.01


def demo_start_point(rng: np.random.Generator) -> np.ndarray:
    """Valley-style start: far along the shallow axis, small stiff offset."""
    slow = rng.uniform(1.5, 2.5) * rng.choice([-1.0, 1.0])
    stiff = rng.uniform(-0.2, 0.2)
    return np.array([slow, stiff])


def _run_for_hit(kind: str, hp: HyperParams, problem: QuadraticValley,
                 theta0: np.ndarray, steps: int, eps: float):
    """Run to the first entry of the eps-ball around the optimum.

    Returns (hit step or None, trajectory list of (step, theta, loss)).
    """
    opt = make_optimizer(kind, hp, problem.dim)
    theta = theta0.copy()
    trajectory = [(0, theta.copy(), problem.loss(theta))]
    hit = None
    for t in range(1, steps + 1):
        g = problem.grad(theta)
        theta = opt.step(theta, g, t)
        if not np.all(np.isfinite(theta)):
            return None, trajectory
        trajectory.append((t, theta.copy(), problem.loss(theta)))
        if hit is None and float(np.linalg.norm(theta - problem.optimum())) < eps:
            hit = t
            break
    return hit, trajectory


def demo_ema_vs_dema(lam: float = DEMO_LAMBDA, lr_grid=DEMO_LR_GRID,
                     steps: int = DEMO_STEPS, seed: int = 1,
                     beta: float = DEMO_BETA, eps: float = DEMO_HIT_EPS) -> dict:
    """Backward-looking speed comparison on the 2-D valley.

    Plain momentum (EMA of g) against the double-EMA transform, same start
    point, each method taking its best first-hit time over the shared
    learning-rate grid. The raw same-lr comparison would be unfair because
    the transform rescales the effective step by (6-lam)/(1-lam).
    """
    problem = QuadraticValley((1.0, 100.0))
    rng = np.random.default_rng(seed)
    theta0 = demo_start_point(rng)
    out = {"lambda": lam, "beta": beta, "seed": seed, "steps": steps,
           "hit_eps": eps, "lr_grid": list(lr_grid), "start": theta0.tolist()}
    best = {}
    for method in ("ema", "dema"):
        best[method] = {"lr": None, "first_hit_time": None, "trajectory": None}
        for lr in lr_grid:
            if method == "ema":
                hp = HyperParams(alpha=lr, beta=beta)
                kind = "sgdm"
            else:
                hp = HyperParams(alpha=lr, beta=beta, lam=lam,
                                 ablation=AblationFlags(use_forward=False))
                kind = "admetas"
            hit, trajectory = _run_for_hit(kind, hp, problem, theta0, steps, eps)
            if hit is not None and (best[method]["first_hit_time"] is None
                                    or hit < best[method]["first_hit_time"]):
                best[method] = {"lr": lr, "first_hit_time": hit, "trajectory": trajectory}
    out["ema"] = {k: best["ema"][k] for k in ("lr", "first_hit_time")}
    out["dema"] = {k: best["dema"][k] for k in ("lr", "first_hit_time")}
    e, d = best["ema"]["first_hit_time"], best["dema"]["first_hit_time"]
    out["dema_not_slower"] = d is not None and (e is None or d <= e)
    out["_trajectories"] = {m: best[m]["trajectory"] for m in ("ema", "dema")}
    return out


def write_trajectory_csv(path, trajectory) -> None:
    import csv as _csv
    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["step", "x0", "x1", "loss"])
        for step, theta, loss in trajectory or []:
            w.writerow([step, repr(float(theta[0])), repr(float(theta[1])), repr(float(loss))])


def write_run_outputs(out_dir, result: RunResult) -> tuple[str, str]:
    import os
    os.makedirs(out_dir, exist_ok=True)
    trace_path = os.path.join(out_dir, "trace.csv")
    summary_path = os.path.join(out_dir, "summary.json")
    result.trace.to_csv(trace_path)
    with open(summary_path, "w") as fh:
        json.dump(result.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return trace_path, summary_path
