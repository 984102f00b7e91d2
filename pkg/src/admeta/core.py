"""Shared numeric types: hyperparameters, schedules, box projection, traces."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .lookahead import EtaSchedule


def as_params(x, dim: int | None = None) -> np.ndarray:
    """Coerce to a contiguous float64 vector, optionally checking length."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"parameters must be a 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {arr.shape[0]}")
    return arr


# ---------------------------------------------------------------------------
# Learning-rate schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LrSchedule:
    """Base learning rate plus decay rule.

    Variants: ``const`` (alpha for all t), ``invsqrt`` (alpha/sqrt(t)) and
    ``milestone`` (multiply by ``factor`` after each milestone step).
    """

    alpha: float
    kind: str = "const"
    milestones: tuple[int, ...] = ()
    factor: float = 0.1

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError(f"base learning rate must be > 0, got {self.alpha}")
        if self.kind not in ("const", "invsqrt", "milestone"):
            raise ValueError(f"unknown lr schedule kind: {self.kind!r}")
        if self.kind == "milestone":
            if not self.milestones:
                raise ValueError("milestone schedule needs at least one milestone")
            if sorted(self.milestones) != list(self.milestones):
                raise ValueError("milestones must be sorted ascending")
            if not 0.0 < self.factor <= 1.0:
                raise ValueError(f"decay factor must be in (0, 1], got {self.factor}")

    @classmethod
    def constant(cls, alpha: float) -> "LrSchedule":
        return cls(alpha, "const")

    @classmethod
    def inverse_sqrt(cls, alpha: float) -> "LrSchedule":
        return cls(alpha, "invsqrt")

    @classmethod
    def milestone(cls, alpha: float, milestones: Iterable[int], factor: float = 0.1) -> "LrSchedule":
        return cls(alpha, "milestone", tuple(sorted(int(m) for m in milestones)), factor)

    def describe(self) -> str:
        if self.kind == "milestone":
            steps = ",".join(str(m) for m in self.milestones)
            return f"milestone:{steps}@{self.factor:g}"
        return self.kind


def lr_at(schedule: LrSchedule, t: int) -> float:
    """Learning rate at step t (1-based).

    The milestone decay takes effect on the step after each milestone, i.e.
    passing milestone m multiplies the rate for all t > m.
    """
    if t < 1:
        raise ValueError(f"step must be >= 1, got {t}")
    if schedule.kind == "const":
        return schedule.alpha
    if schedule.kind == "invsqrt":
        return schedule.alpha / np.sqrt(t)
    passed = sum(1 for m in schedule.milestones if t > m)
    return schedule.alpha * schedule.factor**passed


# ---------------------------------------------------------------------------
# Box constraints and the diagonal-metric projection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxConstraint:
    """Per-coordinate bounds; None means unbounded on that side."""

    lower: np.ndarray | float | None = None
    upper: np.ndarray | float | None = None

    @classmethod
    def unbounded(cls) -> "BoxConstraint":
        return cls(None, None)

    @classmethod
    def symmetric(cls, radius: float) -> "BoxConstraint":
        return cls(-radius, radius)

    @property
    def is_unbounded(self) -> bool:
        return self.lower is None and self.upper is None

    def bounds_for(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        lo = np.full(dim, -np.inf) if self.lower is None else np.broadcast_to(
            np.asarray(self.lower, dtype=np.float64), (dim,)).copy()
        hi = np.full(dim, np.inf) if self.upper is None else np.broadcast_to(
            np.asarray(self.upper, dtype=np.float64), (dim,)).copy()
        if np.any(lo > hi):
            raise ValueError("empty box: lower > upper on some coordinate")
        return lo, hi

    def contains(self, x: np.ndarray) -> bool:
        lo, hi = self.bounds_for(len(x))
        return bool(np.all(x >= lo) and np.all(x <= hi))


def project(y, metric_diag, box: BoxConstraint) -> np.ndarray:
    """Project y onto the box under the diagonal metric.

    For a separable box the weighted projection reduces to coordinate-wise
    clamping, independent of the (nonnegative) metric weights; the metric is
    validated but does not change the result.
    """
    y = as_params(y)
    metric = as_params(metric_diag, dim=len(y))
    if np.any(metric < 0.0):
        raise ValueError("metric diagonal must be nonnegative")
    if box.is_unbounded:
        return y.copy()
    lo, hi = box.bounds_for(len(y))
    out = y.copy()
    _kernels.clip_box(out, lo, hi)
    return out


# ---------------------------------------------------------------------------
# Hyperparameters and validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AblationFlags:
    """Switches selecting the ablated optimizer variants.

    use_dema off       -> plain EMA of g (the "-DEMA" variant)
    use_backward off   -> raw signal applied without outer momentum ("-LB")
    use_forward off    -> no lookahead wrapper ("-LF")
    forward_constant   -> constant-eta lookahead ("w/ constant LF")
    """

    use_dema: bool = True
    use_backward: bool = True
    use_forward: bool = True
    forward_constant: bool = False

    def tags(self) -> list[str]:
        tags = []
        if not self.use_dema:
            tags.append("-DEMA")
        if not self.use_backward:
            tags.append("-LB")
        if not self.use_forward:
            tags.append("-LF")
        if self.forward_constant and self.use_forward:
            tags.append("w/ constant LF")
        return tags

    @classmethod
    def parse(cls, text: str) -> "AblationFlags":
        """Parse the --ablate flag: comma list of dema,lb,lf,const-lf."""
        flags = cls()
        for item in filter(None, (s.strip().lower() for s in text.split(","))):
            if item == "dema":
                flags = replace(flags, use_dema=False)
            elif item == "lb":
                flags = replace(flags, use_backward=False)
            elif item == "lf":
                flags = replace(flags, use_forward=False)
            elif item == "const-lf":
                flags = replace(flags, forward_constant=True)
            else:
                raise ValueError(f"unknown ablation {item!r} (use dema,lb,lf,const-lf)")
        return flags


# Constant eta used when the dynamic lookahead is ablated to the original
# constant scheme; 0.5 is the classic lookahead/Ranger default.
CONSTANT_LF_ETA = 0.5


@dataclass(frozen=True)
class HyperParams:
    """Full optimizer configuration, validated by validate_hyperparams."""

    alpha: float = 0.01                 # base learning rate
    lam: float = 0.9                    # inner-EMA coefficient (0, 1)
    beta: float = 0.9                   # SGDM / AdmetaS outer momentum
    beta1: float = 0.9                  # first-moment coefficient
    beta2: float = 0.999                # second-moment coefficient
    epsilon: float = 1e-8               # denominator guard
    k: int = 6                          # lookahead synchronization period
    eta: EtaSchedule = field(default_factory=EtaSchedule.dyn08)
    nesterov: bool = False
    weight_decay: float = 0.0           # decoupled, scaled by alpha_t
    lr_schedule: LrSchedule | None = None   # None -> constant(alpha)
    v_update: str = "always"            # "always" | "tractable-only"
    phi_init: str = "theta"             # "theta" | "zeros"
    ablation: AblationFlags = field(default_factory=AblationFlags)

    @property
    def gamma(self) -> float:
        return self.beta1**2 / self.beta2

    def schedule(self) -> LrSchedule:
        return self.lr_schedule or LrSchedule.constant(self.alpha)

    def eta_for_run(self) -> EtaSchedule:
        if self.ablation.forward_constant:
            if self.eta.kind == "const":
                return self.eta
            return EtaSchedule.const(CONSTANT_LF_ETA)
        return self.eta


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_hyperparams(hp: HyperParams) -> ValidationReport:
    """Structured validation; collects problems instead of raising."""
    rep = ValidationReport()
    if not 0.0 < hp.lam < 1.0:
        rep.errors.append(f"lambda out of (0,1): {hp.lam}")
    if hp.alpha <= 0.0:
        rep.errors.append(f"alpha must be > 0: {hp.alpha}")
    if hp.epsilon <= 0.0:
        rep.errors.append(f"epsilon must be > 0: {hp.epsilon}")
    if hp.k < 1:
        rep.errors.append(f"k must be a positive integer: {hp.k}")
    if not 0.0 <= hp.beta < 1.0:
        rep.errors.append(f"beta out of [0,1): {hp.beta}")
    if not 0.0 <= hp.beta1 < 1.0:
        rep.errors.append(f"beta1 out of [0,1): {hp.beta1}")
    if not 0.0 <= hp.beta2 < 1.0:
        rep.errors.append(f"beta2 out of [0,1): {hp.beta2}")
    if hp.weight_decay < 0.0:
        rep.errors.append(f"weight_decay must be >= 0: {hp.weight_decay}")
    if hp.v_update not in ("always", "tractable-only"):
        rep.errors.append(f"v_update must be 'always' or 'tractable-only': {hp.v_update}")
    if 0.0 < hp.beta2 < 1.0 and hp.gamma >= 1.0:
        rep.warnings.append(
            f"gamma = beta1^2/beta2 = {hp.gamma:.6g} >= 1 violates the convergence condition"
        )
    return rep


# ---------------------------------------------------------------------------
# Run traces
# ---------------------------------------------------------------------------

@dataclass
class StepRecord:
    step: int
    lr: float
    loss: float
    grad_norm: float
    eta: float | None = None      # set on synchronization steps
    synced: bool = False
    params: np.ndarray | None = None


class RunTrace:
    """Ordered per-step records of one optimization run."""

    def __init__(self):
        self.records: list[StepRecord] = []

    def append(self, rec: StepRecord) -> None:
        expected = self.records[-1].step + 1 if self.records else 1
        if rec.step != expected:
            raise ValueError(f"records must be contiguous from 1: got {rec.step}, expected {expected}")
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    def grad_norms(self) -> np.ndarray:
        return np.array([r.grad_norm for r in self.records])

    def snapshots(self) -> tuple[np.ndarray, np.ndarray]:
        """(step indices, stacked parameter snapshots) for records that have one."""
        steps = [r.step for r in self.records if r.params is not None]
        if not steps:
            return np.array([], dtype=int), np.empty((0, 0))
        params = np.stack([r.params for r in self.records if r.params is not None])
        return np.array(steps), params

    def to_csv(self, path, include_eta: bool = True) -> None:
        dim = 0
        for r in self.records:
            if r.params is not None:
                dim = len(r.params)
                break
        header = ["step", "lr", "loss", "grad_norm"]
        if include_eta:
            header += ["eta", "synced"]
        header += [f"param_{i}" for i in range(dim)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in self.records:
                row = [r.step, repr(r.lr), repr(r.loss), repr(r.grad_norm)]
                if include_eta:
                    row += ["" if r.eta is None else repr(r.eta), int(r.synced)]
                if r.params is not None:
                    row += [repr(float(x)) for x in r.params]
                elif dim:
                    row += [""] * dim
                w.writerow(row)


def finite_or_raise(theta: np.ndarray, context: str = "") -> None:
    if not np.all(np.isfinite(theta)):
        raise FloatingPointError(f"non-finite parameters{': ' + context if context else ''}")
