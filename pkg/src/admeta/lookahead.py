"""Forward-looking (lookahead) wrapper: slow weights and synchronization.

Fast weights theta are produced by any base optimizer; every k steps the
slow weights phi take one interpolation step toward theta and theta is
reset onto phi:

    phi <- eta_t * theta + (1 - eta_t) * phi
    theta <- phi

The interpolation weight eta_t is either a constant (original lookahead)
or one of two dynamic schedules that decay from 1 toward a set value:

    dyn05: eta_t = 0.5 * (1 + 1/(0.01*sqrt(t) + 1))    -> 0.5
    dyn08: eta_t = 0.8 * (1 + 1/(0.1*sqrt(t) + 3.8))   -> 0.8

eta_t is evaluated at the global fast-step counter t, so early
synchronizations barely pull the fast weights back (eta ~ 1) and late ones
approach the classic constant behaviour.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class EtaSchedule:
    """Slow-weight interpolation schedule: ``const``, ``dyn05`` or ``dyn08``."""

    kind: str
    value: float = 0.5  # only used by the const variant

    def __post_init__(self):
        if self.kind not in ("const", "dyn05", "dyn08"):
            raise ValueError(f"unknown eta schedule kind: {self.kind!r}")
        if self.kind == "const" and not 0.0 < self.value <= 1.0:
            raise ValueError(f"constant eta must be in (0, 1], got {self.value}")

    @classmethod
    def const(cls, value: float) -> "EtaSchedule":
        return cls("const", value)

    @classmethod
    def dyn05(cls) -> "EtaSchedule":
        return cls("dyn05")

    @classmethod
    def dyn08(cls) -> "EtaSchedule":
        return cls("dyn08")

    @classmethod
    def parse(cls, text: str) -> "EtaSchedule":
        """Parse CLI syntax: ``dyn05``, ``dyn08`` or ``const:<v>``."""
        text = text.strip().lower()
        if text == "dyn05":
            return cls.dyn05()
        if text == "dyn08":
            return cls.dyn08()
        if text.startswith("const:"):
            return cls.const(float(text.split(":", 1)[1]))
        raise ValueError(f"cannot parse eta schedule {text!r}")

    def describe(self) -> str:
        if self.kind == "const":
            return f"const:{self.value:g}"
        return self.kind


def eta_at(schedule: EtaSchedule, t: int | float) -> float:
    """Evaluate the interpolation weight at fast step t (t >= 0)."""
    if t < 0:
        raise ValueError(f"step must be nonnegative, got {t}")
    if schedule.kind == "const":
        return schedule.value
    if schedule.kind == "dyn05":
        return 0.5 * (1.0 + 1.0 / (0.01 * math.sqrt(t) + 1.0))
    return 0.8 * (1.0 + 1.0 / (0.1 * math.sqrt(t) + 3.8))


class LookaheadState:
    """Slow-weight storage for one optimizer instance.

    phi is initialized either to the fast weights seen at the first step
    (``phi_init="theta"``, the default) or to zeros (``phi_init="zeros"``,
    the pseudo-code convention; the difference is tiny because eta ~ 1
    early on).
    """

    def __init__(self, dim: int, k: int, phi_init: str = "theta"):
        if k < 1:
            raise ValueError(f"synchronization period k must be >= 1, got {k}")
        if phi_init not in ("theta", "zeros"):
            raise ValueError(f"phi_init must be 'theta' or 'zeros', got {phi_init!r}")
        self.k = int(k)
        self.phi = np.zeros(dim) if phi_init == "zeros" else None
        self._phi_init = phi_init
        self.sync_count = 0

    def observe_initial(self, theta: np.ndarray) -> None:
        """Capture phi_0 from the initial fast weights (``theta`` mode)."""
        if self.phi is None:
            self.phi = np.array(theta, dtype=np.float64, copy=True)


def maybe_sync(
    state: LookaheadState,
    theta: np.ndarray,
    t: int,
    schedule: EtaSchedule,
) -> tuple[np.ndarray, float | None]:
    """Apply the synchronization rule after completed fast step t.

    Returns ``(theta, eta)`` where eta is None on non-sync steps. On sync
    steps (t % k == 0) the returned theta is the updated slow weights.
    """
    if state.phi is None:
        raise RuntimeError("slow weights not initialized; call observe_initial first")
    if state.phi.shape != theta.shape:
        raise ValueError(f"shape mismatch: phi {state.phi.shape} vs theta {theta.shape}")
    if t % state.k != 0:
        return theta, None
    eta = eta_at(schedule, t)
    _kernels.slow_weight_update(state.phi, theta, eta)
    state.sync_count += 1
    return state.phi.copy(), eta
