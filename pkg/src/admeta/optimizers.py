"""Step rules: SGD, SGDM, Adam, RAdam, AdmetaS, AdmetaR.

All rules are composed from the shared kernels in ``_kernels`` so that an
ablated Admeta variant executes the same float operations as its baseline:

    AdmetaS with use_dema=False, use_forward=False  == SGDM (plain)
    AdmetaR with use_dema=False, use_forward=False,
            v_update="always"                       == RAdam

AdmetaS (momentum family):

    h_t = DEMA(g_t)                 (or g_t when use_dema is off)
    m_t = beta*m_{t-1} + (1-beta)*h_t    (or h_t when use_backward is off)
    theta <- theta - alpha_t * m_t
    every k steps: theta <- eta_t*theta + (1-eta_t)*phi

AdmetaR (adaptive family) adds the second moment of h, the variance
rectification multiplier, bias corrections and an optional box projection:

    rho_inf = 2/(1-beta2) - 1
    rho_t   = rho_inf - 2*t*beta2^t/(1-beta2^t)
    if rho_t > 4:   theta <- P(theta - alpha_t * r_t * m^_t/(sqrt(v^_t)+eps))
    else:           theta <- P(theta - alpha_t * m^_t)

where m^ and v^ are the zero-init bias corrections m/(1-beta1^t),
v/(1-beta2^t). The epsilon guard sits outside the square root. The first
moment is bias-corrected in both branches; v is updated every step by
default ("always") or only inside the tractable branch ("tractable-only").
"""
from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .core import (
    AblationFlags,
    BoxConstraint,
    HyperParams,
    as_params,
    lr_at,
    project,
    validate_hyperparams,
)
from .dema import DemaState, dema_step
from .lookahead import EtaSchedule, LookaheadState, maybe_sync

KINDS = ("sgd", "sgdm", "adam", "radam", "admetas", "admetar")
_CANONICAL = {"sgd": "SGD", "sgdm": "SGDM", "adam": "Adam",
              "radam": "RAdam", "admetas": "AdmetaS", "admetar": "AdmetaR"}


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

class SgdmState:
    def __init__(self, dim: int):
        self.m = np.zeros(dim)
        self.t = 0
        self._dir = np.empty(dim)  # scratch for the nesterov direction


class AdamState:
    def __init__(self, dim: int):
        self.m = np.zeros(dim)
        self.v = np.zeros(dim)
        self.t = 0


class RadamState:
    def __init__(self, dim: int, beta2: float):
        if not 0.0 < beta2 < 1.0:
            raise ValueError(f"beta2 must be in (0,1) for the rectified rule, got {beta2}")
        self.m = np.zeros(dim)
        self.v = np.zeros(dim)
        self.rho_inf = 2.0 / (1.0 - beta2) - 1.0
        self.t = 0


class AdmetaSState:
    def __init__(self, dim: int, hp: HyperParams):
        self.dema = DemaState(dim, hp.lam) if hp.ablation.use_dema else None
        self.m = np.zeros(dim)
        self.lookahead = (
            LookaheadState(dim, hp.k, hp.phi_init) if hp.ablation.use_forward else None
        )
        self.t = 0


class AdmetaRState:
    def __init__(self, dim: int, hp: HyperParams):
        if not 0.0 < hp.beta2 < 1.0:
            raise ValueError(f"beta2 must be in (0,1) for the rectified rule, got {hp.beta2}")
        self.dema = DemaState(dim, hp.lam) if hp.ablation.use_dema else None
        self.m = np.zeros(dim)
        self.v = np.zeros(dim)
        self.rho_inf = 2.0 / (1.0 - hp.beta2) - 1.0
        self.lookahead = (
            LookaheadState(dim, hp.k, hp.phi_init) if hp.ablation.use_forward else None
        )
        self.t = 0


# ---------------------------------------------------------------------------
# Rectification helper (shared by RAdam and AdmetaR)
# ---------------------------------------------------------------------------

def rho_at(t: int, beta2: float, rho_inf: float) -> float:
    """Approximate SMA length rho_t = rho_inf - 2*t*beta2^t/(1-beta2^t)."""
    b2t = beta2**t
    return rho_inf - 2.0 * t * b2t / (1.0 - b2t)


def rectification(rho_t: float, rho_inf: float) -> float:
    """Variance rectification multiplier; only defined for rho_t > 4."""
    return math.sqrt(
        (rho_t - 4.0) * (rho_t - 2.0) * rho_inf
        / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t)
    )


# ---------------------------------------------------------------------------
# Step rules
# ---------------------------------------------------------------------------

def sgd_step(theta, g, alpha_t: float) -> np.ndarray:
    """theta - alpha_t * g."""
    theta = as_params(theta).copy()
    g = as_params(g, dim=len(theta))
    _kernels.descent(theta, g, alpha_t)
    return theta


def sgdm_step(state: SgdmState, theta, g, alpha_t: float, beta: float,
              nesterov: bool = False) -> np.ndarray:
    """Momentum update m = beta*m + (1-beta)*g, then descend along m.

    The nesterov variant recomputes the descent direction on the updated
    momentum: theta - alpha_t*(beta*m_new + (1-beta)*g).
    """
    theta = as_params(theta).copy()
    g = as_params(g, dim=len(theta))
    state.t += 1
    _kernels.ema_update(state.m, g, beta)
    if nesterov:
        _kernels.nesterov_direction(state._dir, state.m, g, beta)
        _kernels.descent(theta, state._dir, alpha_t)
    else:
        _kernels.descent(theta, state.m, alpha_t)
    return theta


def adam_step(state: AdamState, theta, g, alpha_t: float, beta1: float,
              beta2: float, epsilon: float, bias_correct: bool = True) -> np.ndarray:
    theta = as_params(theta).copy()
    g = as_params(g, dim=len(theta))
    state.t += 1
    _kernels.ema_update(state.m, g, beta1)
    _kernels.second_moment_update(state.v, g, beta2)
    bc1 = 1.0 - beta1**state.t if bias_correct else 1.0
    bc2 = 1.0 - beta2**state.t if bias_correct else 1.0
    _kernels.adaptive_descent(theta, state.m, state.v, alpha_t, 1.0, epsilon, bc1, bc2)
    return theta


def radam_step(state: RadamState, theta, g, alpha_t: float, beta1: float,
               beta2: float, epsilon: float) -> np.ndarray:
    theta = as_params(theta).copy()
    g = as_params(g, dim=len(theta))
    state.t += 1
    t = state.t
    _kernels.ema_update(state.m, g, beta1)
    _kernels.second_moment_update(state.v, g, beta2)
    bc1 = 1.0 - beta1**t
    rho = rho_at(t, beta2, state.rho_inf)
    if rho > 4.0:
        rect = rectification(rho, state.rho_inf)
        bc2 = 1.0 - beta2**t
        _kernels.adaptive_descent(theta, state.m, state.v, alpha_t, rect, epsilon, bc1, bc2)
    else:
        _kernels.biased_descent(theta, state.m, alpha_t, bc1)
    return theta


def admetas_step(state: AdmetaSState, theta, g, alpha_t: float,
                 hp: HyperParams) -> np.ndarray:
    theta = as_params(theta).copy()
    g = as_params(g, dim=len(theta))
    state.t += 1
    if state.lookahead is not None and state.t == 1:
        state.lookahead.observe_initial(theta)
    h = dema_step(state.dema, g) if state.dema is not None else g
    if hp.ablation.use_backward:
        _kernels.ema_update(state.m, h, hp.beta)
    else:
        np.copyto(state.m, h)
    _kernels.descent(theta, state.m, alpha_t)
    if state.lookahead is not None:
        theta, _ = maybe_sync(state.lookahead, theta, state.t, hp.eta_for_run())
    return theta


def admetar_step(state: AdmetaRState, theta, g, alpha_t: float, hp: HyperParams,
                 box: BoxConstraint | None = None) -> np.ndarray:
    theta = as_params(theta).copy()
    g = as_params(g, dim=len(theta))
    state.t += 1
    t = state.t
    if state.lookahead is not None and t == 1:
        state.lookahead.observe_initial(theta)
    h = dema_step(state.dema, g) if state.dema is not None else g
    if hp.ablation.use_backward:
        _kernels.ema_update(state.m, h, hp.beta1)
        bc1 = 1.0 - hp.beta1**t
    else:
        np.copyto(state.m, h)
        bc1 = 1.0  # m is the raw signal, nothing to de-bias
    if hp.v_update == "always":
        _kernels.second_moment_update(state.v, h, hp.beta2)
    rho = rho_at(t, hp.beta2, state.rho_inf)
    if rho > 4.0:
        if hp.v_update != "always":
            _kernels.second_moment_update(state.v, h, hp.beta2)
        rect = rectification(rho, state.rho_inf)
        bc2 = 1.0 - hp.beta2**t
        _kernels.adaptive_descent(theta, state.m, state.v, alpha_t, rect, hp.epsilon, bc1, bc2)
    else:
        _kernels.biased_descent(theta, state.m, alpha_t, bc1)
    if box is not None and not box.is_unbounded:
        bc2 = 1.0 - hp.beta2**t
        theta = project(theta, np.sqrt(state.v / bc2), box)
    if state.lookahead is not None:
        theta, _ = maybe_sync(state.lookahead, theta, t, hp.eta_for_run())
    return theta


# ---------------------------------------------------------------------------
# Uniform stepper
# ---------------------------------------------------------------------------

class Optimizer:
    """Stateful stepper with a uniform step(theta, g, t) interface.

    Applies the learning-rate schedule and decoupled weight decay, then
    dispatches to one of the six step rules. Steps must be fed with
    t = 1, 2, ... in order.
    """

    def __init__(self, kind: str, hp: HyperParams, dim: int,
                 box: BoxConstraint | None = None):
        key = kind.strip().lower()
        if key not in KINDS:
            raise ValueError(f"unknown optimizer kind {kind!r}; expected one of {KINDS}")
        report = validate_hyperparams(hp)
        if not report.ok:
            raise ValueError("invalid hyperparameters: " + "; ".join(report.errors))
        self.kind = key
        self.hp = hp
        self.dim = int(dim)
        self.box = box
        self._schedule = hp.schedule()
        self._t = 0
        if key == "sgd":
            self.state = None
        elif key == "sgdm":
            self.state = SgdmState(dim)
        elif key == "adam":
            self.state = AdamState(dim)
        elif key == "radam":
            self.state = RadamState(dim, hp.beta2)
        elif key == "admetas":
            self.state = AdmetaSState(dim, hp)
        else:
            self.state = AdmetaRState(dim, hp)

    @property
    def label(self) -> str:
        """Display name, e.g. 'AdmetaS[-DEMA,-LF]'."""
        name = _CANONICAL[self.kind]
        if self.kind in ("admetas", "admetar"):
            tags = self.hp.ablation.tags()
            if tags:
                return f"{name}[{','.join(tags)}]"
        return name

    def lr(self, t: int) -> float:
        return lr_at(self._schedule, t)

    def step(self, theta, g, t: int) -> np.ndarray:
        if t != self._t + 1:
            raise ValueError(f"steps must be consecutive from 1: got t={t}, expected {self._t + 1}")
        self._t = t
        theta = as_params(theta, dim=self.dim)
        alpha_t = lr_at(self._schedule, t)
        if self.hp.weight_decay > 0.0:
            theta = theta.copy()
            _kernels.decay_weights(theta, 1.0 - alpha_t * self.hp.weight_decay)
        if self.kind == "sgd":
            return sgd_step(theta, g, alpha_t)
        if self.kind == "sgdm":
            return sgdm_step(self.state, theta, g, alpha_t, self.hp.beta, self.hp.nesterov)
        if self.kind == "adam":
            return adam_step(self.state, theta, g, alpha_t,
                             self.hp.beta1, self.hp.beta2, self.hp.epsilon)
        if self.kind == "radam":
            return radam_step(self.state, theta, g, alpha_t,
                              self.hp.beta1, self.hp.beta2, self.hp.epsilon)
        if self.kind == "admetas":
            return admetas_step(self.state, theta, g, alpha_t, self.hp)
        return admetar_step(self.state, theta, g, alpha_t, self.hp, self.box)

    def last_sync_eta(self) -> float | None:
        """eta used at step t if it was a synchronization step, else None."""
        la = getattr(self.state, "lookahead", None)
        if la is None or self._t == 0 or self._t % la.k != 0:
            return None
        from .lookahead import eta_at
        return eta_at(self.hp.eta_for_run(), self._t)


def make_optimizer(kind: str, hp: HyperParams, dim: int,
                   box: BoxConstraint | None = None) -> Optimizer:
    return Optimizer(kind, hp, dim, box)


def step(optimizer: Optimizer, theta, g, t: int) -> np.ndarray:
    """Free-function alias for the uniform step interface."""
    return optimizer.step(theta, g, t)
