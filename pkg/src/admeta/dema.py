"""Backward-looking double-EMA gradient transform.

Instead of feeding the raw gradient into the outer momentum EMA, the
transform combines the current gradient with an un-normalized inner EMA
and a decaying bias term:

    I_t = lam * I_{t-1} + g_t                 (inner accumulator, I_0 = 0)
    h_t = kappa * g_t + mu * I_t + nu_t       (combined signal)
    nu_t = lam^t * g_1                        (bias, decays to zero)

with coefficients fixed by lam alone:

    kappa = 10/lam - 9
    mu    = 25 - 10*(lam + 1/lam)

Under a constant gradient the combined signal settles at
(6 - lam)/(1 - lam) times the gradient, so the transform trades lag for a
larger effective step. This is a variant scheme; it is not the classic
market indicator DEMA = 2*EMA - EMA(EMA).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import as_params


@dataclass(frozen=True)
class DemaCoeffs:
    kappa: float
    mu: float


def _check_lam(lam: float) -> None:
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must be strictly inside (0,1), got {lam}")


def dema_coeffs(lam: float) -> DemaCoeffs:
    """Signal coefficients (kappa, mu) for a given inner-EMA coefficient."""
    _check_lam(lam)
    return DemaCoeffs(kappa=10.0 / lam - 9.0, mu=25.0 - 10.0 * (lam + 1.0 / lam))


def steady_state_gain(lam: float) -> float:
    """Limit of h_t/g under a constant gradient: (6 - lam)/(1 - lam).

    Algebraically equal to kappa + mu/(1 - lam).
    """
    _check_lam(lam)
    return (6.0 - lam) / (1.0 - lam)


class DemaState:
    """Single-owner state of the transform for one parameter vector.

    The coefficients are recomputed from lam at construction so they can
    never drift from the defining formulas. g1 is captured on the first
    call and never mutated afterwards.
    """

    def __init__(self, dim: int, lam: float):
        _check_lam(lam)
        self.lam = float(lam)
        c = dema_coeffs(lam)
        self.kappa = c.kappa
        self.mu = c.mu
        self.I = np.zeros(dim)
        self.g1: np.ndarray | None = None
        self.t = 0
        self._lam_pow = 1.0  # lam^t, updated incrementally

    @property
    def dim(self) -> int:
        return len(self.I)

    def nu_scale(self) -> float:
        """Current bias multiplier lam^t (t is the 1-based call counter)."""
        return self._lam_pow


def dema_step(state: DemaState, g) -> np.ndarray:
    """Advance the transform one step and return the combined signal h_t.

    The first observed gradient is stored as g1; the bias term uses
    lam^t with t = 1 on the first call, so the bias starts strictly
    below g1 and decays geometrically.
    """
    g = as_params(g, dim=state.dim)
    state.t += 1
    state._lam_pow *= state.lam
    if state.g1 is None:
        state.g1 = g.copy()
    h = np.empty_like(g)
    _kernels.dema_update(state.I, h, g, state.g1, state.lam, state.kappa, state.mu, state._lam_pow)
    return h
