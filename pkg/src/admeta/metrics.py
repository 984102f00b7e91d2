"""Convergence metrics: regret, gradient-norm decay, hit times, grad checks."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import RunTrace, as_params
from .problems import OnlineQuadraticStream


@dataclass
class RegretReport:
    """Cumulative regret series R(T) with a log-log power-law fit R ~ c*T^p."""

    series: np.ndarray
    exponent: float | None
    coefficient: float | None
    residual: float | None

    def to_json(self) -> str:
        return json.dumps({
            "exponent": self.exponent,
            "coefficient": self.coefficient,
            "residual": self.residual,
            "length": int(len(self.series)),
        })


@dataclass
class RateReport:
    """Running min of squared gradient norms with an envelope fit.

    The envelope (q1 + q2*log T)/sqrt(T) is fit by least squares on
    min_series(t)*sqrt(t) ~ q1 + q2*log(t).
    """

    min_series: np.ndarray
    q1: float | None
    q2: float | None
    residual: float | None

    def to_json(self) -> str:
        return json.dumps({
            "q1": self.q1,
            "q2": self.q2,
            "residual": self.residual,
            "length": int(len(self.min_series)),
        })


def _loglog_fit(ts: np.ndarray, values: np.ndarray):
    """OLS fit of log(values) = p*log(ts) + log(c); returns (p, c, residual)."""
    x = np.log(ts)
    y = np.log(values)
    p, logc = np.polyfit(x, y, 1)
    resid = float(np.mean((y - (p * x + logc)) ** 2))
    return float(p), float(np.exp(logc)), resid


def regret(thetas, stream: OnlineQuadraticStream, comparator=None) -> RegretReport:
    """Cumulative regret of played iterates against a fixed comparator.

    ``thetas`` holds the iterate played in each round (shape (T, d));
    the comparator defaults to the offline optimum of the realized
    sequence. The power-law fit uses the trailing 90% of rounds
    (T in [T/10, T]) and only rounds with positive cumulative regret;
    an all-nonpositive series yields no fit (exponent None).
    """
    thetas = np.asarray(thetas, dtype=np.float64)
    if thetas.ndim != 2:
        raise ValueError(f"expected (T, d) iterates, got shape {thetas.shape}")
    T = thetas.shape[0]
    if T != stream.rounds:
        raise ValueError(f"length mismatch: {T} iterates vs {stream.rounds} rounds")
    comp = stream.comparator() if comparator is None else as_params(comparator, stream.dim)
    per_round = np.empty(T)
    for t in range(1, T + 1):
        per_round[t - 1] = stream.round_loss(t, thetas[t - 1]) - stream.round_loss(t, comp)
    series = np.cumsum(per_round)

    ts = np.arange(1, T + 1)
    window = ts >= max(T // 10, 1)
    usable = window & (series > 0.0)
    if usable.sum() < 2:
        return RegretReport(series, None, None, None)
    p, c, resid = _loglog_fit(ts[usable], series[usable])
    return RegretReport(series, p, c, resid)


def first_hit_time(trace, target, eps: float) -> int | None:
    """Smallest recorded step with ||theta_t - target||_2 < eps, else None.

    ``trace`` is a RunTrace with parameter snapshots, or a (steps, thetas)
    pair, or a bare (T, d) array implying steps 1..T.
    """
    if eps <= 0.0:
        raise ValueError("eps must be > 0")
    if isinstance(trace, RunTrace):
        steps, thetas = trace.snapshots()
    elif isinstance(trace, tuple):
        steps, thetas = np.asarray(trace[0]), np.asarray(trace[1], dtype=np.float64)
    else:
        thetas = np.asarray(trace, dtype=np.float64)
        steps = np.arange(1, len(thetas) + 1)
    if len(thetas) == 0:
        return None
    target = as_params(target, thetas.shape[1])
    dists = np.linalg.norm(thetas - target, axis=1)
    hits = np.nonzero(dists < eps)[0]
    return int(steps[hits[0]]) if len(hits) else None


def grad_check(problem, theta, h: float = 1e-6) -> float:
    """Worst-coordinate relative error of central differences vs grad().

    The relative error denominator is max(|analytic_i|, 1e-8).
    """
    if h <= 0.0:
        raise ValueError("h must be > 0")
    theta = as_params(theta, problem.dim)
    analytic = problem.grad(theta)
    worst = 0.0
    for i in range(len(theta)):
        bumped = theta.copy()
        bumped[i] = theta[i] + h
        f_plus = problem.loss(bumped)
        bumped[i] = theta[i] - h
        f_minus = problem.loss(bumped)
        numeric = (f_plus - f_minus) / (2.0 * h)
        err = abs(numeric - analytic[i]) / max(abs(analytic[i]), 1e-8)
        worst = max(worst, err)
    return worst


def min_grad_norm_series(trace, problem) -> RateReport:
    """Running minimum of ||grad f(theta_t)||^2 over trace snapshots."""
    if isinstance(trace, RunTrace):
        steps, thetas = trace.snapshots()
    elif isinstance(trace, tuple):
        steps, thetas = np.asarray(trace[0]), np.asarray(trace[1], dtype=np.float64)
    else:
        thetas = np.asarray(trace, dtype=np.float64)
        steps = np.arange(1, len(thetas) + 1)
    if len(thetas) == 0:
        raise ValueError("trace has no parameter snapshots")
    sq_norms = np.empty(len(thetas))
    for i, th in enumerate(thetas):
        g = problem.grad(th)
        sq_norms[i] = float(g @ g)
    mins = np.minimum.accumulate(sq_norms)

    positive = mins > 0.0
    if positive.sum() < 2:
        return RateReport(mins, None, None, None)
    ts = steps[positive].astype(np.float64)
    y = mins[positive] * np.sqrt(ts)
    x = np.log(ts)
    q2, q1 = np.polyfit(x, y, 1)
    resid = float(np.mean((y - (q2 * x + q1)) ** 2))
    return RateReport(mins, float(q1), float(q2), resid)
