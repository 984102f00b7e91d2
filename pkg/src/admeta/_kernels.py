"""Element-wise update kernels shared by all optimizers.

Every step rule is composed from the small kernels below so that ablated
variants and their baseline counterparts execute literally the same float
operations (this is what makes the baseline-collapse checks exact).

Kernels are numba-compiled by default. Set ``ADMETA_PURE_NUMPY=1`` in the
environment (before import) to force the pure-numpy fallback path; the
fallback is also selected automatically when numba is unavailable.
Run ``python -m benchmarks.bench_backends`` in the repo to compare both.
"""
from __future__ import annotations

import math
import os

import numpy as np

PURE_NUMPY = os.environ.get("ADMETA_PURE_NUMPY", "").strip() in ("1", "true", "yes")

if not PURE_NUMPY:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - depends on environment
        PURE_NUMPY = True

BACKEND = "numpy" if PURE_NUMPY else "numba"


def _compile(fn):
    if PURE_NUMPY:
        return fn
    return njit(cache=True)(fn)


@_compile
def ema_update(m, x, beta):
    """m <- beta*m + (1-beta)*x, in place."""
    for i in range(m.shape[0]):
        m[i] = beta * m[i] + (1.0 - beta) * x[i]


@_compile
def second_moment_update(v, x, beta2):
    """v <- beta2*v + (1-beta2)*x^2, in place."""
    for i in range(v.shape[0]):
        v[i] = beta2 * v[i] + (1.0 - beta2) * x[i] * x[i]


@_compile
def descent(theta, d, alpha):
    """theta <- theta - alpha*d, in place."""
    for i in range(theta.shape[0]):
        theta[i] = theta[i] - alpha * d[i]


@_compile
def nesterov_direction(out, m, g, beta):
    """out <- beta*m + (1-beta)*g (lookahead-momentum descent direction)."""
    for i in range(out.shape[0]):
        out[i] = beta * m[i] + (1.0 - beta) * g[i]


@_compile
def dema_update(I, h, g, g1, lam, kappa, mu, nu_scale):
    """I <- lam*I + g;  h <- kappa*g + mu*I + nu_scale*g1, in place."""
    for i in range(I.shape[0]):
        I[i] = lam * I[i] + g[i]
        h[i] = kappa * g[i] + mu * I[i] + nu_scale * g1[i]


@_compile
def adaptive_descent(theta, m, v, alpha, rect, eps, bc1, bc2):
    """theta <- theta - alpha*rect*(m/bc1)/(sqrt(v/bc2)+eps), in place."""
    for i in range(theta.shape[0]):
        theta[i] = theta[i] - alpha * rect * (m[i] / bc1) / (math.sqrt(v[i] / bc2) + eps)


@_compile
def biased_descent(theta, m, alpha, bc1):
    """theta <- theta - alpha*(m/bc1), in place (un-adapted branch)."""
    for i in range(theta.shape[0]):
        theta[i] = theta[i] - alpha * (m[i] / bc1)


@_compile
def slow_weight_update(phi, theta, eta):
    """phi <- eta*theta + (1-eta)*phi, in place (synchronization rule)."""
    for i in range(phi.shape[0]):
        phi[i] = eta * theta[i] + (1.0 - eta) * phi[i]


@_compile
def decay_weights(theta, scale):
    """theta <- scale*theta, in place (decoupled weight decay)."""
    for i in range(theta.shape[0]):
        theta[i] = scale * theta[i]


@_compile
def clip_box(theta, lower, upper):
    """theta <- min(max(theta, lower), upper), in place."""
    for i in range(theta.shape[0]):
        if theta[i] < lower[i]:
            theta[i] = lower[i]
        elif theta[i] > upper[i]:
            theta[i] = upper[i]


if PURE_NUMPY:
    # Vectorized replacements; same arithmetic per element as the loops above.
    def ema_update(m, x, beta):  # noqa: F811
        m *= beta
        m += (1.0 - beta) * x

    def second_moment_update(v, x, beta2):  # noqa: F811
        v *= beta2
        v += (1.0 - beta2) * (x * x)

    def descent(theta, d, alpha):  # noqa: F811
        theta -= alpha * d

    def nesterov_direction(out, m, g, beta):  # noqa: F811
        np.multiply(m, beta, out=out)
        out += (1.0 - beta) * g

    def dema_update(I, h, g, g1, lam, kappa, mu, nu_scale):  # noqa: F811
        I *= lam
        I += g
        np.multiply(g, kappa, out=h)
        h += mu * I
        h += nu_scale * g1

    def adaptive_descent(theta, m, v, alpha, rect, eps, bc1, bc2):  # noqa: F811
        theta -= alpha * rect * (m / bc1) / (np.sqrt(v / bc2) + eps)

    def biased_descent(theta, m, alpha, bc1):  # noqa: F811
        theta -= alpha * (m / bc1)

    def slow_weight_update(phi, theta, eta):  # noqa: F811
        phi *= 1.0 - eta
        phi += eta * theta

    def decay_weights(theta, scale):  # noqa: F811
        theta *= scale

    def clip_box(theta, lower, upper):  # noqa: F811
        np.clip(theta, lower, upper, out=theta)


def warm_up(dim: int = 4) -> None:
    """Trigger JIT compilation of every kernel (no-op on the numpy path)."""
    theta = np.zeros(dim)
    a = np.ones(dim)
    b = np.ones(dim)
    ema_update(a.copy(), b, 0.9)
    second_moment_update(a.copy(), b, 0.99)
    descent(theta.copy(), b, 0.1)
    nesterov_direction(theta.copy(), a, b, 0.9)
    dema_update(a.copy(), theta.copy(), b, b, 0.9, 2.0, 4.0, 0.5)
    adaptive_descent(theta.copy(), a, b, 0.1, 1.0, 1e-8, 0.1, 0.001)
    biased_descent(theta.copy(), a, 0.1, 0.1)
    slow_weight_update(a.copy(), b, 0.8)
    decay_weights(a.copy(), 0.99)
    clip_box(a.copy(), -b, b)
