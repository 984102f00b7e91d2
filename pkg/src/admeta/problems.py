"""Desk-scale differentiable objectives with known structure.

All problems expose ``dim``, ``loss(theta)``, ``grad(theta)`` and
``initial_point(rng)``; problems with a closed-form minimizer also expose
``optimum()``. Stochastic problems additionally implement
``stochastic_grad(theta, rng)`` returning an unbiased gradient estimate.
"""
from __future__ import annotations

import csv

import numpy as np

from .core import as_params


class UnsupportedStochastic(TypeError):
    """Raised when a problem has no mini-batch gradient."""


class QuadraticValley:
    """Ill-conditioned convex quadratic f(theta) = 0.5 * sum(a_i theta_i^2).

    The narrow curved descent region ("valley") of badly conditioned
    quadratics is the classic stress test for momentum methods. With
    noise_std > 0 the problem also serves seeded noisy gradients
    g + noise_std*N(0, I); the analytic loss/grad stay exact.
    """

    def __init__(self, diag=(1.0, 100.0), noise_std: float = 0.0):
        self.diag = as_params(diag)
        if np.any(self.diag <= 0.0):
            raise ValueError("valley curvature entries must be > 0")
        if noise_std < 0.0:
            raise ValueError("noise_std must be >= 0")
        self.noise_std = float(noise_std)

    @property
    def dim(self) -> int:
        return len(self.diag)

    @property
    def condition_number(self) -> float:
        return float(self.diag.max() / self.diag.min())

    def loss(self, theta) -> float:
        theta = as_params(theta, self.dim)
        return float(0.5 * np.sum(self.diag * theta * theta))

    def grad(self, theta) -> np.ndarray:
        theta = as_params(theta, self.dim)
        return self.diag * theta

    def stochastic_grad(self, theta, rng: np.random.Generator) -> np.ndarray:
        if self.noise_std == 0.0:
            raise UnsupportedStochastic("valley with noise_std=0 has no stochastic gradient")
        return self.grad(theta) + self.noise_std * rng.standard_normal(self.dim)

    def optimum(self) -> np.ndarray:
        return np.zeros(self.dim)

    def initial_point(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-2.0, 2.0, self.dim)


class Rosenbrock:
    """Uncoupled-pairs Rosenbrock function in even dimension.

    f = sum over pairs of 100*(x_{2i+1} - x_{2i}^2)^2 + (1 - x_{2i})^2;
    the global optimum is the all-ones vector with f = 0.
    """

    def __init__(self, dim: int = 2):
        if dim < 2 or dim % 2 != 0:
            raise ValueError(f"dimension must be even and >= 2, got {dim}")
        self._dim = int(dim)

    @property
    def dim(self) -> int:
        return self._dim

    def loss(self, theta) -> float:
        theta = as_params(theta, self.dim)
        x, y = theta[0::2], theta[1::2]
        return float(np.sum(100.0 * (y - x * x) ** 2 + (1.0 - x) ** 2))

    def grad(self, theta) -> np.ndarray:
        theta = as_params(theta, self.dim)
        x, y = theta[0::2], theta[1::2]
        g = np.empty(self.dim)
        g[0::2] = -400.0 * x * (y - x * x) - 2.0 * (1.0 - x)
        g[1::2] = 200.0 * (y - x * x)
        return g

    def optimum(self) -> np.ndarray:
        return np.ones(self.dim)

    def initial_point(self, rng: np.random.Generator) -> np.ndarray:
        # Classic (-1.2, 1) start per pair, with a small seeded offset.
        base = np.tile([-1.2, 1.0], self.dim // 2)
        return base + 0.1 * rng.uniform(-1.0, 1.0, self.dim)


class OnlineQuadraticStream:
    """Online convex stream of diagonal quadratics on a box.

    Round t presents f_t(theta) = 0.5*sum(a_t theta^2) + c_t . theta with
    seeded a_t, c_t. The offline comparator argmin over the box of
    sum_t f_t has a per-coordinate closed form. The average objective also
    makes the stream usable as a stochastic convex problem: grad() is the
    gradient of the mean round loss and stochastic_grad() returns the
    gradient of one uniformly drawn round.
    """

    def __init__(self, seed: int, rounds: int, dim: int = 2,
                 curvature: tuple[float, float] = (0.5, 2.0),
                 linear_amp: float = 1.0, box_radius: float = 1.0):
        if rounds < 1:
            raise ValueError("need at least one round")
        lo, hi = curvature
        if not 0.0 < lo <= hi:
            raise ValueError("curvature bounds must satisfy 0 < lo <= hi")
        rng = np.random.default_rng(seed)
        self.a = rng.uniform(lo, hi, (rounds, dim))
        self.c = rng.uniform(-linear_amp, linear_amp, (rounds, dim))
        self.rounds = int(rounds)
        self._dim = int(dim)
        self.box_radius = float(box_radius)

    @property
    def dim(self) -> int:
        return self._dim

    def _check_round(self, t: int) -> None:
        if not 1 <= t <= self.rounds:
            raise IndexError(f"round {t} outside 1..{self.rounds}")

    def round_loss(self, t: int, theta) -> float:
        self._check_round(t)
        theta = as_params(theta, self.dim)
        a, c = self.a[t - 1], self.c[t - 1]
        return float(0.5 * np.sum(a * theta * theta) + np.sum(c * theta))

    def round_grad(self, t: int, theta) -> np.ndarray:
        self._check_round(t)
        theta = as_params(theta, self.dim)
        return self.a[t - 1] * theta + self.c[t - 1]

    def loss(self, theta) -> float:
        theta = as_params(theta, self.dim)
        a_bar, c_bar = self.a.mean(axis=0), self.c.mean(axis=0)
        return float(0.5 * np.sum(a_bar * theta * theta) + np.sum(c_bar * theta))

    def grad(self, theta) -> np.ndarray:
        theta = as_params(theta, self.dim)
        return self.a.mean(axis=0) * theta + self.c.mean(axis=0)

    def stochastic_grad(self, theta, rng: np.random.Generator) -> np.ndarray:
        t = int(rng.integers(1, self.rounds + 1))
        return self.round_grad(t, theta)

    def comparator(self) -> np.ndarray:
        """Offline optimum of the realized sequence, clamped to the box."""
        unconstrained = -self.c.sum(axis=0) / self.a.sum(axis=0)
        return np.clip(unconstrained, -self.box_radius, self.box_radius)

    def optimum(self) -> np.ndarray:
        return self.comparator()

    def initial_point(self, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(self.dim)


def gen_synthetic_dataset(seed: int, n: int, separation: float = 2.0,
                          spread: float = 0.7) -> tuple[np.ndarray, np.ndarray]:
    """Two seeded Gaussian clusters with Bernoulli(0.5) labels.

    Returns (features (n, 2), labels (n,) in {0, 1}).
    """
    if n < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, n)
    centers = np.array([[-separation / 2.0, -separation / 2.0],
                        [separation / 2.0, separation / 2.0]])
    features = centers[labels] + spread * rng.standard_normal((n, 2))
    return features, labels


def export_dataset_csv(path, features: np.ndarray, labels: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(features.shape[1])] + ["label"])
        for row, lab in zip(features, labels):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


class TinyMlp:
    """Two-layer tanh classifier with hand-coded backprop.

    Architecture in -> hidden -> out with tanh hidden activation and
    softmax cross-entropy loss over an in-memory dataset. Gradients are
    written out explicitly (no autodiff) so the finite-difference checker
    is a genuine independent oracle.
    """

    def __init__(self, features: np.ndarray, labels: np.ndarray,
                 hidden: int = 16, batch_size: int = 32):
        self.X = np.asarray(features, dtype=np.float64)
        self.y = np.asarray(labels, dtype=np.int64)
        if self.X.ndim != 2 or len(self.X) != len(self.y):
            raise ValueError("features must be (n, d) with one label per row")
        self.n_in = self.X.shape[1]
        self.n_hidden = int(hidden)
        self.n_out = int(self.y.max()) + 1
        self.batch_size = int(batch_size)

    @classmethod
    def synthetic(cls, seed: int = 0, n: int = 1000, hidden: int = 16,
                  batch_size: int = 32) -> "TinyMlp":
        X, y = gen_synthetic_dataset(seed, n)
        return cls(X, y, hidden=hidden, batch_size=batch_size)

    @property
    def dim(self) -> int:
        return (self.n_in * self.n_hidden + self.n_hidden
                + self.n_hidden * self.n_out + self.n_out)

    def _unpack(self, theta: np.ndarray):
        i = 0
        w1 = theta[i:i + self.n_in * self.n_hidden].reshape(self.n_in, self.n_hidden)
        i += w1.size
        b1 = theta[i:i + self.n_hidden]
        i += b1.size
        w2 = theta[i:i + self.n_hidden * self.n_out].reshape(self.n_hidden, self.n_out)
        i += w2.size
        b2 = theta[i:i + self.n_out]
        return w1, b1, w2, b2

    def _forward(self, theta: np.ndarray, idx: np.ndarray):
        w1, b1, w2, b2 = self._unpack(theta)
        x = self.X[idx]
        hidden = np.tanh(x @ w1 + b1)
        logits = hidden @ w2 + b2
        # log-softmax, numerically stable
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        log_probs = shifted - log_z
        return x, hidden, log_probs

    def _loss_grad(self, theta: np.ndarray, idx: np.ndarray):
        w1, b1, w2, b2 = self._unpack(theta)
        x, hidden, log_probs = self._forward(theta, idx)
        labels = self.y[idx]
        n = len(idx)
        loss = -float(log_probs[np.arange(n), labels].mean())
        # backprop
        probs = np.exp(log_probs)
        d_logits = probs
        d_logits[np.arange(n), labels] -= 1.0
        d_logits /= n
        g_w2 = hidden.T @ d_logits
        g_b2 = d_logits.sum(axis=0)
        d_hidden = (d_logits @ w2.T) * (1.0 - hidden * hidden)
        g_w1 = x.T @ d_hidden
        g_b1 = d_hidden.sum(axis=0)
        grad = np.concatenate([g_w1.ravel(), g_b1, g_w2.ravel(), g_b2])
        return loss, grad

    def loss(self, theta) -> float:
        theta = as_params(theta, self.dim)
        _, _, log_probs = self._forward(theta, np.arange(len(self.X)))
        labels = self.y
        return -float(log_probs[np.arange(len(labels)), labels].mean())

    def grad(self, theta) -> np.ndarray:
        theta = as_params(theta, self.dim)
        return self._loss_grad(theta, np.arange(len(self.X)))[1]

    def stochastic_grad(self, theta, rng: np.random.Generator,
                        batch_size: int | None = None) -> np.ndarray:
        theta = as_params(theta, self.dim)
        bs = self.batch_size if batch_size is None else int(batch_size)
        if bs >= len(self.X):
            idx = np.arange(len(self.X))  # full batch: exactly the mean gradient
        else:
            idx = rng.choice(len(self.X), size=bs, replace=False)
        return self._loss_grad(theta, idx)[1]

    def accuracy(self, theta) -> float:
        theta = as_params(theta, self.dim)
        _, _, log_probs = self._forward(theta, np.arange(len(self.X)))
        return float((log_probs.argmax(axis=1) == self.y).mean())

    def optimum(self):
        return None

    def initial_point(self, rng: np.random.Generator) -> np.ndarray:
        w1 = rng.standard_normal(self.n_in * self.n_hidden) / np.sqrt(self.n_in)
        b1 = np.zeros(self.n_hidden)
        w2 = rng.standard_normal(self.n_hidden * self.n_out) / np.sqrt(self.n_hidden)
        b2 = np.zeros(self.n_out)
        return np.concatenate([w1, b1, w2, b2])


# ---------------------------------------------------------------------------
# Problem registry for the CLI
# ---------------------------------------------------------------------------

def make_problem(spec: str, steps: int | None = None, seed: int | None = None):
    """Build a problem from its CLI string.

    Grammar (segments separated by ':'):
      valley[:d1,d2,...][:noise=S]   e.g. valley:1,100  valley:0.001,0.8:noise=0.001
      rosenbrock[:dim]
      online[:dim]                   rounds = run steps, stream seeded by run seed
      tinymlp[:n]
    """
    parts = [p.strip() for p in spec.strip().split(":") if p.strip()]
    if not parts:
        raise ValueError("empty problem spec")
    kind, args = parts[0].lower(), parts[1:]
    if kind == "valley":
        diag, noise = (1.0, 100.0), 0.0
        for arg in args:
            if arg.startswith("noise="):
                noise = float(arg.split("=", 1)[1])
            else:
                diag = tuple(float(v) for v in arg.split(","))
        return QuadraticValley(diag, noise_std=noise)
    if kind == "rosenbrock":
        dim = int(args[0]) if args else 2
        return Rosenbrock(dim)
    if kind == "online":
        if steps is None or seed is None:
            raise ValueError("online stream needs run steps and seed")
        dim = int(args[0]) if args else 2
        return OnlineQuadraticStream(seed=seed, rounds=steps, dim=dim)
    if kind == "tinymlp":
        n = int(args[0]) if args else 1000
        return TinyMlp.synthetic(seed=0, n=n)
    raise ValueError(f"unknown problem {parts[0]!r}")
