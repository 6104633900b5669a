"""One-hidden-layer ReLU network regression posterior.

Parameter layout: ``(gamma, alpha, w*_1..K, delta_1..K, beta_1..K)`` with each
``beta_k`` of length ``p``; ``sigma^2 = exp(gamma)`` and ``w_k = exp(w*_k)``.
The mean for row ``j`` is ``alpha + sum_k w_k max(0, delta_k + X_j . beta_k)``.
Every pre-activation ``eta_kj`` is a gradient-jump constraint (index
``k * n + j``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import BoundaryType, TargetModel, safe_exp
from ..errors import ContractViolation

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class BnnSpec:
    K: int
    p: int

    @property
    def dim(self):
        return 2 + 2 * self.K + self.K * self.p

    def unpack(self, q):
        """Split a parameter vector (or stack of them) into its named blocks."""
        q = np.asarray(q, dtype=float)
        K, p = self.K, self.p
        return {
            "gamma": q[..., 0],
            "alpha": q[..., 1],
            "w_star": q[..., 2:2 + K],
            "delta": q[..., 2 + K:2 + 2 * K],
            "beta": q[..., 2 + 2 * K:].reshape(q.shape[:-1] + (K, p)),
        }

    def pack(self, gamma, alpha, w_star, delta, beta):
        return np.concatenate([[gamma, alpha], np.ravel(w_star), np.ravel(delta), np.ravel(beta)])


class BnnTarget(TargetModel):
    h_max_hint = 0.5

    def __init__(self, X, y, K):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ContractViolation(f"design {X.shape} does not match response length {y.size}")
        n, p = X.shape
        if n < 1 or p < 1 or K < 1:
            raise ContractViolation("need n, p, K >= 1")
        self.X, self.y = X, y
        self.n, self.p, self.K = n, p, int(K)
        self.spec = BnnSpec(self.K, p)
        self.dim = self.spec.dim
        self.boundary_types = (BoundaryType.GRADIENT_JUMP,) * (self.K * n)

    def _eta(self, q):
        u = self.spec.unpack(q)
        return u, u["delta"][..., :, None] + np.einsum("...kp,np->...kn", u["beta"], self.X)

    def _active(self, side):
        return np.asarray(side, dtype=float).reshape(self.K, self.n)

    def log_density(self, q, side):
        u, eta = self._eta(q)
        A = self._active(side)
        w = np.exp(u["w_star"])
        mu = u["alpha"] + w @ (eta * A)
        g = float(u["gamma"])
        r = self.y - mu
        lik = -0.5 * self.n * (g + LOG_2PI) - 0.5 * float(r @ r) * safe_exp(-g)
        # sigma ~ Exp(1) pushed to gamma = log sigma^2
        prior_g = -safe_exp(0.5 * g) + 0.5 * g - math.log(2.0)
        rest = np.asarray(q, dtype=float)[1:]
        prior_rest = -0.5 * float(rest @ rest) - 0.5 * rest.size * LOG_2PI
        return lik + prior_g + prior_rest

    def gradient(self, q, side):
        q = np.asarray(q, dtype=float)
        u, eta = self._eta(q)
        A = self._active(side)
        K = self.K
        w = np.exp(u["w_star"])
        h = eta * A
        g = float(u["gamma"])
        r = self.y - (u["alpha"] + w @ h)
        e = r * safe_exp(-g)
        ea = A * e
        out = -q.copy()
        out[0] = -0.5 * self.n + 0.5 * float(r @ r) * safe_exp(-g) - 0.5 * safe_exp(0.5 * g) + 0.5
        out[1] += e.sum()
        out[2:2 + K] += w * (h @ e)
        out[2 + K:2 + 2 * K] += w * ea.sum(axis=1)
        out[2 + 2 * K:] += (w[:, None] * (ea @ self.X)).ravel()
        return out

    def constraints(self, q):
        _, eta = self._eta(q)
        return eta.reshape(eta.shape[:-2] + (self.K * self.n,))

    def constraint_gradient(self, q, k):
        kk, j = divmod(int(k), self.n)
        out = np.zeros(self.dim)
        out[2 + self.K + kk] = 1.0
        start = 2 + 2 * self.K + kk * self.p
        out[start:start + self.p] = self.X[j]
        return out


def build_bnn_target(X, y, K):
    return BnnTarget(X, y, K)


def simulate_bnn_data(rng, n=100, alpha=0.0, delta=(0.5, -0.5), beta=((1.0, 0.0), (-0.1, 1.0)),
                      w=(1.0, 1.0), sigma=0.1):
    """Draw ``(X, y)`` from the network with standard-normal inputs."""
    beta = np.asarray(beta, dtype=float)
    K, p = beta.shape
    X = rng.standard_normal((n, p))
    eta = np.asarray(delta, dtype=float)[:, None] + beta @ X.T
    mu = alpha + np.asarray(w, dtype=float) @ np.maximum(eta, 0.0)
    y = mu + sigma * rng.standard_normal(n)
    return X, y
