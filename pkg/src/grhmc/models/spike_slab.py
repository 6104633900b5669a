"""Spike-and-slab style regression through rectified differences.

Each coefficient is ``beta = max(0, b+) - max(0, b-)`` with independent
``b+, b- ~ N(mu, rho^2)``, so ``beta`` is exactly zero with probability
``Phi(-mu/rho)^2`` and the posterior lives on a continuous density whose
gradient jumps at ``b+ = 0`` and ``b- = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from ..core import BoundaryType, TargetModel, safe_exp
from ..errors import ContractViolation, SolverError

LOG_2PI = math.log(2.0 * math.pi)


def _phi(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class SpikeSlabPrior:
    mu: float
    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ContractViolation(f"rho must be positive, got {self.rho}")

    @property
    def r(self):
        return self.mu / self.rho

    @property
    def mu1_star(self):
        """``E max(0, b)`` for ``b ~ N(mu, rho^2)``."""
        return self.rho * _phi(self.r) + self.mu * float(ndtr(self.r))

    @property
    def mu2_star(self):
        """``E max(0, b)^2``."""
        return self.rho * self.mu * _phi(self.r) + (self.mu ** 2 + self.rho ** 2) * float(ndtr(self.r))

    @property
    def rho_star_sq(self):
        return self.mu2_star - self.mu1_star ** 2

    @property
    def c_incl(self):
        a = float(ndtr(self.r))  # 1 - (1 - a)^2 without cancellation
        return a * (2.0 - a)


def spike_slab_stats(mu, rho):
    """Prior ``P(beta = 0)``, ``Var(beta)`` and ``Var(beta | beta != 0)``."""
    pr = SpikeSlabPrior(mu, rho)
    p_zero = float(ndtr(-pr.r)) ** 2
    var_beta = 2.0 * pr.rho_star_sq
    return p_zero, var_beta, var_beta / pr.c_incl


def solve_spike_slab_hyperparams(p_zero_target, var_nonzero_target, tol=1e-8):
    """``(mu, rho)`` matching a prior zero probability and nonzero-coefficient variance.

    ``P(beta = 0)`` depends only on ``r = mu / rho`` through ``Phi(-r)^2``, so
    ``r`` is available in closed form; the conditional variance then scales
    as ``rho^2`` at fixed ``r``.
    """
    if not 0.0 < p_zero_target < 1.0:
        raise ContractViolation(f"p_zero must lie in (0, 1), got {p_zero_target}")
    if not var_nonzero_target > 0:
        raise ContractViolation(f"variance must be positive, got {var_nonzero_target}")
    r = -float(ndtri(math.sqrt(p_zero_target)))
    v_unit = spike_slab_stats(r, 1.0)[2]
    rho = math.sqrt(var_nonzero_target / v_unit)
    mu = r * rho
    pz, _, vn = spike_slab_stats(mu, rho)
    res = (pz - p_zero_target, vn - var_nonzero_target)
    if max(abs(res[0]), abs(res[1]) / max(1.0, var_nonzero_target)) > tol:
        raise SolverError("hyperparameter solve missed its targets", residuals=res)
    return mu, rho


class RegressionTarget(TargetModel):
    """Posterior of ``(b+, b-, gamma)`` for ``y ~ N(X beta, exp(gamma) I)``.

    Constraints ``0..2p-1`` are the coordinates ``b+_i`` then ``b-_i``
    (gradient jumps).  ``likelihood=False`` leaves only the priors, which is
    useful for checking the prior calculus by sampling.
    """

    h_max_hint = 0.5

    def __init__(self, data, mu, rho, likelihood=True):
        X, y = np.asarray(data.X, dtype=float), np.asarray(data.y, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
            raise ContractViolation("regression target needs n >= 1 rows and p >= 1 columns")
        if not rho > 0:
            raise ContractViolation("rho must be positive")
        self.n, self.p = X.shape
        self.dim = 2 * self.p + 1
        self.boundary_types = (BoundaryType.GRADIENT_JUMP,) * (2 * self.p)
        self.mu, self.rho = float(mu), float(rho)
        self.likelihood = bool(likelihood)
        self.XtX = X.T @ X
        self.Xty = X.T @ y
        self.yty = float(y @ y)
        self._eye = np.eye(self.dim)

    def _beta(self, q, side):
        p = self.p
        return q[:p] * side[:p] - q[p:2 * p] * side[p:2 * p]

    def log_density(self, q, side):
        q = np.asarray(q, dtype=float)
        p = self.p
        b = q[:2 * p]
        g = q[-1]
        lp = (-0.5 * float(np.sum((b - self.mu) ** 2)) / self.rho ** 2
              - 2 * p * (math.log(self.rho) + 0.5 * LOG_2PI)
              - 0.5 * g * g - 0.5 * LOG_2PI)
        if self.likelihood:
            beta = self._beta(q, side)
            rss = self.yty - 2.0 * float(beta @ self.Xty) + float(beta @ self.XtX @ beta)
            lp += -0.5 * self.n * (g + LOG_2PI) - 0.5 * rss * safe_exp(-g)
        return lp

    def gradient(self, q, side):
        q = np.asarray(q, dtype=float)
        p = self.p
        out = np.empty(self.dim)
        out[:2 * p] = -(q[:2 * p] - self.mu) / self.rho ** 2
        g = q[-1]
        out[-1] = -g
        if self.likelihood:
            beta = self._beta(q, side)
            xr = self.Xty - self.XtX @ beta
            rss = self.yty - 2.0 * float(beta @ self.Xty) + float(beta @ self.XtX @ beta)
            e = safe_exp(-g)
            db = xr * e
            out[:p] += db * side[:p]
            out[p:2 * p] -= db * side[p:2 * p]
            out[-1] += -0.5 * self.n + 0.5 * rss * e
        return out

    def constraints(self, q):
        return np.asarray(q, dtype=float)[..., :2 * self.p]

    def constraint_gradient(self, q, k):
        return self._eye[k].copy()


def build_regression_target(data, mu, rho, likelihood=True):
    return RegressionTarget(data, mu, rho, likelihood)


def _draw_matrix(chain):
    return np.asarray(getattr(chain, "draws", chain), dtype=float)


def coefficients(chain, p):
    """Per-draw coefficients ``max(0, b+) - max(0, b-)``."""
    D = _draw_matrix(chain)
    if D.ndim != 2 or D.shape[1] != 2 * p + 1:
        raise ContractViolation(f"draws have {D.shape[-1]} columns, expected {2 * p + 1}")
    return np.maximum(D[:, :p], 0.0) - np.maximum(D[:, p:2 * p], 0.0)


def posterior_zero_fraction(chain, data):
    """Fraction of draws in which each coefficient is exactly zero (``b+ <= 0`` and ``b- <= 0``)."""
    p = data.p if hasattr(data, "p") else int(data)
    D = _draw_matrix(chain)
    if D.ndim != 2 or D.shape[1] != 2 * p + 1:
        raise ContractViolation(f"draws have {D.shape[-1]} columns, expected {2 * p + 1}")
    zero = (D[:, :p] <= 0) & (D[:, p:2 * p] <= 0)
    return zero.mean(axis=0)


def rescale_coefficients(beta_scaled, data):
    """Map coefficients of the standardized problem back to the original units.

    Returns ``(beta0, beta)`` with ``beta_i = s_y beta_i^s / s_{x_i}`` and
    ``beta0 = ybar - sum_i beta_i xbar_i``.  ``beta_scaled`` may carry a
    leading draw axis.
    """
    bs = np.asarray(beta_scaled, dtype=float)
    if bs.shape[-1] != len(data.x_sd):
        raise ContractViolation(f"got {bs.shape[-1]} coefficients for {len(data.x_sd)} covariates")
    beta = data.y_sd * bs / np.asarray(data.x_sd)
    beta0 = data.y_mean - beta @ np.asarray(data.x_mean)
    return beta0, beta


def simulate_regression(n, p, beta, noise_sd, rng):
    """Gaussian design with independent columns and ``y = X beta + noise``."""
    X = rng.standard_normal((n, p))
    y = X @ np.asarray(beta, dtype=float) + noise_sd * rng.standard_normal(n)
    return X, y
