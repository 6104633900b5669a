"""Two-regime stochastic volatility with a leverage correlation.

``Z_t = Z_{t-1} + eta_t`` (``Z_0 = 0``, ``eta_t ~ N(0, 1)``) is a latent random
walk whose sign picks the regime: ``sigma_t = sigma_H`` when ``Z_t > 0`` and
``sigma_L`` otherwise.  Observations are ``Y_t = sigma_t eps_t`` with
``corr(eps_t, eta_t) = rho``.

The sampled vector is ``(Z_1..T, rho*, gamma_L, gamma_H)`` with
``rho = tanh(rho*)`` and ``gamma = log sigma^2``.  Each ``Z_t = 0`` is a
density jump; ``gamma_H - gamma_L >= 0`` is a hard wall that keeps the
regimes identified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import BoundaryType, TargetModel, safe_exp
from ..errors import ContractViolation

LOG_2PI = math.log(2.0 * math.pi)
GAMMA_PRIORS = ("exp_gamma", "exp_sigma", "gaussian")


@dataclass(frozen=True)
class VolatilityParams:
    sigma_l: float
    sigma_h: float
    rho_corr: float
    T_len: int

    def __post_init__(self):
        if not (0 < self.sigma_l <= self.sigma_h):
            raise ContractViolation("need 0 < sigma_l <= sigma_h")
        if not -1 < self.rho_corr < 1:
            raise ContractViolation("correlation must lie in (-1, 1)")
        if self.T_len < 1:
            raise ContractViolation("series length must be positive")


def simulate_volatility(params, rng):
    """Simulate ``(Y, Z)`` of length ``T_len``."""
    T = params.T_len
    eta = rng.standard_normal(T)
    xi = rng.standard_normal(T)
    Z = np.cumsum(eta)
    rho = params.rho_corr
    eps = rho * eta + math.sqrt(1.0 - rho * rho) * xi
    sigma = np.where(Z > 0, params.sigma_h, params.sigma_l)
    return sigma * eps, Z


def _log_cosh(x):
    a = abs(x)
    return a + math.log1p(math.exp(-2.0 * a)) - math.log(2.0)


class VolatilityTarget(TargetModel):
    """Posterior of the latent path and regime parameters.

    Parameters
    ----------
    Y : array of float
        Observed series, length ``T >= 2``.
    gamma_prior : {'exp_gamma', 'exp_sigma', 'gaussian'}
        ``exp_gamma`` puts Exp(1) and Exp(0.5) priors on ``gamma_L`` and
        ``gamma_H`` themselves, which confines both to ``gamma >= 0`` (two
        extra hard walls).  ``exp_sigma`` puts the same exponential priors on
        ``sigma_L``, ``sigma_H``.  ``gaussian`` uses ``N(0, 1)`` on each gamma.
    """

    h_max_hint = 0.5

    def __init__(self, Y, gamma_prior="exp_gamma", rates=(1.0, 0.5)):
        Y = np.asarray(Y, dtype=float).reshape(-1)
        if Y.size < 2:
            raise ContractViolation("need a series of length >= 2")
        if not np.all(np.isfinite(Y)):
            raise ContractViolation("series contains non-finite values")
        if gamma_prior not in GAMMA_PRIORS:
            raise ContractViolation(f"unknown gamma prior {gamma_prior!r}")
        self.Y = Y
        self.T = Y.size
        self.dim = self.T + 3
        self.gamma_prior = gamma_prior
        self.rates = tuple(float(r) for r in rates)
        bt = [BoundaryType.DENSITY_JUMP] * self.T + [BoundaryType.HARD_WALL]
        if gamma_prior == "exp_gamma":
            bt += [BoundaryType.HARD_WALL, BoundaryType.HARD_WALL]
        self.boundary_types = tuple(bt)

    @property
    def wall_index(self):
        return self.T

    def _terms(self, q, side):
        T = self.T
        Z = q[:T]
        eta = np.diff(Z, prepend=0.0)
        rs, gl, gh = float(q[T]), float(q[T + 1]), float(q[T + 2])
        rho = math.tanh(rs)
        # 1 - rho^2 = cosh(rs)^-2, floored so far-out trial stages stay finite
        v = max(math.exp(-2.0 * _log_cosh(rs)), 1e-300)
        hi = np.asarray(side[:T], dtype=bool)
        gam = np.where(hi, gh, gl)
        u = self.Y * np.exp(-0.5 * gam)
        w = u - rho * eta
        return eta, rs, gl, gh, rho, v, hi, gam, u, w

    def _gamma_prior(self, g, rate):
        if self.gamma_prior == "exp_gamma":
            return math.log(rate) - rate * g, -rate
        if self.gamma_prior == "exp_sigma":
            s = safe_exp(0.5 * g)
            return math.log(rate) - rate * s + 0.5 * g - math.log(2.0), -0.5 * rate * s + 0.5
        return -0.5 * g * g - 0.5 * LOG_2PI, -g

    def log_density(self, q, side):
        q = np.asarray(q, dtype=float)
        eta, rs, gl, gh, rho, v, hi, gam, u, w = self._terms(q, side)
        T = self.T
        obs = -0.5 * float(np.sum(gam)) - 0.5 * T * (LOG_2PI - 2.0 * _log_cosh(rs)) - 0.5 * float(w @ w) / v
        lat = -0.5 * float(eta @ eta) - 0.5 * T * LOG_2PI
        # scaled Beta(2, 2) on rho, carried to rho* with its Jacobian
        prior_rho = math.log(0.75) - 4.0 * _log_cosh(rs)
        pl = self._gamma_prior(gl, self.rates[0])[0]
        ph = self._gamma_prior(gh, self.rates[1])[0]
        return obs + lat + prior_rho + pl + ph

    def gradient(self, q, side):
        q = np.asarray(q, dtype=float)
        eta, rs, gl, gh, rho, v, hi, gam, u, w = self._terms(q, side)
        T = self.T
        out = np.empty(self.dim)
        e = rho * w / v - eta
        out[:T] = e
        out[:T - 1] -= e[1:]
        d_rho = (T * rho / v + float(eta @ w) / v - rho * float(w @ w) / (v * v))
        out[T] = d_rho * v - 4.0 * rho
        dg = -0.5 + 0.5 * u * w / v
        out[T + 1] = float(np.sum(dg[~hi])) + self._gamma_prior(gl, self.rates[0])[1]
        out[T + 2] = float(np.sum(dg[hi])) + self._gamma_prior(gh, self.rates[1])[1]
        return out

    def constraints(self, q):
        q = np.asarray(q, dtype=float)
        T = self.T
        parts = [q[..., :T], q[..., T + 2:T + 3] - q[..., T + 1:T + 2]]
        if self.gamma_prior == "exp_gamma":
            parts.append(q[..., T + 1:T + 3])
        return np.concatenate(parts, axis=-1)

    def constraint_gradient(self, q, k):
        out = np.zeros(self.dim)
        T = self.T
        if k < T:
            out[k] = 1.0
        elif k == T:
            out[T + 1], out[T + 2] = -1.0, 1.0
        else:
            out[T + 1 + (k - T - 1)] = 1.0
        return out

    def initial_point(self, rng):
        """Start from a moment-based regime split of the data.

        A running mean of ``log Y_t^2`` over 11 points, thresholded at its
        median, labels each time high or low; ``Z_t`` starts at ``+-1`` plus
        a little jitter and each gamma at the log variance of its regime.
        Starting from a prior draw of ``Z`` instead tends to land in the
        pooled mode with ``sigma_L ~ sigma_H``, which the hard wall makes
        slow to leave.
        """
        T = self.T
        ly = np.log(self.Y ** 2 + 1e-12)
        w = min(11, T)
        smooth = np.convolve(ly, np.ones(w) / w, mode="same")
        high = smooth > np.median(smooth)
        if high.all() or not high.any():
            high = np.arange(T) >= T // 2
        Z = np.where(high, 1.0, -1.0) + 0.1 * rng.standard_normal(T)
        gl = math.log(float(np.var(self.Y[~high])) + 1e-12)
        gh = math.log(float(np.var(self.Y[high])) + 1e-12)
        gh = max(gh, gl + 0.1)
        if self.gamma_prior == "exp_gamma":
            gl, gh = max(gl, 0.1), max(gh, max(gl, 0.1) + 0.1)
        return np.concatenate([Z, [0.0, gl, gh]])

    def summaries(self, draws):
        """Posterior draws of ``sigma_L``, ``sigma_H`` and ``rho`` from sampled vectors."""
        D = np.asarray(draws, dtype=float)
        T = self.T
        return {
            "sigma_l": np.exp(0.5 * D[:, T + 1]),
            "sigma_h": np.exp(0.5 * D[:, T + 2]),
            "rho": np.tanh(D[:, T]),
        }


def build_volatility_target(Y, gamma_prior="exp_gamma", rates=(1.0, 0.5)):
    return VolatilityTarget(Y, gamma_prior, rates)
