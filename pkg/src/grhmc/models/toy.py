"""Verification targets with known marginals: Gaussian, the max-model and the circle target."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from ..core import BoundaryType, TargetModel

LOG_2PI = math.log(2.0 * math.pi)
E1 = np.array([1.0, 0.0])


def _phi(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)


class StandardNormal(TargetModel):
    """Isotropic standard Gaussian; no constraints."""

    h_max_hint = 0.5

    def __init__(self, dim=2):
        self.dim = int(dim)
        self.boundary_types = ()

    def log_density(self, q, side=None):
        q = np.asarray(q, dtype=float)
        return -0.5 * self.dim * LOG_2PI - 0.5 * float(q @ q)

    def gradient(self, q, side=None):
        return -np.asarray(q, dtype=float)


class FreeParticle(TargetModel):
    """Flat (improper) target: straight-line dynamics, used for exactness checks."""

    def __init__(self, dim=1):
        self.dim = int(dim)
        self.boundary_types = ()

    def log_density(self, q, side=None):
        return 0.0

    def gradient(self, q, side=None):
        return np.zeros(self.dim)


class MaxModel(TargetModel):
    """``q1 ~ N(0, 1)``, ``q2 | q1 ~ N(max(0, c q1), 1)``.

    The density is continuous but its gradient jumps across ``q1 = 0``
    (constraint 0, ``c(q) = q1``; side True is ``q1 >= 0``).
    """

    dim = 2
    boundary_types = (BoundaryType.GRADIENT_JUMP,)
    h_max_hint = 0.5

    def __init__(self, c=1.0):
        if not c > 0:
            raise ValueError(f"max-model slope must be positive, got {c}")
        self.c = float(c)

    def log_density(self, q, side):
        q1, q2 = q[0], q[1]
        r = q2 - self.c * q1 if side[0] else q2
        return -LOG_2PI - 0.5 * (q1 * q1 + r * r)

    def gradient(self, q, side):
        q1, q2 = float(q[0]), float(q[1])
        if side[0]:
            r = q2 - self.c * q1
            return np.array([-q1 + self.c * r, -r])
        return np.array([-q1, -q2])

    def constraints(self, q):
        return np.asarray(q, dtype=float)[..., :1]

    def constraint_gradient(self, q, k):
        return E1.copy()


def max_model(c=1.0):
    return MaxModel(c)


def max_model_marginal_pdf(q2, c=1.0):
    """Marginal density of ``q2`` under the max-model.

    Half the mass has ``q2 ~ N(0, 1)``; the other half is the convolution of
    ``c`` times a half-normal with a standard normal.
    """
    y = np.asarray(q2, dtype=float)
    a = math.sqrt(1.0 + c * c)
    return 0.5 * _phi(y) + _phi(y / a) / a * ndtr(c * y / a)


def max_model_marginal_cdf(q2, c=1.0):
    """CDF of the max-model ``q2`` marginal (closed form for ``c = 1``, quadrature otherwise)."""
    y = np.asarray(q2, dtype=float)
    if c == 1.0:
        return 0.5 * (ndtr(y) + ndtr(y / math.sqrt(2.0)) ** 2)

    def upper(v):
        # P(q1 > 0, c q1 + eps <= v)
        return integrate.quad(lambda x: _phi(x) * ndtr(v - c * x), 0.0, np.inf,
                              epsabs=1e-13, epsrel=1e-12)[0]

    out = 0.5 * ndtr(y) + np.vectorize(upper)(y)
    return out if out.ndim else float(out)


C1_OVER_C2 = math.exp(-0.5 + 0.125)


class CircleTarget(TargetModel):
    """``N(0, I)`` inside the unit circle, ``(c1/c2) N(0, 4 I)`` outside.

    With ``c1 = exp(-1/2)`` and ``c2 = exp(-1/8)`` both pieces together
    integrate to one.  Constraint 0 is ``|q|^2 - 1`` (density jump; side True
    is outside).
    """

    dim = 2
    boundary_types = (BoundaryType.DENSITY_JUMP,)
    h_max_hint = 0.5

    _LOG_OUT = math.log(C1_OVER_C2) - math.log(8.0 * math.pi)

    def log_density(self, q, side):
        r2 = float(q[0] * q[0] + q[1] * q[1])
        if side[0]:
            return self._LOG_OUT - 0.125 * r2
        return -LOG_2PI - 0.5 * r2

    def gradient(self, q, side):
        q = np.asarray(q, dtype=float)
        return -0.25 * q if side[0] else -q

    def constraints(self, q):
        q = np.asarray(q, dtype=float)
        return (np.sum(q * q, axis=-1) - 1.0)[..., None]

    def constraint_gradient(self, q, k):
        return 2.0 * np.asarray(q, dtype=float)


def circle_target():
    return CircleTarget()


def circle_marginal_pdf(q1):
    """Marginal density of ``q1`` under the circle target."""
    x = np.asarray(q1, dtype=float)
    outer = C1_OVER_C2 * _phi(x / 2.0) / 2.0
    half = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    inside = _phi(x) * (2.0 * ndtr(half) - 1.0) + outer * 2.0 * (1.0 - ndtr(half / 2.0))
    return np.where(np.abs(x) >= 1.0, outer, inside)
