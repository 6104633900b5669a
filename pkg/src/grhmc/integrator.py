"""Bogacki-Shampine 3(2) stepping with embedded error control and Hermite dense output."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, IntegrationFailure


@dataclass(frozen=True)
class IntegratorConfig:
    abs_tol: float = 1e-4
    rel_tol: float = 1e-4
    h_init: float = 1e-2
    h_max: float = 1.0
    h_min: float = 1e-10
    safety: float = 0.9
    growth_cap: float = 5.0
    shrink_cap: float = 0.2

    def __post_init__(self):
        if not (0 < self.h_min <= self.h_init <= self.h_max):
            raise ContractViolation("need 0 < h_min <= h_init <= h_max")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ContractViolation("tolerances must be positive")
        if not (0 < self.shrink_cap < 1 < self.growth_cap):
            raise ContractViolation("need 0 < shrink_cap < 1 < growth_cap")


@dataclass
class StepRecord:
    """One Runge-Kutta step from ``t0`` to ``t0 + h``.

    ``f1`` is the derivative at ``y1`` and doubles as the first stage of the
    next step (FSAL).
    """

    t0: float
    h: float
    y0: np.ndarray
    y1: np.ndarray
    f0: np.ndarray
    f1: np.ndarray
    err_estimate: np.ndarray
    accepted: bool = False

    @property
    def t1(self):
        return self.t0 + self.h


def rk_step(y0, t0, h, field, f0=None):
    """Take one BS23 step of size ``h``.

    Parameters
    ----------
    y0 : ndarray
        State at ``t0``.
    field : callable
        ``field(t, y)`` returning ``dy/dt``.
    f0 : ndarray, optional
        ``field(t0, y0)`` if already known (FSAL reuse).

    Returns
    -------
    StepRecord
        ``accepted`` is left False; the caller decides via :func:`step_controller`.
    """
    if not h > 0:
        raise ContractViolation(f"step size must be positive, got {h}")
    if f0 is None:
        f0 = field(t0, y0)
    k2 = field(t0 + 0.5 * h, y0 + (0.5 * h) * f0)
    k3 = field(t0 + 0.75 * h, y0 + (0.75 * h) * k2)
    y1 = y0 + h * ((2.0 / 9.0) * f0 + (1.0 / 3.0) * k2 + (4.0 / 9.0) * k3)
    f1 = field(t0 + h, y1)
    # embedded weights sum to zero; written as differences so equal stages give exactly 0
    err = h * ((-5.0 / 72.0) * (f0 - f1) + (1.0 / 12.0) * (k2 - f1) + (1.0 / 9.0) * (k3 - f1))
    return StepRecord(t0, h, y0, y1, f0, f1, err)


def error_norm(step, cfg):
    """RMS of the error estimate weighted by ``abs_tol + rel_tol * max(|y0|, |y1|)``."""
    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(step.y0), np.abs(step.y1))
    r = step.err_estimate / scale
    return math.sqrt(float(r @ r) / r.size)


def step_controller(err_norm, h, cfg):
    """Accept/reject decision and next step size for an error norm of ``err_norm``.

    Raises
    ------
    IntegrationFailure
        If a rejected step would require ``h`` below ``cfg.h_min``.
    """
    accept = err_norm <= 1.0
    if err_norm == 0.0:
        factor = cfg.growth_cap
    else:
        factor = min(cfg.growth_cap, max(cfg.shrink_cap, cfg.safety * err_norm ** (-1.0 / 3.0)))
    h_next = h * factor
    if not accept and h_next < cfg.h_min:
        raise IntegrationFailure(
            f"step size {h_next:.3e} fell below h_min={cfg.h_min:.3e} (error norm {err_norm:.3e})")
    return accept, min(cfg.h_max, max(cfg.h_min, h_next))


def hermite_weights(sigma):
    s = sigma if isinstance(sigma, float) else np.asarray(sigma, dtype=float)
    s2 = s * s
    s3 = s2 * s
    return (2 * s3 - 3 * s2 + 1, s3 - 2 * s2 + s, -2 * s3 + 3 * s2, s3 - s2)


def dense_eval(step, sigma):
    """Cubic Hermite interpolant of the step at fraction ``sigma`` in [0, 1].

    ``sigma`` may be a scalar or 1-D array; the result has shape ``(2d,)`` or
    ``(len(sigma), 2d)``.
    """
    if np.ndim(sigma) == 0:
        s = float(sigma)
        if not 0.0 <= s <= 1.0:
            raise ContractViolation(f"sigma outside [0, 1]: {sigma!r}")
        a, b, c, e = hermite_weights(s)
        h = step.h
        return a * step.y0 + (b * h) * step.f0 + c * step.y1 + (e * h) * step.f1
    sig = np.asarray(sigma, dtype=float)
    if sig.size and (sig.min() < 0.0 or sig.max() > 1.0):
        raise ContractViolation(f"sigma outside [0, 1]: {sigma!r}")
    return dense_matrix(sig) @ hermite_basis(step)


def dense_matrix(sigma):
    """Rows of Hermite weights ``(h00, h10, h01, h11)`` for each ``sigma``."""
    return np.stack(hermite_weights(np.asarray(sigma, dtype=float)), axis=-1)


def hermite_basis(step):
    """The four stacked vectors ``(y0, h f0, y1, h f1)`` the dense output combines."""
    h = step.h
    return np.stack([step.y0, h * step.f0, step.y1, h * step.f1])


def integrate_fixed(y0, t0, t_end, h, field):
    """Plain fixed-step BS23 from ``t0`` to ``t_end`` (last step shortened to land exactly)."""
    y = np.asarray(y0, dtype=float)
    t = t0
    f = None
    while True:
        hh, last = next_fixed_step(t, t_end, h)
        if hh <= 0:
            return y
        step = rk_step(y, t, hh, field, f)
        y, f = step.y1, step.f1
        t = t_end if last else t + hh


def next_fixed_step(t, t_end, h):
    """Size of the next fixed step toward ``t_end`` and whether it is the last one.

    A remainder shorter than ``1e-9 * h`` is absorbed into the final step.
    """
    remaining = t_end - t
    if remaining <= 1e-12 * h:
        return 0.0, True
    if remaining <= h * (1.0 + 1e-9):
        return remaining, True
    return h, False
