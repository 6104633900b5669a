"""Burn-in adaptation of the refresh rate and of the standardization map.

The refresh rate is the censored-exponential maximum likelihood estimate
built from U-turn times: each interval between resets contributes its
length ``omega*`` and an indicator of whether a U-turn was actually seen
(``U = 1``) or the interval was cut short by a refresh or reflection
(``U = 0``).  The standardizer comes from running moments of positions
observed at fixed spacing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Standardizer

LAMBDA_MIN = 0.05
SCALE_FLOOR = 1e-3
RESTANDARDIZE_FRACTIONS = (0.1, 0.2, 0.4, 0.8)


@dataclass
class LambdaEstimator:
    sum_indicators: int = 0
    sum_times: float = 0.0
    lambda_min: float = LAMBDA_MIN
    lambda_current: float = LAMBDA_MIN
    degenerate: int = 0

    def __post_init__(self):
        if not self.lambda_min > 0:
            raise ValueError("lambda_min must be positive")

    def _update(self):
        if self.sum_indicators > 0:
            self.lambda_current = max(self.lambda_min, self.sum_indicators / self.sum_times)
        else:
            self.lambda_current = self.lambda_min


def record_interval(est, omega_star, observed):
    """Add one (possibly censored) U-turn interval and refresh the estimate."""
    if not omega_star > 0:
        est.degenerate += 1
        return est
    est.sum_times += float(omega_star)
    est.sum_indicators += int(bool(observed))
    est._update()
    return est


def on_reflection_reset(est, tracker, t, qbar):
    """Close the tracker's running interval as censored at time ``t`` and restart it at ``qbar``.

    An interval shorter than ``1e-12`` is dropped rather than recorded.
    """
    elapsed = t - tracker.t_ref
    if tracker.active and elapsed >= 1e-12:
        record_interval(est, elapsed, False)
    tracker.reset(t, qbar)
    return est


@dataclass
class MomentAccumulator:
    """Welford running mean and sum of squared deviations."""

    dim: int
    count: int = 0
    mean: np.ndarray = field(default=None)
    m2: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.dim)
        if self.m2 is None:
            self.m2 = np.zeros(self.dim)


def update_moments(acc, q):
    q = np.asarray(q, dtype=float)
    acc.count += 1
    delta = q - acc.mean
    acc.mean = acc.mean + delta / acc.count
    acc.m2 = acc.m2 + delta * (q - acc.mean)
    return acc


def read_standardizer(acc, floor=SCALE_FLOOR):
    """Standardizer from the accumulated moments; identity with fewer than two observations."""
    if acc.count < 2:
        return Standardizer.identity(acc.dim)
    sd = np.sqrt(np.maximum(acc.m2, 0.0) / (acc.count - 1))
    return Standardizer(acc.mean.copy(), np.maximum(floor, sd))


def restandardize(state, old, new, q_ref=None):
    """Re-express ``state`` (and a U-turn reference point) under a new standardizer.

    Position maps through the model coordinates; momentum uses the canonical
    rule ``p_new = (s_new / s_old) * p_old``, which keeps the model-space
    momentum ``pbar / s`` unchanged.
    """
    out = state.copy()
    q = old.to_model(state.qbar)
    out.qbar = new.to_standard(q)
    out.pbar = state.pbar * (new.s / old.s)
    ref = None if q_ref is None else new.to_standard(old.to_model(q_ref))
    return out, ref
