"""Event functions and location of the earliest event inside an accepted step.

Four event kinds are tracked: boundary crossings (constraint sign changes on
the dense output), scheduled momentum refreshes, U-turns of the displacement
momentum product, and scheduled sample emissions.  When several occur at the
same time the priority is boundary, refresh, U-turn, sample.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import PhasePoint
from .errors import ConfigError, IntegrationFailure
from .integrator import dense_eval, dense_matrix, hermite_basis

CHECKPOINTS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
_W = dense_matrix(CHECKPOINTS)
MASK_TIME = 1e-8
MAX_ROOT_ITER = 200


class EventKind(enum.IntEnum):
    # value doubles as tie-break priority
    BOUNDARY = 0
    REFRESH = 1
    UTURN = 2
    SAMPLE = 3


@dataclass
class Event:
    t_event: float
    kind: EventKind
    state: PhasePoint
    index: int = -1
    sigma: float = 0.0


@dataclass
class UTurnTracker:
    """Reference point for the U-turn condition ``(qbar - q_ref) . pbar < 0``."""

    q_ref: np.ndarray
    t_ref: float = 0.0
    active: bool = True

    def reset(self, t, qbar):
        self.q_ref = np.array(qbar, dtype=float)
        self.t_ref = t
        self.active = True


def exponential_inverse_cdf(u, lam):
    """Inverse-CDF map from ``u`` in (0, 1] to an Exponential(lam) time."""
    return -math.log(u) / lam


def next_refresh_time(lam, rng):
    """Waiting time until the next momentum refresh at constant rate ``lam``."""
    if not lam > 0:
        raise ConfigError(f"refresh rate must be positive, got {lam}")
    return exponential_inverse_cdf(1.0 - rng.random(), lam)


def uturn_value(state, tracker):
    return float((state.qbar - tracker.q_ref) @ state.pbar)


def boundary_values(state, model, std):
    """All constraint values at the state's (unstandardized) position."""
    return np.atleast_1d(model.constraints(std.to_model(state.qbar)))


def _illinois(g, a, b, ga, gb, ftol, xtol):
    """Root of ``g`` on ``[a, b]`` given ``ga >= 0 > gb``; false position with the Illinois fix."""
    last = 0
    for _ in range(MAX_ROOT_ITER):
        if b - a <= xtol:
            return (a, ga) if abs(ga) < abs(gb) else (b, gb)
        x = (a * gb - b * ga) / (gb - ga)
        if not (a < x < b):
            x = 0.5 * (a + b)
        gx = g(x)
        if abs(gx) <= ftol:
            return x, gx
        if gx < 0:
            b, gb = x, gx
            if last == -1:
                ga *= 0.5
            last = -1
        else:
            a, ga = x, gx
            if last == 1:
                gb *= 0.5
            last = 1
    raise IntegrationFailure("event root finder did not converge",
                             dump={"a": a, "b": b, "ga": ga, "gb": gb})


def _state_at(step, sigma, d, side, y=None):
    if y is None:
        y = dense_eval(step, sigma)
    return PhasePoint(step.t0 + sigma * step.h, y[:d].copy(), y[d:].copy(),
                      None if side is None else np.array(side, dtype=bool))


def locate_first_event(step, d, *, side=None, constraint_fn=None, tracker=None,
                       refresh_t=None, sample_ts=(), masks=None, root_rtol=1e-10):
    """Earliest event within ``[step.t0, step.t0 + step.h]``, or None.

    Parameters
    ----------
    step : StepRecord
        An accepted step; its dense output is the trajectory inside the step.
    d : int
        Position dimension (the step state has length ``2 d``).
    side : ndarray of bool
        Region side pattern frozen for this step.
    constraint_fn : callable
        Maps standardized positions of shape ``(n, d)`` to constraint values
        of shape ``(n, K)``.
    tracker : UTurnTracker, optional
        Monitored only while ``tracker.active``.
    refresh_t : float, optional
        Scheduled refresh time.
    sample_ts : sequence of float
        Scheduled emission times; those in ``(t0, t0 + h]`` are candidates.
    masks : dict, optional
        ``{k: t_release}`` for constraints hit by the previous boundary event.
        Constraint ``k`` is ignored before ``t_release`` or before it has
        moved more than ``10 * root_tol`` into its region, whichever first.
    root_rtol : float
        Boundary roots satisfy ``|c_k| <= root_rtol * (1 + |c_k(t0)|)``.
    """
    t0, h = step.t0, step.h
    cands = []
    Y = None

    if constraint_fn is not None or (tracker is not None and tracker.active):
        Y = _W @ hermite_basis(step)
        Y[0] = step.y0
        Y[-1] = step.y1

    if constraint_fn is not None and side is not None and len(side):
        C = np.asarray(constraint_fn(Y[:, :d]))
        sign = np.where(side, 1.0, -1.0)
        G = C * sign
        tol = root_rtol * (1.0 + np.abs(C[0]))
        lo = {}
        if masks:
            for k, t_rel in masks.items():
                sig_rel = (t_rel - t0) / h
                released = (CHECKPOINTS >= sig_rel) | (G[:, k] > 10.0 * tol[k])
                released = np.logical_or.accumulate(released)
                G[~released, k] = np.inf
                lo[k] = max(0.0, sig_rel)
        best = None
        if G[1:].min() < 0:
            # masked rows hold inf, so a crossing row needs a finite left end
            # or the release point inside it
            cross = (G[:-1] >= 0) & (G[1:] < 0)
            for k in np.flatnonzero(cross.any(axis=0)):
                k = int(k)
                i = int(np.argmax(cross[:, k]))
                if best is not None and CHECKPOINTS[i] >= best[0]:
                    continue
                sk = sign[k]

                def g(sig, k=k, sk=sk):
                    y = dense_eval(step, sig)
                    return sk * float(np.asarray(constraint_fn(y[None, :d]))[0, k])

                a, ga = CHECKPOINTS[i], G[i, k]
                if not np.isfinite(ga):
                    a = min(max(a, lo.get(k, a)), CHECKPOINTS[i + 1])
                    ga = g(a)
                    if ga < -tol[k]:
                        # crossed again while masked: report at the release point
                        if best is None or a < best[0]:
                            best = (a, k)
                        continue
                b, gb = CHECKPOINTS[i + 1], G[i + 1, k]
                # still touching the boundary at the left end: bracket the
                # sign change itself instead of accepting the touch point
                ftol = 0.0 if ga <= tol[k] else tol[k]
                sig, _ = _illinois(g, a, b, max(ga, 0.0), gb, ftol, 1e-12)
                if best is None or sig < best[0]:
                    best = (sig, k)
        if best is not None:
            sig, k = best
            cands.append((t0 + sig * h, EventKind.BOUNDARY, k, sig))

    if refresh_t is not None and t0 <= refresh_t <= t0 + h:
        sig = (refresh_t - t0) / h
        cands.append((refresh_t, EventKind.REFRESH, -1, sig))

    if tracker is not None and tracker.active:
        U = np.einsum("ij,ij->i", Y[:, :d] - tracker.q_ref, Y[:, d:])
        if t0 <= tracker.t_ref:
            U[0] = max(U[0], 0.0)
        if U[0] < 0:
            cands.append((t0, EventKind.UTURN, -1, 0.0))
        else:
            cross = np.flatnonzero((U[:-1] >= 0) & (U[1:] < 0))
            if cross.size:
                i = cross[0]

                def u(sig):
                    y = dense_eval(step, sig)
                    return float((y[:d] - tracker.q_ref) @ y[d:])

                sig, _ = _illinois(u, CHECKPOINTS[i], CHECKPOINTS[i + 1], U[i], U[i + 1],
                                   1e-12, 1e-12)
                cands.append((t0 + sig * h, EventKind.UTURN, -1, sig))

    for j, ts in enumerate(sample_ts):
        if t0 < ts <= t0 + h:
            cands.append((ts, EventKind.SAMPLE, j, (ts - t0) / h))
            break

    if not cands:
        return None
    t_ev, kind, idx, sig = min(cands, key=lambda c: (c[0], int(c[1])))
    sig = min(max(sig, 0.0), 1.0)
    return Event(t_ev, kind, _state_at(step, sig, d, side), index=idx, sigma=sig)
