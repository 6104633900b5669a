"""Reference distributions, goodness-of-fit, and the fixed-step convergence benchmark.

The benchmark compares three ways of integrating Hamiltonian dynamics through
a gradient discontinuity at a fixed step size ``h``:

``leapfrog``
    Kick-drift-kick with the gradient of whichever region the position is in.
``naive_rk``
    Fixed-step BS23 where every stage re-classifies its own region, so one
    step may mix both gradient fields.
``event_aware``
    Fixed-step BS23 with the region frozen per step; a crossing truncates the
    step at the located boundary, the kernel is applied, and fixed stepping
    restarts from the event time.

Errors are measured against :func:`reference_solution`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .core import PhasePoint, Standardizer, region_field
from .errors import ContractViolation, IntegrationFailure, NonFiniteError
from .events import MASK_TIME, EventKind, locate_first_event
from .integrator import next_fixed_step, rk_step
from .kernels import apply_boundary

METHODS = ("event_aware", "naive_rk", "leapfrog")


def ks_statistic(samples, cdf):
    """Kolmogorov-Smirnov distance between the empirical CDF of ``samples`` and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    n = x.size
    if n == 0:
        raise ContractViolation("KS statistic of an empty sample")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def quadrature_cdf(pdf, lo, hi, n_grid=2001):
    """CDF of a density by piecewise adaptive quadrature, interpolated with a cubic Hermite spline.

    ``pdf`` supplies the spline's derivatives.  Mass outside ``[lo, hi]`` is
    treated as zero; the result is clipped to ``[0, 1]``.
    """
    grid = np.linspace(lo, hi, n_grid)
    pieces = [integrate.quad(pdf, a, b, epsabs=1e-14, epsrel=1e-12)[0]
              for a, b in zip(grid[:-1], grid[1:])]
    F = np.concatenate([[0.0], np.cumsum(pieces)])
    spline = CubicHermiteSpline(grid, F, np.asarray(pdf(grid), dtype=float))

    def cdf(x):
        x = np.asarray(x, dtype=float)
        out = np.clip(spline(np.clip(x, lo, hi)), 0.0, 1.0)
        return np.where(x < lo, 0.0, np.where(x > hi, 1.0, out))

    cdf.total = float(F[-1])
    return cdf


def _split(z0, d):
    z0 = np.asarray(z0, dtype=float).reshape(-1)
    if z0.size != 2 * d:
        raise ContractViolation(f"state has {z0.size} entries, expected {2 * d}")
    return z0[:d].copy(), z0[d:].copy()


def _grad_here(model, q):
    return np.asarray(model.gradient(q, model.classify(q)), dtype=float)


def leapfrog_integrate(model, z0, h, n_steps=None, T=None):
    """Kick-drift-kick leapfrog; gradients use the region containing the current position.

    Either ``n_steps`` or ``T`` is given; with ``T`` a final shorter step
    covers any remainder.
    """
    d = model.dim
    q, p = _split(z0, d)
    sizes = _step_sizes(h, n_steps, T)
    g = _grad_here(model, q)
    for hh in sizes:
        p = p + 0.5 * hh * g
        q = q + hh * p
        g = _grad_here(model, q)
        p = p + 0.5 * hh * g
    z = np.concatenate([q, p])
    if not np.all(np.isfinite(z)):
        raise NonFiniteError("leapfrog diverged", position=q)
    return z


def _step_sizes(h, n_steps, T):
    if n_steps is not None:
        return [h] * int(n_steps)
    out = []
    t = 0.0
    while True:
        hh, last = next_fixed_step(t, T, h)
        if hh <= 0:
            return out
        out.append(hh)
        t = T if last else t + hh


def naive_rk_integrate(model, z0, h, n_steps=None, T=None):
    """Fixed-step BS23 whose derivative field re-classifies the region at every stage."""
    d = model.dim

    def field(t, y):
        q = y[:d]
        return np.concatenate([y[d:], _grad_here(model, q)])

    y = np.concatenate(_split(z0, d))
    t = 0.0
    f = None
    for hh in _step_sizes(h, n_steps, T):
        step = rk_step(y, t, hh, field, f)
        y, f, t = step.y1, step.f1, t + hh
    if not np.all(np.isfinite(y)):
        raise NonFiniteError("naive RK diverged", position=y[:d])
    return y


def event_aware_integrate(model, z0, T, h, root_rtol=1e-10, kernel_choice="deterministic",
                          rng=None, return_events=False, grid="restart"):
    """Fixed-step BS23 with per-step frozen regions and boundary truncation.

    With ``grid='restart'`` fixed stepping restarts at each boundary event
    (the last step before ``T`` is shortened to land exactly on ``T``); with
    ``grid='continue'`` the first post-event step runs only to the next point
    of the original grid ``0, h, 2h, ...``.
    """
    if grid not in ("restart", "continue"):
        raise ContractViolation(f"unknown grid mode {grid!r}")
    d = model.dim
    std = Standardizer.identity(d)
    q, p = _split(z0, d)
    state = PhasePoint(0.0, q, p, np.asarray(model.classify(q), dtype=bool))
    cfn = (lambda Q: model.constraints(Q)) if model.n_constraints else None
    field = region_field(model, std, state.region)
    y = np.concatenate([q, p])
    t = 0.0
    f = None
    masks = {}
    events = []
    while True:
        if grid == "continue":
            # finish the partial grid interval left by a boundary event first
            nxt = min(T, h * math.floor(t / h + 1.0 + 1e-9))
            hh, last = nxt - t, nxt >= T
            if hh <= 1e-12 * h:
                hh, last = next_fixed_step(t, T, h)
        else:
            hh, last = next_fixed_step(t, T, h)
        if hh <= 0:
            break
        step = rk_step(y, t, hh, field, f)
        masks = {k: v for k, v in masks.items() if v > t}
        ev = locate_first_event(step, d, side=state.region, constraint_fn=cfn,
                                masks=masks or None, root_rtol=root_rtol)
        if ev is None or ev.kind is not EventKind.BOUNDARY or (last and ev.sigma >= 1.0):
            y, f = step.y1, step.f1
            t = T if last else t + hh
            continue
        state = PhasePoint(ev.t_event, ev.state.qbar, ev.state.pbar, state.region.copy())
        state, outcome = apply_boundary(state, ev.index, model, std, kernel_choice, rng)
        events.append((ev.t_event, ev.index, outcome))
        masks = {ev.index: ev.t_event + MASK_TIME}
        field = region_field(model, std, state.region)
        y = np.concatenate([state.qbar, state.pbar])
        t = ev.t_event
        f = None
    if not np.all(np.isfinite(y)):
        raise NonFiniteError("event-aware integration diverged", position=y[:d])
    return (y, events) if return_events else y


def _segment_field(model, side):
    d = model.dim

    def fun(t, y):
        return np.concatenate([y[d:], model.gradient(y[:d], side)])

    return fun


def reference_solution(model, z0, T, method="dop853", tol=1e-13, h=1e-6):
    """High-accuracy oracle for the final state at time ``T``.

    ``method='dop853'`` integrates region by region with an 8th-order
    Dormand-Prince solver at tolerance ``tol``, stopping at each located
    boundary (terminal events on ``side * c_k`` decreasing through zero),
    applying the deterministic kernel and restarting.  ``method='bs23'``
    runs :func:`event_aware_integrate` at fixed step ``h`` with root
    tolerance ``tol``.
    """
    if method == "bs23":
        return event_aware_integrate(model, z0, T, h, root_rtol=tol)
    if method != "dop853":
        raise ContractViolation(f"unknown reference method {method!r}")
    d = model.dim
    std = Standardizer.identity(d)
    q, p = _split(z0, d)
    side = np.asarray(model.classify(q), dtype=bool)
    y = np.concatenate([q, p])
    t = 0.0
    K = model.n_constraints
    for _ in range(10000):
        sign = np.where(side, 1.0, -1.0)
        evs = []
        for k in range(K):
            def g(tt, yy, k=k, sk=sign[k]):
                return sk * float(np.atleast_1d(model.constraints(yy[:d]))[k])
            g.terminal = True
            g.direction = -1
            evs.append(g)
        sol = solve_ivp(_segment_field(model, side), (t, T), y, method="DOP853",
                        rtol=tol, atol=tol, events=evs or None)
        if sol.status == -1:
            raise IntegrationFailure(f"reference integration failed: {sol.message}")
        hit = [(float(te[0]), k) for k, te in enumerate(sol.t_events or []) if len(te)]
        if sol.status == 0 or not hit:
            return sol.y[:, -1]
        t_ev, k = min(hit)
        y_ev = sol.y_events[k][0]
        state = PhasePoint(t_ev, y_ev[:d].copy(), y_ev[d:].copy(), side.copy())
        state, _ = apply_boundary(state, k, model, std, "deterministic")
        side = state.region
        y = np.concatenate([state.qbar, state.pbar])
        t = t_ev
    raise IntegrationFailure("reference integration hit too many boundary events")


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    slope_se: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def errors(self, method):
        return {h: e for m, h, e in self.rows if m == method}

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "h", "l2_error"])
        for m, h, e in self.rows:
            w.writerow([m, f"{h:.17g}", f"{e:.17g}"])
        return buf.getvalue()


def fit_slope(hs, errs):
    """Least-squares slope of ``log err`` on ``log h`` and its standard error."""
    x = np.log(np.asarray(hs, dtype=float))
    yv = np.log(np.asarray(errs, dtype=float))
    n = x.size
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (yv - yv.mean())) / sxx
    if n > 2:
        resid = yv - yv.mean() - slope * xc
        se = math.sqrt(float(resid @ resid) / (n - 2) / sxx)
    else:
        se = math.nan
    return slope, se


_RUNNERS = {
    "event_aware": lambda model, z0, T, h: event_aware_integrate(model, z0, T, h),
    "naive_rk": lambda model, z0, T, h: naive_rk_integrate(model, z0, h, T=T),
    "leapfrog": lambda model, z0, T, h: leapfrog_integrate(model, z0, h, T=T),
}


def convergence_study(model, z0, T, h_grid, methods=METHODS, reference=None, min_error=1e-13):
    """Final-state L2 error of each method against the reference, per step size.

    Step sizes are processed in decreasing order.  A method whose errors are
    all below ``min_error`` (exact up to round-off) gets no slope.
    """
    hs = sorted((float(h) for h in h_grid), reverse=True)
    if any(not 0 < h <= T for h in hs):
        raise ContractViolation("step sizes must lie in (0, T]")
    if reference is None:
        reference = reference_solution(model, z0, T)
    table = ConvergenceTable()
    for m in methods:
        if m not in _RUNNERS:
            raise ContractViolation(f"unknown method {m!r}")
        ok_h, ok_e = [], []
        for h in hs:
            try:
                z = _RUNNERS[m](model, z0, T, h)
                err = float(np.linalg.norm(z - reference))
                if not math.isfinite(err):
                    raise NonFiniteError("non-finite error")
            except (NonFiniteError, IntegrationFailure) as exc:
                table.failures.append((m, h, str(exc)))
                continue
            table.rows.append((m, h, err))
            ok_h.append(h)
            ok_e.append(err)
        if len(ok_h) >= 2 and max(ok_e) > min_error:
            table.slopes[m], table.slope_se[m] = fit_slope(ok_h, np.maximum(ok_e, 1e-300))
    return table
