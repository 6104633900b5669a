"""Single-trajectory simulation and reproducible multi-trajectory ensembles.

A trajectory alternates: take one adaptive step in the current region, find
the earliest event inside it, emit any scheduled samples up to that event,
truncate the step there and apply the event (refresh, boundary kernel or
U-turn bookkeeping).  Time ``[0, t_burn]`` is burn-in, optionally adapting
the refresh rate and standardizer; ``(t_burn, t_burn + t_sample]`` is the
sampling phase with emissions every ``t_sample / n_samples``.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import adapt
from .core import Standardizer, initial_state, region_field
from .errors import ConfigError, GRHMCError, IntegrationFailure
from .events import MASK_TIME, EventKind, UTurnTracker, locate_first_event, next_refresh_time
from .integrator import IntegratorConfig, dense_eval, error_norm, rk_step, step_controller
from .kernels import GRAZE, KERNEL_CHOICES, REFLECTION, REFRACTION, SWITCH, WALL, apply_boundary

COUNTER_NAMES = (
    "accepted_steps", "rejected_steps", "refreshes", "gradient_switches", "refractions",
    "reflections", "wall_reflections", "grazes", "uturns", "degenerate_intervals",
    "stuck_refreshes",
)

# A trajectory pressed against a boundary by the force can bounce on it with
# a vanishing normal speed, one event per mask window; after this many events
# on one constraint, each within STUCK_GAP of the last, the momentum is refreshed.
STUCK_LIMIT = 1000
STUCK_GAP = 1e-6


@dataclass(frozen=True)
class SamplerConfig:
    """Run settings for one trajectory.

    ``lam`` is the refresh rate; with ``adapt_lambda`` it is only the starting
    value for burn-in adaptation.  ``q0`` fixes the starting position in model
    coordinates.
    """

    t_burn: float = 0.0
    t_sample: float = 1000.0
    n_samples: int = 1000
    lam: float = 1.0
    adapt_lambda: bool = False
    lambda_min: float = adapt.LAMBDA_MIN
    kernel_choice: str = "randomized"
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    seed: int = 0
    adapt_m_s: bool = False
    scale_floor: float = adapt.SCALE_FLOOR
    q0: tuple | None = None
    root_rtol: float = 1e-10

    def __post_init__(self):
        if not self.t_sample > 0:
            raise ConfigError("t_sample must be positive")
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ConfigError("n_samples must be a positive integer")
        if self.t_burn < 0:
            raise ConfigError("t_burn must be non-negative")
        if not self.lam > 0:
            raise ConfigError("refresh rate lam must be positive")
        if self.kernel_choice not in KERNEL_CHOICES:
            raise ConfigError(f"kernel_choice must be one of {KERNEL_CHOICES}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def spacing(self):
        return self.t_sample / self.n_samples


@dataclass
class SampleChain:
    """Draws in model coordinates plus run metadata."""

    draws: np.ndarray
    meta: dict


def trajectory_rng(seed, index):
    """Independent generator for trajectory ``index`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


class _Trajectory:
    def __init__(self, model, cfg, rng):
        self.model = model
        self.cfg = cfg
        self.rng = rng
        self.d = model.dim
        self.K = model.n_constraints
        hint = model.h_max_hint if model.h_max_hint is not None else math.inf
        h_max = min(cfg.integrator.h_max, hint)
        self.icfg = replace(cfg.integrator, h_max=h_max,
                            h_init=min(cfg.integrator.h_init, h_max),
                            h_min=min(cfg.integrator.h_min, h_max))
        self.std = Standardizer.identity(self.d)
        self.state = initial_state(model, self.std, rng, cfg.q0)
        self.y = np.concatenate([self.state.qbar, self.state.pbar])
        self.h = self.icfg.h_init
        self.f_cache = None
        self.masks = {}
        self.lam = cfg.lam
        self.counters = dict.fromkeys(COUNTER_NAMES, 0)
        self._burst = (-1, -math.inf, 0)
        self.adapting_lambda = False
        self.tracker = UTurnTracker(self.state.qbar.copy(), 0.0, active=False)
        self.est = adapt.LambdaEstimator(lambda_min=cfg.lambda_min, lambda_current=cfg.lam)
        self.t_refresh = next_refresh_time(self.lam, rng)
        self._rebuild()

    def _rebuild(self):
        self.field = region_field(self.model, self.std, self.state.region)
        if self.K:
            m, s, cons = self.std.m, self.std.s, self.model.constraints
            self.cfn = lambda Q: cons(m + s * Q)
        else:
            self.cfn = None

    @property
    def t(self):
        return self.state.t

    def _sync(self, t, y):
        d = self.d
        self.state.t = t
        self.state.qbar = y[:d].copy()
        self.state.pbar = y[d:].copy()
        self.y = y

    def refresh(self):
        d = self.d
        self.counters["refreshes"] += 1
        if self.adapting_lambda:
            if self.tracker.active:
                adapt.record_interval(self.est, self.t - self.tracker.t_ref, False)
            self.lam = self.est.lambda_current
        self.tracker.reset(self.t, self.state.qbar)
        self.tracker.active = self.adapting_lambda
        p = self.rng.standard_normal(d)
        self.state.pbar = p
        self.y = np.concatenate([self.state.qbar, p])
        if self.f_cache is not None:
            self.f_cache = self.f_cache.copy()
            self.f_cache[:d] = p
        self.t_refresh = self.t + next_refresh_time(self.lam, self.rng)

    def set_standardizer(self, new):
        ref = self.tracker.q_ref if self.tracker.active else None
        self.state, ref = adapt.restandardize(self.state, self.std, new, ref)
        if ref is not None:
            self.tracker.q_ref = ref
        self.std = new
        self.y = np.concatenate([self.state.qbar, self.state.pbar])
        self.f_cache = None
        self._rebuild()

    def advance(self, t_end, sample_times=(), sink=None):
        """Run until ``t_end``, passing ``(index, qbar)`` for each sample time to ``sink``."""
        d = self.d
        icfg = self.icfg
        counters = self.counters
        si = 0
        n_s = len(sample_times)
        while self.t < t_end:
            t0 = self.t
            h = self.h
            clipped = False
            if t0 + h >= t_end:
                h = t_end - t0
                clipped = True
            step = rk_step(self.y, t0, h, self.field, self.f_cache)
            err = error_norm(step, icfg)
            if not math.isfinite(err):
                counters["rejected_steps"] += 1
                self.f_cache = step.f0
                self.h = 0.5 * h
                if self.h < icfg.h_min:
                    raise IntegrationFailure(f"non-finite step at t={t0}",
                                             dump={"t": t0, "y": self.y.tolist()})
                continue
            accept, h_next = step_controller(err, h, icfg)
            if not accept:
                counters["rejected_steps"] += 1
                self.f_cache = step.f0
                self.h = h_next
                continue
            counters["accepted_steps"] += 1
            step.accepted = True
            if self.masks:
                self.masks = {k: v for k, v in self.masks.items() if v > t0}
            ev = locate_first_event(
                step, d, side=self.state.region, constraint_fn=self.cfn,
                tracker=self.tracker if self.tracker.active else None,
                refresh_t=self.t_refresh, masks=self.masks or None, root_rtol=self.cfg.root_rtol)
            t_cut = step.t1 if ev is None else ev.t_event
            if si < n_s and sample_times[si] <= t_cut:
                j = si
                while j < n_s and sample_times[j] <= t_cut:
                    j += 1
                sig = np.clip((np.asarray(sample_times[si:j]) - t0) / h, 0.0, 1.0)
                Y = dense_eval(step, sig)
                for i in range(j - si):
                    sink(si + i, Y[i, :d])
                si = j
            if ev is None:
                self._sync(t_end if clipped else step.t1, step.y1)
                self.f_cache = step.f1
                if not clipped:
                    self.h = h_next
                continue

            y_ev = np.concatenate([ev.state.qbar, ev.state.pbar])
            self._sync(ev.t_event, y_ev)
            if ev.kind is EventKind.BOUNDARY:
                self._boundary(ev.index)
                self.h = min(h_next if not clipped else self.h, 0.1 * icfg.h_max)
            elif ev.kind is EventKind.REFRESH:
                self.f_cache = None
                self.refresh()
                if not clipped:
                    self.h = h_next
            elif ev.kind is EventKind.UTURN:
                counters["uturns"] += 1
                if self.adapting_lambda:
                    adapt.record_interval(self.est, self.t - self.tracker.t_ref, True)
                self.tracker.active = False
                self.f_cache = None
                if not clipped:
                    self.h = h_next
        return si

    def _boundary(self, k):
        new, outcome = apply_boundary(self.state, k, self.model, self.std,
                                      self.cfg.kernel_choice, self.rng)
        c = self.counters
        if outcome == SWITCH:
            c["gradient_switches"] += 1
        elif outcome == REFRACTION:
            c["refractions"] += 1
        elif outcome == REFLECTION:
            c["reflections"] += 1
        elif outcome == WALL:
            c["wall_reflections"] += 1
        elif outcome == GRAZE:
            c["grazes"] += 1
        self.state = new
        self.y = np.concatenate([new.qbar, new.pbar])
        self.masks = {k: self.t + MASK_TIME}
        self.f_cache = None
        if outcome in (REFLECTION, WALL) and self.adapting_lambda:
            adapt.on_reflection_reset(self.est, self.tracker, self.t, new.qbar)
        if outcome in (SWITCH, REFRACTION):
            self.field = region_field(self.model, self.std, self.state.region)
        last_k, last_t, n = self._burst
        n = n + 1 if (k == last_k and self.t - last_t < STUCK_GAP) else 0
        self._burst = (k, self.t, n)
        if n >= STUCK_LIMIT:
            c["stuck_refreshes"] += 1
            self._burst = (-1, -math.inf, 0)
            self.refresh()


def simulate_trajectory(model, cfg, rng=None, index=0):
    """Burn-in plus sampling for one trajectory.

    Raises
    ------
    GRHMCError
        Integration failure, non-finite energy or initialization failure.
        The exception carries ``partial_meta`` with the counters so far.
    """
    # overflow in far-out trial stages surfaces as non-finite derivatives,
    # which the step controller already rejects
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _simulate(model, cfg, rng, index)


def _simulate(model, cfg, rng, index):
    if rng is None:
        rng = trajectory_rng(cfg.seed, index)
    started = time.perf_counter()
    tr = _Trajectory(model, cfg, rng)
    d = model.dim
    delta = cfg.spacing
    try:
        if cfg.t_burn > 0:
            tr.adapting_lambda = cfg.adapt_lambda
            if cfg.adapt_lambda:
                tr.tracker.reset(0.0, tr.state.qbar)
            acc = adapt.MomentAccumulator(d)
            n_obs = int(math.floor(cfg.t_burn / delta + 1e-9))
            obs_times = [delta * (i + 1) for i in range(n_obs)]

            def observe(i, qbar):
                adapt.update_moments(acc, tr.std.to_model(qbar))

            breaks = [f * cfg.t_burn for f in adapt.RESTANDARDIZE_FRACTIONS] if cfg.adapt_m_s else []
            oi = 0
            for tb in breaks + [cfg.t_burn]:
                upto = [t for t in obs_times[oi:] if t <= tb]
                tr.advance(tb, upto, observe)
                oi += len(upto)
                if tb < cfg.t_burn and acc.count >= 2:
                    tr.set_standardizer(adapt.read_standardizer(acc, cfg.scale_floor))
                    # the canonical remap scales kinetic energy by (s_new/s_old)^2;
                    # a fresh momentum keeps growing scales from feeding on themselves
                    tr.refresh()
            if cfg.adapt_lambda:
                # the interval still open at burn-in end is censored
                if tr.tracker.active:
                    adapt.record_interval(tr.est, tr.t - tr.tracker.t_ref, False)
                tr.lam = tr.est.lambda_current
            tr.adapting_lambda = False
            tr.tracker.active = False
            tr.refresh()

        draws = np.empty((cfg.n_samples, d))
        std_final = tr.std
        times = [cfg.t_burn + delta * (i + 1) for i in range(cfg.n_samples)]
        times[-1] = cfg.t_burn + cfg.t_sample

        def emit(i, qbar):
            draws[i] = std_final.to_model(qbar)

        emitted = tr.advance(cfg.t_burn + cfg.t_sample, times, emit)
        if emitted != cfg.n_samples:
            raise IntegrationFailure(f"emitted {emitted} of {cfg.n_samples} samples")
        if not np.all(np.isfinite(draws)):
            raise IntegrationFailure("non-finite draws")
    except GRHMCError as exc:
        exc.partial_meta = _meta(tr, cfg, index, time.perf_counter() - started)
        raise
    return SampleChain(draws, _meta(tr, cfg, index, time.perf_counter() - started))


def _meta(tr, cfg, index, wall):
    return {
        "seed": int(cfg.seed),
        "trajectory": int(index),
        "m": tr.std.m.tolist(),
        "s": tr.std.s.tolist(),
        "lambda": float(tr.lam),
        "counters": dict(tr.counters, degenerate_intervals=int(tr.est.degenerate)),
        "t_end": float(tr.t),
        "wall_time": wall,
    }


@dataclass
class EnsembleResult:
    chains: list
    merged: np.ndarray
    failures: dict
    warning: bool

    @property
    def meta(self):
        return [c.meta for c in self.chains]


def _run_one(args):
    model, cfg, i = args
    try:
        return i, simulate_trajectory(model, cfg, trajectory_rng(cfg.seed, i), index=i), None
    except GRHMCError as exc:
        return i, None, (type(exc).__name__, str(exc), getattr(exc, "partial_meta", None))


def run_ensemble(model, cfg, n_traj, jobs=1):
    """Run ``n_traj`` independent trajectories and concatenate their draws in index order.

    Trajectory ``i`` draws from the stream derived from ``(cfg.seed, i)``, so
    results do not depend on ``jobs``.  Failed trajectories are reported in
    ``failures`` and skipped in the merge, with ``warning`` set.
    """
    if n_traj < 1:
        raise ConfigError("n_traj must be at least 1")
    tasks = [(model, cfg, i) for i in range(n_traj)]
    if jobs is None or jobs <= 1 or n_traj == 1:
        results = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, n_traj)) as pool:
            results = list(pool.map(_run_one, tasks))
    results.sort(key=lambda r: r[0])
    chains = [r[1] for r in results if r[1] is not None]
    failures = {r[0]: r[2] for r in results if r[1] is None}
    if failures:
        warnings.warn(f"{len(failures)} of {n_traj} trajectories failed", RuntimeWarning)
    if chains:
        merged = np.concatenate([c.draws for c in chains], axis=0)
    else:
        merged = np.empty((0, model.dim))
    return EnsembleResult(chains, merged, failures, bool(failures))
