import math

import numpy as np
import pytest

from conftest import ident, phase
from grhmc.errors import ConfigError
from grhmc.events import (
    CHECKPOINTS,
    EventKind,
    UTurnTracker,
    boundary_values,
    exponential_inverse_cdf,
    locate_first_event,
    next_refresh_time,
    uturn_value,
)
from grhmc.integrator import rk_step
from grhmc.models import CircleTarget, MaxModel, VolatilityTarget


def free_field(t, y):
    d = y.size // 2
    return np.concatenate([y[d:], np.zeros(d)])


def osc_field(t, y):
    return np.array([y[1], -y[0]])


def free_step(q0, p0, h=1.0, t0=0.0):
    return rk_step(np.r_[q0, p0].astype(float), t0, h, free_field)


def identity_constraints(Q):
    return np.asarray(Q)


def test_checkpoints():
    np.testing.assert_array_equal(CHECKPOINTS, [0.0, 0.25, 0.5, 0.75, 1.0])


def test_nothing_to_report():
    step = free_step([0.5], [1.0])
    ev = locate_first_event(step, 1, side=np.array([True]), constraint_fn=identity_constraints)
    assert ev is None


def test_linear_root_located():
    step = free_step([-0.5], [1.0])
    ev = locate_first_event(step, 1, side=np.array([False]), constraint_fn=identity_constraints)
    assert ev.kind is EventKind.BOUNDARY
    assert ev.index == 0
    assert ev.t_event == pytest.approx(0.5, abs=1e-10)
    assert abs(ev.state.qbar[0]) <= 1e-10
    np.testing.assert_array_equal(ev.state.region, [False])


def test_step_offset_and_length_respected():
    step = free_step([-0.5], [2.0], h=0.5, t0=3.0)
    ev = locate_first_event(step, 1, side=np.array([False]), constraint_fn=identity_constraints)
    assert ev.t_event == pytest.approx(3.25, abs=1e-10)
    assert ev.sigma == pytest.approx(0.5, abs=1e-10)


def test_refresh_before_boundary_wins():
    step = free_step([-0.7], [1.0])
    ev = locate_first_event(step, 1, side=np.array([False]), constraint_fn=identity_constraints,
                            refresh_t=0.3)
    assert ev.kind is EventKind.REFRESH
    assert ev.t_event == 0.3
    np.testing.assert_allclose(ev.state.qbar, [-0.4], atol=1e-15)


def test_boundary_wins_exact_tie():
    step = free_step([-0.5], [1.0])
    ev = locate_first_event(step, 1, side=np.array([False]), constraint_fn=identity_constraints,
                            refresh_t=0.5)
    assert ev.kind is EventKind.BOUNDARY


def test_sample_emission_candidate():
    step = free_step([0.5], [1.0])
    ev = locate_first_event(step, 1, sample_ts=[0.0, 0.25, 0.9])
    assert ev.kind is EventKind.SAMPLE
    assert ev.t_event == 0.25
    assert ev.index == 1


def test_refresh_outside_step_ignored():
    step = free_step([0.5], [1.0])
    assert locate_first_event(step, 1, refresh_t=1.5) is None


def test_earliest_of_two_constraints():
    def cons(Q):
        Q = np.asarray(Q)
        return np.stack([Q[:, 0] - 0.6, Q[:, 0] - 0.3], axis=1)

    step = free_step([0.0], [1.0])
    ev = locate_first_event(step, 1, side=np.array([False, False]), constraint_fn=cons)
    assert ev.index == 1
    assert ev.t_event == pytest.approx(0.3, abs=1e-10)


def test_later_constraint_found_beside_masked_one():
    # constraint 0 sits on its boundary and stays masked through the step;
    # constraint 1 crosses in the last quarter
    def cons(Q):
        Q = np.asarray(Q)
        return np.stack([Q[:, 1], Q[:, 0] - 0.8], axis=1)

    step = free_step([0.0, 0.0], [1.0, 0.0])
    ev = locate_first_event(step, 2, side=np.array([True, False]), constraint_fn=cons,
                            masks={0: 5.0})
    assert ev.index == 1
    assert ev.t_event == pytest.approx(0.8, abs=1e-10)


def test_mask_hides_the_root_just_handled():
    step = free_step([0.0], [-1.0])  # leaving c = q >= 0 at t = 0
    side = np.array([True])
    ev = locate_first_event(step, 1, side=side, constraint_fn=identity_constraints,
                            masks={0: 1e-8})
    # released after 1e-8 already on the far side: reported at the release point
    assert ev.kind is EventKind.BOUNDARY
    assert ev.t_event == pytest.approx(1e-8, abs=1e-15)
    ev = locate_first_event(step, 1, side=np.array([False]), constraint_fn=identity_constraints,
                            masks={0: 1e-8})
    assert ev is None


def test_masked_constraint_recrossing_detected():
    # just reflected at q = 0 with p = +1 under a downward pull q'' = -4:
    # q(t) = t - 2 t^2 returns to 0 at t = 0.5
    def field(t, y):
        return np.array([y[1], -4.0])

    step = rk_step(np.array([0.0, 1.0]), 0.0, 1.0, field)
    ev = locate_first_event(step, 1, side=np.array([True]), constraint_fn=identity_constraints,
                            masks={0: 1e-8})
    assert ev.kind is EventKind.BOUNDARY
    assert ev.t_event == pytest.approx(0.5, abs=1e-9)


def test_touching_release_brackets_the_sign_change():
    # q(t) = 1e-12 + 1e-3 t - t^2 / 2 stays within root tolerance of 0 for a while
    def field(t, y):
        return np.array([y[1], -1.0])

    step = rk_step(np.array([1e-12, 1e-3]), 0.0, 0.01, field)
    ev = locate_first_event(step, 1, side=np.array([True]), constraint_fn=identity_constraints,
                            masks={0: 1e-8})
    root = 1e-3 + math.sqrt(1e-6 + 2e-12)
    assert ev.t_event == pytest.approx(root, rel=1e-6)


def test_uturn_value_zero_at_reset():
    st = phase([0.3, -0.1], [1.0, 2.0])
    tr = UTurnTracker(st.qbar.copy())
    assert uturn_value(st, tr) == 0.0


def test_uturn_not_reported_at_reset_point():
    step = rk_step(np.array([0.0, 1.0]), 0.0, 0.1, osc_field)
    tr = UTurnTracker(np.array([0.0]), 0.0)
    assert locate_first_event(step, 1, tracker=tr) is None


def test_uturn_oscillator_quarter_period():
    tr = UTurnTracker(np.array([0.0]), 0.0)
    y, t, f = np.array([0.0, 1.0]), 0.0, None
    for _ in range(40):
        step = rk_step(y, t, 0.1, osc_field, f)
        ev = locate_first_event(step, 1, tracker=tr)
        if ev is not None:
            break
        y, t, f = step.y1, step.t1, step.f1
    assert ev.kind is EventKind.UTURN
    assert ev.t_event == pytest.approx(math.pi / 2, abs=1e-4)


def test_free_particle_never_uturns():
    tr = UTurnTracker(np.array([0.2, -0.3]), 0.0)
    y, t = np.array([0.2, -0.3, 1.0, -0.5]), 0.0
    for _ in range(20):
        step = rk_step(y, t, 0.5, free_field)
        assert locate_first_event(step, 2, tracker=tr) is None
        st = phase(step.y1[:2], step.y1[2:])
        assert uturn_value(st, tr) == pytest.approx(step.t1 * 1.25)
        y, t = step.y1, step.t1


def test_inactive_tracker_ignored():
    step = rk_step(np.array([1.0, -1.0]), 0.0, 0.5, osc_field)
    tr = UTurnTracker(np.array([0.0]), 0.0, active=False)
    assert locate_first_event(step, 1, tracker=tr) is None


def test_exponential_inverse_cdf():
    assert exponential_inverse_cdf(math.exp(-1.0), 0.2) == pytest.approx(5.0)


def test_refresh_time_mean(rng):
    draws = [next_refresh_time(0.2, rng) for _ in range(100000)]
    assert np.mean(draws) == pytest.approx(5.0, abs=0.05)


@pytest.mark.parametrize("lam", [0.0, -1.0])
def test_refresh_rate_must_be_positive(lam, rng):
    with pytest.raises(ConfigError):
        next_refresh_time(lam, rng)


def test_constraint_values():
    assert boundary_values(phase([-0.5, 3.0], [0, 0]), MaxModel(), ident(2))[0] == -0.5
    assert boundary_values(phase([0.6, 0.8], [0, 0]), CircleTarget(), ident(2))[0] == pytest.approx(0.0, abs=1e-15)


def test_volatility_constraints():
    model = VolatilityTarget(np.ones(3), "gaussian")
    q = np.array([0.5, -1.0, 2.0, 0.1, -0.2, 0.7])
    np.testing.assert_allclose(model.constraints(q), [0.5, -1.0, 2.0, 0.9])
