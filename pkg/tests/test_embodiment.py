import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shepherding.embodiment import (
    UnicycleParams,
    drive,
    map_to_unicycle,
    scale_wheels,
    step_unicycle,
    unicycle_to_velocity,
    wheel_speeds,
)

UP = UnicycleParams(d=0.1, l=0.23, v_max=0.5)


def test_aligned_mapping():
    assert map_to_unicycle(np.array([1.0, 0.0]), 0.0, UP) == pytest.approx((1.0, 0.0))


def test_lateral_mapping_divides_by_lookahead():
    v, w = map_to_unicycle(np.array([0.0, 1.0]), 0.0, UP)
    assert v == pytest.approx(0.0, abs=1e-15)
    assert w == pytest.approx(10.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-math.pi, math.pi))
def test_mapping_round_trip(ux, uy, heading):
    u = np.array([ux, uy])
    v, w = map_to_unicycle(u, heading, UP)
    assert np.allclose(unicycle_to_velocity(v, w, heading, UP), u, atol=1e-12)


def test_within_limits_is_unchanged():
    assert scale_wheels(0.1, 0.5, UP) == pytest.approx((0.1, 0.5))


def test_pure_translation_clamp():
    v, w = scale_wheels(1.0, 0.0, UP)
    assert v == pytest.approx(0.5, rel=1e-8) and w == 0.0


def test_scaling_factor_hand_value():
    v, w = scale_wheels(0.3, 4.0, UP)
    s = v / 0.3
    assert s == pytest.approx(0.5 / (0.3 + 0.46), rel=1e-8)
    assert s == pytest.approx(0.6579, abs=5e-5)
    assert max(abs(x) for x in wheel_speeds(v, w, UP.l)) <= UP.v_max


@settings(max_examples=300, deadline=None)
@given(st.floats(-10, 10), st.floats(-50, 50))
def test_scaled_wheels_never_exceed_limit(v, w):
    vs, ws = scale_wheels(v, w, UP)
    right, left = wheel_speeds(vs, ws, UP.l)
    assert abs(right) <= UP.v_max and abs(left) <= UP.v_max
    # direction of motion is preserved
    assert vs * v >= 0.0


def test_stationary_and_straight_steps():
    p, h = step_unicycle(np.array([1.0, 2.0]), 0.3, 0.0, 0.0, 0.1)
    assert np.array_equal(p, [1.0, 2.0])
    p, h = step_unicycle(np.array([0.0, 0.0]), 0.0, 1.0, 0.0, 0.1)
    assert p == pytest.approx([0.1, 0.0]) and h == 0.0


def test_constant_turn_closes_a_circle():
    # v = 0.2 m/s, w = 1 rad/s traces a circle of radius 0.2 m in 2 pi seconds
    dt = 1e-3
    p, h = np.zeros(2), 0.0
    for _ in range(round(2 * math.pi / dt)):
        p, h = step_unicycle(p, h, 0.2, 1.0, dt)
    assert np.linalg.norm(p) < 0.02


def test_drive_respects_wheel_limit():
    rng = np.random.default_rng(1)
    pos = rng.uniform(-1, 1, (20, 2))
    heading = rng.uniform(-math.pi, math.pi, 20)
    u = rng.uniform(-3, 3, (20, 2))
    _, _, v, w = drive(pos, heading, u, UP, 0.002)
    right, left = wheel_speeds(v, w, UP.l)
    assert np.all(np.abs(right) <= UP.v_max) and np.all(np.abs(left) <= UP.v_max)


def test_parameters_must_be_positive():
    with pytest.raises(ValueError):
        UnicycleParams(d=0.0)
    with pytest.raises(ValueError):
        step_unicycle(np.zeros(2), 0.0, 1.0, 0.0, 0.0)
