import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shepherding.errors import InsideObstacle, SingularProximity
from shepherding.geometry import ConvexPolygon, boundary_distance
from shepherding.potentials import (
    S_MIN,
    ObstacleField,
    PairRepulsion,
    force_from_separation,
    obstacle_force,
    pair_force,
    pair_potential,
    pairwise_forces,
    potential,
    radial_potential,
)

FD_STEP = 1e-6


def central_gradient(fn, q):
    g = np.zeros(2)
    for k in range(2):
        e = np.zeros(2)
        e[k] = FD_STEP
        g[k] = (fn(q + e) - fn(q - e)) / (2 * FD_STEP)
    return g


def annulus_probes(rng, poly, lambda_o, count):
    """Random points whose boundary distance lies in [0.05, 0.95] * lambda_o."""
    out = []
    lo, hi = poly.vertices.min(axis=0) - lambda_o, poly.vertices.max(axis=0) + lambda_o
    while len(out) < count:
        q = rng.uniform(lo, hi)
        if poly.contains(q, strict=False):
            continue
        d = float(boundary_distance(q, poly))
        if 0.05 * lambda_o <= d <= 0.95 * lambda_o:
            out.append(q)
    return np.array(out)


def worst_relative_error(force_fn, potential_fn, probes):
    worst = 0.0
    for q in probes:
        analytic = force_fn(q)
        numeric = -central_gradient(potential_fn, q)
        worst = max(worst, np.linalg.norm(analytic - numeric) / np.linalg.norm(analytic))
    return worst


def test_potential_closed_form_values():
    assert radial_potential(2.5, 10.0, 2.5) == 0.0
    assert radial_potential(1.25, 10.0, 2.5) == pytest.approx(0.8, rel=1e-12)
    assert radial_potential(5.0, 10.0, 2.5) == 0.0


def test_obstacle_gradient_consistency():
    rng = np.random.default_rng(11)
    field = ObstacleField(ConvexPolygon.rectangle((15, 15), 30, 10, 3 * math.pi / 4), lambda_o=2.5, k_o=10.0)
    probes = annulus_probes(rng, field.obstacle, field.lambda_o, 1000)
    start = time.perf_counter()
    err = worst_relative_error(
        lambda q: obstacle_force(field, q), lambda q: float(potential(field, q)), probes
    )
    assert err < 1e-5
    assert time.perf_counter() - start < 5.0


def test_pair_gradient_consistency():
    rng = np.random.default_rng(12)
    rep = PairRepulsion(k_d=1.0, d_th=0.45)
    qj = np.array([0.3, -0.2])
    r = rng.uniform(0.05 * rep.d_th, 0.95 * rep.d_th, 1000)
    a = rng.uniform(-math.pi, math.pi, 1000)
    probes = qj + np.stack([r * np.cos(a), r * np.sin(a)], axis=1)
    err = worst_relative_error(
        lambda q: pair_force(rep, q, qj), lambda q: float(pair_potential(rep, q, qj)), probes
    )
    assert err < 1e-5


def test_force_vanishes_beyond_influence_radius_exactly():
    field = ObstacleField(ConvexPolygon.rectangle((0, 0), 2, 2), lambda_o=2.5, k_o=10.0)
    assert np.array_equal(obstacle_force(field, (1.0 + 2.5, 0.0)), np.zeros(2))
    assert np.array_equal(obstacle_force(field, (10.0, 0.0)), np.zeros(2))
    rep = PairRepulsion(1.0, 0.45)
    assert np.array_equal(pair_force(rep, (0.45, 0.0), (0.0, 0.0)), np.zeros(2))


@settings(max_examples=300, deadline=None)
@given(st.floats(1.0, 1e3), st.floats(0.1, 10.0), st.floats(0.0, 1e3))
def test_compact_support_is_bit_exact(k, r_cut, extra):
    s = np.array([r_cut + extra, 0.0])
    assert radial_potential(r_cut + extra, k, r_cut) == 0.0
    assert np.array_equal(force_from_separation(s, k, r_cut), np.zeros(2))


def test_singular_band_is_clamped_or_raises():
    s = np.array([1e-5, 0.0])
    clamped = force_from_separation(s, 10.0, 2.5)
    at_band = force_from_separation(np.array([S_MIN, 0.0]), 10.0, 2.5)
    assert np.allclose(clamped, at_band)
    with pytest.raises(SingularProximity):
        force_from_separation(s, 10.0, 2.5, on_singular="raise")


def test_force_points_away_from_obstacle():
    field = ObstacleField(ConvexPolygon.rectangle((0, 0), 2, 2), lambda_o=2.5, k_o=10.0)
    f = obstacle_force(field, (2.0, 0.0))
    assert f[0] > 0 and f[1] == 0.0
    with pytest.raises(InsideObstacle):
        obstacle_force(field, (0.0, 0.0))


def test_pairwise_forces_are_antisymmetric_and_sum_to_zero():
    rng = np.random.default_rng(3)
    q = rng.uniform(-0.5, 0.5, (8, 2))
    f = pairwise_forces(PairRepulsion(1.0, 0.45), q)
    assert np.allclose(f.sum(axis=0), 0.0, atol=1e-9)
    assert np.array_equal(pairwise_forces(PairRepulsion(1.0, 0.45), q[:1]), np.zeros((1, 2)))


def test_field_parameters_must_be_positive():
    with pytest.raises(ValueError):
        ObstacleField(ConvexPolygon.rectangle((0, 0), 1, 1), lambda_o=0.0, k_o=1.0)
    with pytest.raises(ValueError):
        PairRepulsion(k_d=-1.0, d_th=1.0)
