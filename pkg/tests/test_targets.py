import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shepherding.geometry import ConvexPolygon
from shepherding.potentials import ObstacleField, PairRepulsion
from shepherding.targets import (
    NoiseBank,
    TargetParams,
    drift,
    embodied_drift,
    embodied_drifts,
    neighbor_herders,
    noise_increment,
)

P = TargetParams()


def test_neighbour_boundary_is_strict():
    assert list(neighbor_herders((0, 0), [(2.5, 0.0)], 2.5)) == []
    assert list(neighbor_herders((0, 0), np.zeros((0, 2)), 2.5)) == []


def test_neighbours_match_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(50):
        t = rng.uniform(-3, 3, 2)
        h = rng.uniform(-3, 3, (5, 2))
        expected = [i for i in range(5) if math.dist(t, h[i]) < 2.5]
        assert list(neighbor_herders(t, h, 2.5)) == expected


def test_isolated_target_has_no_drift():
    assert np.array_equal(drift(np.array([0.0, 0.0]), np.array([[30.0, 0.0]]), [], P), np.zeros(2))


def test_single_herder_due_west():
    v = drift(np.array([0.0, 0.0]), np.array([[-P.lam / 2, 0.0]]), [], P)
    assert v == pytest.approx([P.beta * P.lam / 2, 0.0])


def test_symmetric_herders_cancel_north_south():
    v = drift(np.array([0.0, 0.0]), np.array([[-0.5, 1.0], [-0.5, -1.0]]), [], P)
    assert v[1] == 0.0 and v[0] > 0.0


def test_obstacle_term_included():
    field = ObstacleField(ConvexPolygon.rectangle((0, 0), 2, 2), 2.5, 10.0)
    v = drift(np.array([2.0, 0.0]), np.zeros((0, 2)), [field], P)
    assert v[0] > 0 and v[1] == 0


def test_embodied_single_target_equals_drift():
    h = np.array([[0.3, 0.1]])
    t = np.array([[0.0, 0.0]])
    rep = PairRepulsion(1.0, 0.45)
    assert np.array_equal(embodied_drift(0, t, h, [], P, rep), drift(t[0], h, [], P))


def test_embodied_pair_at_cutoff_has_no_pair_term():
    h = np.array([[0.3, 0.1]])
    t = np.array([[0.0, 0.0], [0.45, 0.0]])
    rep = PairRepulsion(1.0, 0.45)
    assert np.array_equal(embodied_drift(0, t, h, [], P, rep), drift(t[0], h, [], P))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31))
def test_vectorised_embodied_drift_matches_per_target(m, seed):
    rng = np.random.default_rng(seed)
    t = rng.uniform(-1, 1, (m, 2))
    h = rng.uniform(-1, 1, (2, 2))
    rep = PairRepulsion(1.0, 0.45)
    all_v = embodied_drifts(t, h, [], P, rep)
    for a in range(m):
        assert np.allclose(all_v[a], embodied_drift(a, t, h, [], P, rep), atol=1e-12)


def test_zero_diffusion_has_no_noise():
    rng = np.random.default_rng(0)
    assert np.array_equal(noise_increment(rng, 0.0, 0.01), np.zeros(2))
    bank = NoiseBank(np.random.SeedSequence(0).spawn(3), 0.0, 0.01)
    assert np.array_equal(bank.draw(), np.zeros((3, 2)))


def test_noise_standard_deviation():
    D, dt = 0.5, 0.01
    bank = NoiseBank(np.random.SeedSequence(42).spawn(1), D, dt, block=4096)
    draws = np.concatenate([bank.draw() for _ in range(500_000)])  # 1e6 scalar samples
    expected = math.sqrt(2 * D * dt)
    # standard error of a sample std over 1e6 draws is about 0.07 %
    assert np.std(draws) == pytest.approx(expected, rel=5e-3)
    assert abs(np.mean(draws)) < 5 * expected / 1000


def test_noise_is_reproducible_and_per_target():
    a = NoiseBank(np.random.SeedSequence(9).spawn(3), 0.5, 0.01)
    b = NoiseBank(np.random.SeedSequence(9).spawn(3), 0.5, 0.01)
    xa = np.stack([a.draw() for _ in range(2000)])
    xb = np.stack([b.draw() for _ in range(2000)])
    assert np.array_equal(xa, xb)
    # a target's stream does not depend on how many targets follow it
    c = NoiseBank(np.random.SeedSequence(9).spawn(3)[:1], 0.5, 0.01)
    xc = np.stack([c.draw() for _ in range(2000)])
    assert np.array_equal(xa[:, 0], xc[:, 0])


def test_parameter_bounds():
    with pytest.raises(ValueError):
        TargetParams(D=-1.0)
