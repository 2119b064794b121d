"""
Obstacle-aware herder control.

Each step has two phases.  A global selection pass assigns every herder the
farthest uncaptured target it is nearest to.  Then each herder composes its
velocity from three parts:

* a return-to-goal term when it has no target,
* a steering term that draws it to a point ``delta`` behind its target, either
  radially (straight push) or along the boundary tangent of a blocking
  obstacle (tangential push),
* a hybrid obstacle force mixing normal repulsion with its +/-90 degree
  rotation, so herders slide around obstacles instead of stalling.

The embodied variant adds same-type repulsion and an orbiting term that lets
a herder circle its target to reach the steering side.  Every function takes
one herder ``(2,)`` or all herders ``(n, 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDirection, InsideObstacle
from .geometry import BLOCK_TOL, cross_z, norm, perp, safe_unit, segment_polygon_distance, signed_angle, unit
from .potentials import ObstacleField, PairRepulsion, force_from_separation, pairwise_forces

HALF_PI = 0.5 * np.pi


@dataclass(frozen=True)
class HerderParams:
    v_h: float = 7.5
    alpha: float = 5.0
    delta: float = 1.25
    gamma: float = 0.3
    rho_g: float = 10.0
    epsilon_o: float = 1.0

    def __post_init__(self):
        if self.v_h <= 0 or self.delta <= 0 or not 0.0 <= self.gamma <= 1.0:
            raise ValueError("need v_h > 0, delta > 0 and gamma in [0, 1]")


@dataclass(frozen=True)
class OrbitParams:
    alpha_o: float = 4.5
    alpha_r: float = 3.0
    r_th: float = 0.375
    epsilon_h: float = 0.1
    beta_orb: float = np.pi / 18
    beta_th: float = np.pi / 4

    def __post_init__(self):
        if not (0 < self.beta_orb < self.beta_th and self.r_th > 0 and self.epsilon_h > 0):
            raise ValueError("need 0 < beta_orb < beta_th, r_th > 0, epsilon_h > 0")


@dataclass
class HerderDecision:
    eta: int
    selected_target: int | None
    mu: int
    steering_point: np.ndarray
    sigma: float
    zeta: float
    psi: int
    phi: float
    command: np.ndarray


@dataclass
class Decisions:
    """Per-step decisions for all herders, stored column-wise."""

    target: np.ndarray  # -1 when idle
    mu: np.ndarray
    steering_point: np.ndarray
    nu_hat: np.ndarray
    sigma: np.ndarray
    zeta: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    raw_command: np.ndarray
    command: np.ndarray
    saturated: np.ndarray

    @property
    def eta(self) -> np.ndarray:
        return (self.target >= 0).astype(int)

    def herder(self, i: int) -> HerderDecision:
        t = int(self.target[i])
        return HerderDecision(
            eta=int(t >= 0),
            selected_target=t if t >= 0 else None,
            mu=int(self.mu[i]),
            steering_point=self.steering_point[i].copy(),
            sigma=float(self.sigma[i]),
            zeta=float(self.zeta[i]),
            psi=int(self.psi[i]),
            phi=float(self.phi[i]),
            command=self.command[i].copy(),
        )


@dataclass(frozen=True)
class WorldSnapshot:
    """Positions frozen for one step.

    Separation vectors to every obstacle, shaped ``(n_obstacles, n, 2)``, are
    computed on first use; a caller that already has them may pass them in.
    """

    herders: np.ndarray
    targets: np.ndarray
    fields: tuple[ObstacleField, ...] = ()
    herder_seps: np.ndarray | None = None
    target_seps: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "herders", np.asarray(self.herders, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "targets", np.asarray(self.targets, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "fields", tuple(self.fields))

    def herder_separations(self) -> np.ndarray:
        if self.herder_seps is None:
            object.__setattr__(self, "herder_seps", _separations(self.herders, self.fields))
        return self.herder_seps

    def target_separations(self) -> np.ndarray:
        if self.target_seps is None:
            object.__setattr__(self, "target_seps", _separations(self.targets, self.fields))
        return self.target_seps


def _separations(points, fields) -> np.ndarray:
    if not fields:
        return np.zeros((0,) + np.shape(points))
    return np.stack([f.separation(points) for f in fields])


def select_targets(herders, targets, rho_g: float) -> np.ndarray:
    """Target index per herder, or -1.

    A herder may only pick an uncaptured target for which it is the nearest
    herder; among those it takes the one farthest from the goal.  Ties go to
    the smallest index, which also makes assignments unique.
    """
    herders = np.asarray(herders, dtype=float).reshape(-1, 2)
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    n = len(herders)
    sel = np.full(n, -1, dtype=int)
    if n == 0 or len(targets) == 0:
        return sel
    radius = norm(targets)
    owner = np.argmin(norm(targets[:, None, :] - herders[None, :, :]), axis=1)
    candidate = (owner[None, :] == np.arange(n)[:, None]) & (radius > rho_g)[None, :]
    score = np.where(candidate, radius[None, :], -np.inf)
    best = np.argmax(score, axis=1)
    has = candidate.any(axis=1)
    sel[has] = best[has]
    return sel


def return_to_goal(h, p: HerderParams):
    """Constant-speed motion toward the goal centre while outside the goal."""
    h = np.asarray(h, dtype=float)
    r = norm(h)
    return np.where((r > p.rho_g)[..., None], -p.v_h * safe_unit(h), 0.0)


def herder_obstacle_force(h, steering_point, fields, gamma: float, seps=None):
    """Normal repulsion blended with its rotation toward the steering side.

    ``seps`` optionally supplies the separations to each field.
    """
    h = np.asarray(h, dtype=float)
    c = np.broadcast_to(np.asarray(steering_point, dtype=float), h.shape)
    total = np.zeros_like(h)
    for k, f in enumerate(fields):
        s = f.separation(h) if seps is None else seps[k]
        g = force_from_separation(s, f.k_o, f.lambda_o)
        P = f.obstacle.centroid
        sign = np.where(cross_z(h - P, c - P) > 0.0, 1.0, -1.0)
        total = total + gamma * g + (1.0 - gamma) * perp(g, sign)
    return total


def boundary_tangent(target, obstacle, goal_center=(0.0, 0.0)):
    """Unit tangent used to push ``target`` around ``obstacle``.

    The herder takes position on the tangent side, so the target is pushed
    along ``-nu_hat``, which sweeps it toward the goal's side of the obstacle.
    Collinear configurations take the +90 degree branch.
    """
    target = np.asarray(target, dtype=float)
    if np.any(obstacle.contains(target, strict=True)):
        raise InsideObstacle("target strictly inside obstacle")
    s = target - obstacle.closest_boundary_point(target)[0]
    P = obstacle.centroid
    sign = np.where(cross_z(target - P, np.asarray(goal_center, dtype=float) - P) > 0.0, -1.0, 1.0)
    return unit(perp(s, sign))


def nearest_obstacle(points, fields, seps=None):
    """``(index, separation, distance)`` of the nearest obstacle per point."""
    points = np.asarray(points, dtype=float)
    if seps is None:
        seps = _separations(points, fields)
    shape = points.shape[:-1]
    flat = seps.reshape(len(seps), -1, 2)
    dist = np.hypot(flat[..., 0], flat[..., 1])
    j = np.argmin(dist, axis=0)
    cols = np.arange(flat.shape[1])
    return j.reshape(shape), flat[j, cols].reshape(shape + (2,)), dist[j, cols].reshape(shape)


def mu_switch(
    target,
    fields,
    goal_center=(0.0, 0.0),
    lambda_o: float | None = None,
    epsilon_o: float = 0.0,
    nearest=None,
):
    """1 for a straight push, 0 when a nearby obstacle blocks the way to the goal.

    ``lambda_o`` defaults to each field's own influence radius.  ``nearest``
    may carry a precomputed :func:`nearest_obstacle` result.
    """
    target = np.asarray(target, dtype=float)
    if not fields:
        return np.ones(target.shape[:-1], dtype=int)
    j, _, dist = nearest_obstacle(target, fields) if nearest is None else nearest
    goal = np.asarray(goal_center, dtype=float)
    mu = np.ones(target.shape[:-1], dtype=int)
    for k, f in enumerate(fields):
        lo = f.lambda_o if lambda_o is None else lambda_o
        near = (j == k) & (dist <= lo + epsilon_o)
        if not np.any(near):
            continue
        # the way is blocked if it passes within epsilon_o of the obstacle and
        # gets closer to it than the target already is
        gap = segment_polygon_distance(target, goal, f.obstacle)
        blocked = (gap <= epsilon_o) & (gap < dist - BLOCK_TOL)
        mu = np.where(near & blocked, 0, mu)
    return mu


def steering_point(target, mu, nu_hat, delta: float, goal_center=(0.0, 0.0)):
    """Point ``delta`` behind the target, radially (mu=1) or tangentially (mu=0)."""
    target = np.asarray(target, dtype=float)
    mu = np.asarray(mu, dtype=float)
    radial = target - np.asarray(goal_center, dtype=float)
    straight = mu == 1.0
    if np.any(straight & (norm(radial) == 0.0)):
        raise DegenerateDirection("target coincides with the goal centre")
    t_hat = safe_unit(radial)
    return target + delta * (mu[..., None] * t_hat + (1.0 - mu[..., None]) * np.asarray(nu_hat, dtype=float))


def steering_term(h, target, mu, nu_hat, p: HerderParams, goal_center=(0.0, 0.0)):
    c = steering_point(target, mu, nu_hat, p.delta, goal_center)
    return -p.alpha * (np.asarray(h, dtype=float) - c)


def orbit_weights(h, target, steering_pt, fields, op: OrbitParams, nearest=None, epsilon_o: float = 0.0):
    """Return ``(sigma, zeta, psi, phi)`` for the orbiting term.

    ``sigma`` ramps linearly from 1 at ``r_th`` to 0 at ``r_th + epsilon_h``;
    ``zeta`` ramps from 0 at ``beta_orb`` to 1 at ``beta_th``.  The spin is
    reversed (``psi = -1``) only for targets within ``lambda_o + epsilon_o``
    of their nearest obstacle.
    """
    h = np.asarray(h, dtype=float)
    target = np.asarray(target, dtype=float)
    d = h - target
    dc = np.asarray(steering_pt, dtype=float) - target
    phi = np.where(cross_z(d, dc) > 0.0, HALF_PI, -HALF_PI)
    beta = np.abs(signed_angle(d, dc))
    psi = np.ones(phi.shape, dtype=int)
    if fields:
        j, s, dist = nearest_obstacle(target, fields) if nearest is None else nearest
        reach = np.array([f.lambda_o for f in fields])[j] + epsilon_o
        obstacle_side = np.abs(signed_angle(-s, d)) < HALF_PI
        psi = np.where((dist <= reach) & (beta > HALF_PI) & obstacle_side, -1, 1)
    r = norm(d)
    ramp = (op.r_th + op.epsilon_h - r) / op.epsilon_h
    sigma = np.where(r <= op.r_th, 1.0, np.where(r >= op.r_th + op.epsilon_h, 0.0, ramp))
    ramp = (beta - op.beta_orb) / (op.beta_th - op.beta_orb)
    zeta = np.where(beta <= op.beta_orb, 0.0, np.where(beta >= op.beta_th, 1.0, ramp))
    return sigma, zeta, psi, phi


def orbit_velocity(h, target, psi, phi, op: OrbitParams):
    """Tangential spin around the target plus radial regulation to ``r_th``."""
    d = np.asarray(h, dtype=float) - np.asarray(target, dtype=float)
    d_hat = unit(d)
    spin = np.sign(np.asarray(psi, dtype=float) * np.asarray(phi, dtype=float))
    radial = op.alpha_r * (1.0 - norm(d) / op.r_th)
    return op.alpha_o * perp(d_hat, spin) + radial[..., None] * d_hat


def saturate(u, v_max: float):
    u = np.asarray(u, dtype=float)
    r = norm(u)
    over = r > v_max
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(over, v_max / np.where(over, r, 1.0), 1.0)
    return u * scale[..., None], over


def decide(
    snap: WorldSnapshot,
    p: HerderParams,
    op: OrbitParams | None = None,
    rep: PairRepulsion | None = None,
) -> Decisions:
    """Compute every herder's decision and command for one snapshot.

    Passing ``op`` and ``rep`` selects the embodied control law.
    """
    H, T, fields = snap.herders, snap.targets, snap.fields
    n = len(H)
    embodied = op is not None

    target = select_targets(H, T, p.rho_g)
    chasing = target >= 0
    eta = chasing.astype(float)
    t_star = np.where(chasing[:, None], T[np.maximum(target, 0)] if len(T) else 0.0, 0.0)

    mu = np.ones(n, dtype=int)
    nu_hat = np.zeros((n, 2))
    psi = np.ones(n, dtype=int)
    near = None
    if fields and np.any(chasing):
        idx = np.flatnonzero(chasing)
        ts = t_star[idx]
        near = nearest_obstacle(ts, fields, snap.target_separations()[:, target[idx]])
        j, s, _ = near
        mu[idx] = mu_switch(ts, fields, epsilon_o=p.epsilon_o, nearest=near)
        centroids = np.array([f.obstacle.centroid for f in fields])[j]
        sign = np.where(cross_z(ts - centroids, -centroids) > 0.0, -1.0, 1.0)
        nu_hat[idx] = safe_unit(perp(s, sign))

    C = np.zeros((n, 2))
    if np.any(chasing):
        idx = np.flatnonzero(chasing)
        C[idx] = steering_point(t_star[idx], mu[idx], nu_hat[idx], p.delta)

    F = return_to_goal(H, p)
    steer = np.where(chasing[:, None], -p.alpha * (H - C), 0.0)
    F_obs = herder_obstacle_force(H, C, fields, p.gamma, snap.herder_separations() if fields else None)

    sigma = np.zeros(n)
    zeta = np.zeros(n)
    phi = np.zeros(n)
    if embodied:
        orbit = np.zeros((n, 2))
        if np.any(chasing):
            idx = np.flatnonzero(chasing)
            sg, zt, ps, ph = orbit_weights(H[idx], t_star[idx], C[idx], fields, op, near, p.epsilon_o)
            sigma[idx], zeta[idx], psi[idx], phi[idx] = sg, zt, ps, ph
            live = idx[norm(H[idx] - t_star[idx]) > 0.0]
            if len(live):
                orbit[live] = orbit_velocity(H[live], t_star[live], psi[live], phi[live], op)
        G = pairwise_forces(rep, H) if rep is not None else 0.0
        raw = (
            (1.0 - eta)[:, None] * F
            + ((1.0 - sigma) * eta)[:, None] * steer
            + F_obs
            + G
            + (sigma * zeta)[:, None] * orbit
        )
    else:
        if np.any(chasing):
            idx = np.flatnonzero(chasing)
            phi[idx] = np.where(cross_z(H[idx] - t_star[idx], C[idx] - t_star[idx]) > 0.0, HALF_PI, -HALF_PI)
        raw = (1.0 - eta)[:, None] * F + eta[:, None] * steer + F_obs

    command, saturated = saturate(raw, p.v_h)
    return Decisions(
        target=target,
        mu=mu,
        steering_point=C,
        nu_hat=nu_hat,
        sigma=sigma,
        zeta=zeta,
        psi=psi,
        phi=phi,
        raw_command=raw,
        command=command,
        saturated=saturated,
    )


def compose_ideal(i: int, snap: WorldSnapshot, p: HerderParams) -> np.ndarray:
    return decide(snap, p).command[i]


def compose_embodied(i: int, snap: WorldSnapshot, p: HerderParams, op: OrbitParams, rep: PairRepulsion) -> np.ndarray:
    return decide(snap, p, op, rep).command[i]
