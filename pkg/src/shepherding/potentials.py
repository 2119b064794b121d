"""
Compact-support repulsive potentials.

Both the obstacle potential and the same-type pair potential have the form
``k/2 (1/r - 1/r_cut)^2`` for ``r <= r_cut`` and zero beyond, so they share one
radial kernel.  Inside the singular band ``r < S_MIN`` the force magnitude is
held at its value at ``S_MIN``; with ``on_singular="raise"`` the kernels raise
:class:`SingularProximity` instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsideObstacle, SingularProximity
from .geometry import ConvexPolygon, norm

S_MIN = 1e-3


def radial_potential(r, k: float, r_cut: float):
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        val = 0.5 * k * (1.0 / r - 1.0 / r_cut) ** 2
    return np.where(r <= r_cut, val, 0.0)


def radial_magnitude(r, k: float, r_cut: float, s_min: float = S_MIN):
    """``-dV/dr`` with the singular band clamped."""
    r = np.maximum(np.asarray(r, dtype=float), s_min)
    mag = k * (1.0 / r - 1.0 / r_cut) / (r * r)
    return np.where(r <= r_cut, mag, 0.0)


def force_from_separation(s, k: float, r_cut: float, s_min: float = S_MIN, on_singular: str = "clamp"):
    """Repulsive force along ``s`` (pointing away from the source)."""
    s = np.asarray(s, dtype=float)
    r = norm(s)
    if on_singular == "raise" and np.any(r < s_min):
        raise SingularProximity(f"separation {float(np.min(r)):.3g} m below {s_min} m")
    mag = radial_magnitude(r, k, r_cut, s_min)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where((r > 0.0) & (mag > 0.0), mag / np.where(r > 0.0, r, 1.0), 0.0)
    return s * scale[..., None]


@dataclass(frozen=True)
class ObstacleField:
    obstacle: ConvexPolygon
    lambda_o: float
    k_o: float

    def __post_init__(self):
        if not (self.lambda_o > 0 and self.k_o > 0):
            raise ValueError("lambda_o and k_o must be positive")

    def separation(self, q):
        """Separation vectors; raises if any point is strictly inside."""
        q = np.asarray(q, dtype=float)
        point, _, inside = self.obstacle.query(q)
        if np.any(inside):
            raise InsideObstacle("query point strictly inside obstacle")
        return q - point


@dataclass(frozen=True)
class PairRepulsion:
    k_d: float
    d_th: float

    def __post_init__(self):
        if not (self.k_d > 0 and self.d_th > 0):
            raise ValueError("k_d and d_th must be positive")


def potential(field: ObstacleField, q):
    return radial_potential(norm(field.separation(q)), field.k_o, field.lambda_o)


def obstacle_force(field: ObstacleField, q, on_singular: str = "clamp"):
    """Negative gradient of the obstacle potential at ``q``."""
    return force_from_separation(field.separation(q), field.k_o, field.lambda_o, on_singular=on_singular)


def pair_potential(rep: PairRepulsion, qi, qj):
    return radial_potential(norm(np.asarray(qi, float) - np.asarray(qj, float)), rep.k_d, rep.d_th)


def pair_force(rep: PairRepulsion, qi, qj, on_singular: str = "clamp"):
    """Force on agent ``i`` from agent ``j``; points away from ``j``."""
    d = np.asarray(qi, dtype=float) - np.asarray(qj, dtype=float)
    return force_from_separation(d, rep.k_d, rep.d_th, on_singular=on_singular)


def pairwise_forces(rep: PairRepulsion, q):
    """Net same-type repulsion on each of the ``(n, 2)`` points in ``q``."""
    q = np.asarray(q, dtype=float)
    n = len(q)
    if n < 2:
        return np.zeros_like(q)
    d = q[:, None, :] - q[None, :, :]
    f = force_from_separation(d, rep.k_d, rep.d_th)
    # coincident points get no direction, and a point never repels itself
    f[np.arange(n), np.arange(n)] = 0.0
    return f.sum(axis=1)

