"""Differential-drive realisation of single-integrator velocity commands."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import wrap_angle


@dataclass(frozen=True)
class UnicycleParams:
    d: float = 0.1  # look-ahead offset [m]
    l: float = 0.233  # wheelbase [m]
    v_max: float = 0.31  # per-wheel speed limit [m/s]
    epsilon: float = 1e-9

    def __post_init__(self):
        if min(self.d, self.l, self.v_max, self.epsilon) <= 0:
            raise ValueError("unicycle parameters must be positive")


@dataclass
class Pose:
    position: np.ndarray
    heading: float

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.heading = float(wrap_angle(self.heading))


def map_to_unicycle(u, heading, up: UnicycleParams):
    """Look-ahead mapping ``u -> (v, omega)``."""
    u = np.asarray(u, dtype=float)
    c, s = np.cos(heading), np.sin(heading)
    v = c * u[..., 0] + s * u[..., 1]
    w = (-s * u[..., 0] + c * u[..., 1]) / up.d
    return v, w


def unicycle_to_velocity(v, w, heading, up: UnicycleParams):
    """Inverse of :func:`map_to_unicycle`."""
    c, s = np.cos(heading), np.sin(heading)
    lateral = up.d * np.asarray(w, dtype=float)
    return np.stack([c * v - s * lateral, s * v + c * lateral], axis=-1)


def wheel_speeds(v, w, l: float):
    """``(right, left)`` wheel speeds."""
    return v + 0.5 * l * w, v - 0.5 * l * w


def scale_wheels(v, w, up: UnicycleParams):
    """Uniformly shrink ``(v, w)`` so neither wheel exceeds ``v_max``."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    right, left = wheel_speeds(v, w, up.l)
    s = np.minimum(1.0, np.minimum(up.v_max / (np.abs(right) + up.epsilon), up.v_max / (np.abs(left) + up.epsilon)))
    return s * v, s * w


def step_unicycle(position, heading, v, w, dt: float):
    """Forward-Euler unicycle update; returns ``(position, heading)``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    position = np.asarray(position, dtype=float)
    heading = np.asarray(heading, dtype=float)
    step = np.stack([v * np.cos(heading), v * np.sin(heading)], axis=-1) * dt
    return position + step, wrap_angle(heading + np.asarray(w, dtype=float) * dt)


def drive(position, heading, u, up: UnicycleParams, dt: float):
    """Map, scale and integrate one control period for a set of robots.

    Returns ``(position, heading, v, w)``.
    """
    v, w = map_to_unicycle(u, heading, up)
    v, w = scale_wheels(v, w, up)
    pos, hd = step_unicycle(position, heading, v, w, dt)
    return pos, hd, v, w
