"""Target velocity fields: stochastic non-cohesive drift and its noise-free embodied variant."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import norm
from .potentials import ObstacleField, PairRepulsion, force_from_separation, pairwise_forces


@dataclass(frozen=True)
class TargetParams:
    lam: float = 2.5
    beta: float = 3.0
    D: float = 0.5
    lambda_o: float = 2.5
    k_o: float = 10.0

    def __post_init__(self):
        if not (self.lam > 0 and self.beta > 0 and self.D >= 0):
            raise ValueError("need lam > 0, beta > 0, D >= 0")


@dataclass
class TargetState:
    position: np.ndarray
    captured: bool = False


def neighbor_herders(target, herders, lam: float) -> np.ndarray:
    """Indices of herders strictly closer than ``lam`` to ``target``."""
    herders = np.asarray(herders, dtype=float).reshape(-1, 2)
    if len(herders) == 0:
        return np.zeros(0, dtype=int)
    dist = norm(herders - np.asarray(target, dtype=float))
    return np.flatnonzero(dist < lam)


def herder_repulsion(targets, herders, lam: float, beta: float):
    """Sum of ``beta (lam - |d|) d_hat`` over neighbouring herders, per target."""
    targets = np.asarray(targets, dtype=float)
    herders = np.asarray(herders, dtype=float).reshape(-1, 2)
    out = np.zeros_like(targets)
    if len(herders) == 0 or targets.size == 0:
        return out
    d = targets[..., None, :] - herders  # herder -> target
    r = norm(d)
    near = r < lam
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(near & (r > 0.0), beta * (lam - r) / np.where(r > 0.0, r, 1.0), 0.0)
    return (d * w[..., None]).sum(axis=-2)


def obstacle_repulsion(points, fields: list[ObstacleField]):
    points = np.asarray(points, dtype=float)
    out = np.zeros_like(points)
    for f in fields:
        out += force_from_separation(f.separation(points), f.k_o, f.lambda_o)
    return out


def drift(targets, herders, fields: list[ObstacleField], p: TargetParams):
    """Deterministic part of the target velocity (no noise).

    Accepts a single target ``(2,)`` or a population ``(m, 2)``.
    """
    return herder_repulsion(targets, herders, p.lam, p.beta) + obstacle_repulsion(targets, fields)


def embodied_drifts(targets, herders, fields, p: TargetParams, rep: PairRepulsion):
    targets = np.asarray(targets, dtype=float)
    return drift(targets, herders, fields, p) + pairwise_forces(rep, targets)


def embodied_drift(a: int, targets, herders, fields, p: TargetParams, rep: PairRepulsion):
    """Noise-free velocity of target ``a`` including same-type repulsion."""
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    base = drift(targets[a], herders, fields, p)
    others = np.delete(targets, a, axis=0)
    if len(others) == 0:
        return base
    d = targets[a] - others
    return base + force_from_separation(d, rep.k_d, rep.d_th).sum(axis=0)


def noise_increment(rng: np.random.Generator, D: float, dt: float) -> np.ndarray:
    """One Euler-Maruyama increment ``sqrt(2 D dt) * N(0, I)``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if D == 0:
        return np.zeros(2)
    return np.sqrt(2.0 * D * dt) * rng.standard_normal(2)


class NoiseBank:
    """Per-target Gaussian streams, drawn in blocks.

    Each target owns its own generator, so its noise sequence does not depend
    on how many other targets exist or in which order they are stored.
    """

    def __init__(self, seed_sequences, D: float, dt: float, block: int = 1024):
        self._gens = [np.random.default_rng(ss) for ss in seed_sequences]
        self._scale = float(np.sqrt(2.0 * D * dt))
        self._block = block
        self._buf = np.zeros((len(self._gens), 0, 2))
        self._pos = 0

    def draw(self) -> np.ndarray:
        if self._scale == 0.0:
            return np.zeros((len(self._gens), 2))
        if self._pos >= self._buf.shape[1]:
            if self._gens:
                self._buf = np.stack([g.standard_normal((self._block, 2)) for g in self._gens])
            else:
                self._buf = np.zeros((0, self._block, 2))
            self._pos = 0
        out = self._buf[:, self._pos, :] * self._scale
        self._pos += 1
        return out
