"""Run outputs: the sampled trajectory and the metrics collected alongside it."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TRACE_COLUMNS = ("t", "id", "kind", "x", "y", "heading", "eta", "mu", "sigma", "zeta")


@dataclass
class SimulationTrace:
    """Positions sampled at ``times``; arrays are indexed ``[frame, agent]``.

    Headings are NaN in point-mass runs; the per-herder flags are NaN for
    targets and absent frames.
    """

    times: np.ndarray
    herders: np.ndarray
    targets: np.ndarray
    herder_heading: np.ndarray
    target_heading: np.ndarray
    eta: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    zeta: np.ndarray

    @classmethod
    def empty(cls, n: int, m: int) -> "SimulationTrace":
        return cls(
            times=np.zeros(0),
            herders=np.zeros((0, n, 2)),
            targets=np.zeros((0, m, 2)),
            herder_heading=np.zeros((0, n)),
            target_heading=np.zeros((0, m)),
            eta=np.zeros((0, n)),
            mu=np.zeros((0, n)),
            sigma=np.zeros((0, n)),
            zeta=np.zeros((0, n)),
        )

    @property
    def n_frames(self) -> int:
        return len(self.times)

    @property
    def n_herders(self) -> int:
        return self.herders.shape[1]

    @property
    def n_targets(self) -> int:
        return self.targets.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SimulationTrace):
            return NotImplemented
        names = ("times", "herders", "targets", "herder_heading", "target_heading", "eta", "mu", "sigma", "zeta")
        return all(
            getattr(self, k).shape == getattr(other, k).shape
            and np.array_equal(getattr(self, k), getattr(other, k), equal_nan=True)
            for k in names
        )


class TraceBuilder:
    """Accumulates frames during a run."""

    def __init__(self, n: int, m: int):
        self.n, self.m = n, m
        self._frames: list[tuple] = []

    def add(self, t, herders, targets, herder_heading, target_heading, eta, mu, sigma, zeta):
        self._frames.append(
            (t, herders.copy(), targets.copy(), herder_heading.copy(), target_heading.copy(), eta, mu, sigma, zeta)
        )

    def build(self) -> SimulationTrace:
        if not self._frames:
            return SimulationTrace.empty(self.n, self.m)
        cols = list(zip(*self._frames))
        k = len(self._frames)
        return SimulationTrace(
            times=np.array(cols[0], dtype=float),
            herders=np.stack(cols[1]).reshape(k, self.n, 2),
            targets=np.stack(cols[2]).reshape(k, self.m, 2),
            herder_heading=np.stack(cols[3]).reshape(k, self.n),
            target_heading=np.stack(cols[4]).reshape(k, self.m),
            eta=np.stack(cols[5]).astype(float).reshape(k, self.n),
            mu=np.stack(cols[6]).astype(float).reshape(k, self.n),
            sigma=np.stack(cols[7]).astype(float).reshape(k, self.n),
            zeta=np.stack(cols[8]).astype(float).reshape(k, self.n),
        )


def capture_fraction(targets, rho_g: float) -> float:
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    if len(targets) == 0:
        return 1.0
    return np.count_nonzero(np.hypot(targets[:, 0], targets[:, 1]) <= rho_g) / len(targets)


def radial_stats(points) -> tuple[float, float]:
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(points) == 0:
        return float("nan"), float("nan")
    r = np.hypot(points[:, 0], points[:, 1])
    return float(r.mean()), float(r.std())


@dataclass
class RunMetrics:
    times: np.ndarray
    chi_series: np.ndarray
    herder_dist_mean: np.ndarray
    herder_dist_std: np.ndarray
    target_dist_mean: np.ndarray
    target_dist_std: np.ndarray
    t_all_captured: float | None
    final_chi: float
    final_time: float
    steps: int
    hold_reached: bool
    events: dict[str, int] = field(default_factory=dict)
    max_wheel_speed: dict[str, float] = field(default_factory=dict)
    min_clearance: float = float("inf")

    def summary(self) -> dict:
        return {
            "final_chi": self.final_chi,
            "final_time": self.final_time,
            "t_all_captured": self.t_all_captured,
            "hold_reached": self.hold_reached,
            "steps": self.steps,
            "events": dict(sorted(self.events.items())),
            "max_wheel_speed": dict(self.max_wheel_speed),
            "min_clearance": self.min_clearance if self.min_clearance != float("inf") else None,
        }
