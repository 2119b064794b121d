"""
Time-stepped simulation.

Every step works on a frozen snapshot: targets are selected, all herder
commands and target drifts are evaluated on the same positions, and only then
is the state advanced by one explicit Euler (Euler-Maruyama for noisy targets)
step.  Agents that land inside an obstacle are moved back to the boundary.

Runs are reproducible: a run seed fixes the random scenario and every
target's noise stream, and batches derive run seeds as ``seed + k``.
"""

from __future__ import annotations

import dataclasses
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import baseline as bl
from . import kernels
from .control import Decisions, HerderParams, OrbitParams, WorldSnapshot, decide
from .embodiment import UnicycleParams, drive, wheel_speeds
from .errors import PhysicsViolation, ValidationError
from .geometry import norm
from .potentials import S_MIN, ObstacleField, PairRepulsion, force_from_separation, pairwise_forces
from .records import RunMetrics, SimulationTrace, TraceBuilder, capture_fraction, radial_stats
from .scenario import (
    Scenario,
    ScenarioConfig,
    agent_violations,
    bound_violations,
    layout_violations,
    realize,
    seed_streams,
)
from .targets import NoiseBank, TargetParams, herder_repulsion


@dataclass
class WorldState:
    time: float
    herders: np.ndarray
    targets: np.ndarray
    herder_heading: np.ndarray
    target_heading: np.ndarray
    decisions: Decisions | None = None


def validate_scenario(scn: Scenario | ScenarioConfig) -> list[str]:
    """List every violated constraint; an empty list means the scenario may run."""
    if isinstance(scn, ScenarioConfig):
        bad = bound_violations(scn)
        if bad:
            return bad
        try:
            scn = realize(scn)
        except ValidationError as exc:
            return list(exc.violations)
    cfg = scn.config
    out = bound_violations(cfg)
    if not cfg.delta < cfg.lam:
        out.append(f"delta={cfg.delta} must be smaller than lam={cfg.lam}")
    if not cfg.beta_orb < cfg.beta_th:
        out.append(f"beta_orb={cfg.beta_orb} must be smaller than beta_th={cfg.beta_th}")
    if not 0.0 <= cfg.gamma <= 1.0:
        out.append(f"gamma={cfg.gamma} must lie in [0, 1]")
    out += layout_violations(cfg, scn.obstacles)
    out += agent_violations(cfg, scn.obstacles, scn.herders, scn.targets)
    return out


def _params(cfg: ScenarioConfig):
    hp = HerderParams(cfg.v_h, cfg.alpha, cfg.delta, cfg.gamma, cfg.rho_g, cfg.epsilon_o)
    tp = TargetParams(cfg.lam, cfg.beta, cfg.diffusion, cfg.lambda_o, cfg.k_o)
    return hp, tp


BACKENDS = ("compiled", "reference")


class Simulation:
    """One run of a realised scenario.

    ``target_hook`` adds an extra velocity ``hook(targets, herders)`` to the
    targets; it exists for experiments such as cohesive surrogate targets.
    ``backend="reference"`` evaluates every step with the numpy routines of
    :mod:`control` and friends instead of the compiled kernels; both give the
    same physics up to round-off.
    """

    def __init__(
        self,
        scenario: Scenario | ScenarioConfig,
        target_hook: Callable | None = None,
        backend: str = "compiled",
    ):
        if backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        self.backend = backend
        if isinstance(scenario, ScenarioConfig):
            scenario = realize(scenario)
        bad = validate_scenario(scenario)
        if bad:
            raise ValidationError(bad)
        self.scenario = scenario
        cfg = self.cfg = scenario.config
        self.mode = cfg.mode
        self.hp, self.tp = _params(cfg)
        self.fields = tuple(ObstacleField(o, cfg.lambda_o, cfg.k_o) for o in scenario.obstacles)
        self.dt = cfg.dt
        self.target_hook = target_hook

        self.H = scenario.herders.astype(float).copy()
        self.T = scenario.targets.astype(float).copy()
        self.h_heading = scenario.herder_heading.astype(float).copy()
        self.t_heading = scenario.target_heading.astype(float).copy()
        self.steps = 0
        self.events: Counter = Counter()
        self.max_wheel = {"herder": 0.0, "target": 0.0}
        self.min_clearance = math.inf

        _, dyn_ss = seed_streams(cfg.seed)
        diffusion = 0.0 if self.mode == "embodied" else cfg.diffusion
        self.noise = NoiseBank(dyn_ss.spawn(len(self.T)), diffusion, self.dt)

        self.op = self.rep = None
        if self.mode == "embodied":
            self.op = OrbitParams(cfg.alpha_o, cfg.alpha_r, cfg.r_th, cfg.epsilon_h, cfg.beta_orb, cfg.beta_th)
            self.rep = PairRepulsion(cfg.k_d, cfg.d_th)
            self.herder_up = UnicycleParams(cfg.lookahead, cfg.wheelbase, cfg.wheel_v_max, cfg.wheel_epsilon)
            self.target_up = UnicycleParams(
                cfg.target_lookahead, cfg.target_wheelbase, cfg.target_wheel_v_max, cfg.wheel_epsilon
            )
        self.planner = None
        if self.mode == "baseline":
            self.arc = bl.ArcHerdingParams(cfg.arc_radius, cfg.arc_span, cfg.com_gain, cfg.grid_resolution)
            span = cfg.rho_0 + 2.0 * cfg.lam + cfg.lambda_o + 10.0 * cfg.grid_resolution
            self.planner = bl.ArcHerdingPlanner(
                scenario.obstacles, (-span, span, -span, span), self.arc, cfg.grid_inflation
            )
            self.herder_up = UnicycleParams(cfg.baseline_lookahead, cfg.baseline_wheelbase, cfg.v_h, cfg.wheel_epsilon)
        self._decisions: Decisions | None = None
        self._snap: WorldSnapshot | None = None
        self.packed = kernels.PackedObstacles.pack(scenario.obstacles)
        self._step_cap = 0.0 if self.mode == "embodied" else cfg.lambda_o / cfg.dt

    # -- state -------------------------------------------------------------

    @property
    def time(self) -> float:
        return self.steps * self.dt

    @property
    def state(self) -> WorldState:
        return WorldState(self.time, self.H.copy(), self.T.copy(), self.h_heading.copy(), self.t_heading.copy(), self._decisions)

    def chi(self) -> float:
        return capture_fraction(self.T, self.cfg.rho_g)

    def snapshot(self) -> WorldSnapshot:
        if self._snap is None:
            self._snap = WorldSnapshot(self.H, self.T, self.fields)
        return self._snap

    def decisions(self) -> Decisions | None:
        """Decisions for the current snapshot (cached until the next step)."""
        if self._decisions is None and self.mode != "baseline" and len(self.H):
            if self.backend == "reference":
                self._decisions = decide(self.snapshot(), self.hp, self.op, self.rep)
            else:
                self._decisions = self._compiled_decisions()
        return self._decisions

    def _compiled_decisions(self) -> Decisions:
        snap = self.snapshot()
        cfg, hp = self.cfg, self.hp
        op = self.op or OrbitParams()
        rep = self.rep or PairRepulsion(1.0, 1.0)
        out = kernels.decide(
            snap.herders,
            snap.targets,
            snap.herder_separations(),
            snap.target_separations(),
            *self.packed.arrays,
            cfg.k_o,
            cfg.lambda_o,
            hp.v_h,
            hp.alpha,
            hp.delta,
            hp.gamma,
            hp.rho_g,
            hp.epsilon_o,
            self.mode == "embodied",
            op.alpha_o,
            op.alpha_r,
            op.r_th,
            op.epsilon_h,
            op.beta_orb,
            op.beta_th,
            rep.k_d,
            rep.d_th,
            S_MIN,
        )
        return Decisions(*out)

    # -- dynamics ----------------------------------------------------------

    def _target_obstacle_force(self):
        seps = self.snapshot().target_separations()
        out = np.zeros_like(self.T)
        for f, s in zip(self.fields, seps):
            out += force_from_separation(s, f.k_o, f.lambda_o)
        if self.mode != "embodied" and len(out):
            # explicit Euler cannot carry the 1/r^2 barrier: one step may not
            # travel further than the influence radius
            cap = self.cfg.lambda_o / self.dt
            r = norm(out)
            over = r > cap
            if np.any(over):
                self.events["obstacle_step_capped"] += int(over.sum())
                out[over] *= (cap / r[over])[:, None]
        return out

    def _herder_commands(self) -> np.ndarray:
        if len(self.H) == 0:
            return np.zeros((0, 2))
        if self.mode == "baseline":
            if len(self.T) == 0:
                return np.zeros_like(self.H)
            path = self.planner.path_for(self.T.mean(axis=0))
            return bl.arc_herding_step(
                self.H,
                self.T,
                path,
                self.arc,
                self.cfg.v_h,
                self.planner.grid,
                list(self.fields),
                self.snapshot().herder_separations(),
            )
        dec = self.decisions()
        self.events["saturated"] += int(dec.saturated.sum())
        return dec.command

    def _target_velocity(self) -> np.ndarray:
        T = self.T
        if self.backend == "reference":
            v = herder_repulsion(T, self.H, self.tp.lam, self.tp.beta) + self._target_obstacle_force()
            if self.mode == "embodied":
                v = v + pairwise_forces(self.rep, T)
        else:
            rep = self.rep or PairRepulsion(1.0, 1.0)
            v, capped = kernels.target_drift(
                T,
                self.H,
                self.snapshot().target_separations(),
                self.cfg.k_o,
                self.cfg.lambda_o,
                self.tp.lam,
                self.tp.beta,
                self.mode == "embodied",
                rep.k_d,
                rep.d_th,
                self._step_cap,
                S_MIN,
            )
            if capped:
                self.events["obstacle_step_capped"] += capped
        if self.target_hook is not None:
            v = v + self.target_hook(T.copy(), self.H.copy())
        return v

    def step(self) -> None:
        u = self._herder_commands()
        v = self._target_velocity()
        dt = self.dt
        if self.mode == "embodied":
            self.H, self.h_heading = self._drive("herder", self.H, self.h_heading, u, self.herder_up)
            self.T, self.t_heading = self._drive("target", self.T, self.t_heading, v, self.target_up)
        else:
            if self.mode == "baseline":
                self.H, self.h_heading = self._drive("herder", self.H, self.h_heading, u, self.herder_up)
            else:
                self.H = self.H + u * dt
            self.T = self.T + v * dt + self.noise.draw()
        self._decisions = None
        self._snap = None
        self._resolve_penetration()
        self.steps += 1

    def _drive(self, kind, pos, heading, u, up: UnicycleParams):
        """Advance unicycles and track the largest wheel speed seen."""
        if len(pos) == 0:
            return pos, heading
        if self.backend == "reference":
            pos, heading, v, w = drive(pos, heading, u, up, self.dt)
            right, left = wheel_speeds(v, w, up.l)
            top = max(float(np.max(np.abs(right))), float(np.max(np.abs(left))))
        else:
            pos, heading, top = kernels.drive(
                pos, heading, np.cos(heading), np.sin(heading), u, up.d, up.l, up.v_max, up.epsilon, self.dt
            )
        self.max_wheel[kind] = max(self.max_wheel[kind], top)
        return pos, heading

    def _resolve_penetration(self) -> None:
        """Move agents that ended up in an obstacle back out and cache separations."""
        if not self.fields:
            return
        if self.backend == "compiled":
            self._resolve_compiled()
            return
        seps = {}
        for name in ("H", "T"):
            pts = getattr(self, name)
            queries = [f.obstacle.query(pts) for f in self.fields]
            moved = False
            for f, (proj, dist, strict) in zip(self.fields, queries):
                inside = strict | (dist == 0.0)
                if not np.any(inside):
                    continue
                self.events["penetration_resolved"] += int(inside.sum())
                out_dir = proj[inside] - pts[inside]
                fallback = pts[inside] - f.obstacle.centroid
                out_dir = np.where((norm(out_dir) > 0)[:, None], out_dir, fallback)
                pts = pts.copy()
                pts[inside] = proj[inside] + S_MIN * (out_dir / norm(out_dir)[:, None])
                moved = True
            if moved:
                queries = [f.obstacle.query(pts) for f in self.fields]
                if any(np.any(q[2] | (q[1] == 0.0)) for q in queries):
                    raise PhysicsViolation("could not move agent out of obstacle")
                setattr(self, name, pts)
            if len(pts):
                dist = np.min([q[1] for q in queries], axis=0)
                near = dist < S_MIN
                if np.any(near):
                    self.events["singular_proximity"] += int(near.sum())
                self.min_clearance = min(self.min_clearance, float(dist.min()))
            seps[name] = np.stack([pts - q[0] for q in queries])
        self._snap = WorldSnapshot(self.H, self.T, self.fields, seps["H"], seps["T"])

    def _resolve_compiled(self) -> None:
        seps = {}
        for name in ("H", "T"):
            pts, sep, resolved, singular, min_dist, ok = kernels.resolve_penetration(
                getattr(self, name), *self.packed.arrays, S_MIN
            )
            if not ok:
                raise PhysicsViolation("could not move agent out of obstacle")
            if resolved:
                self.events["penetration_resolved"] += resolved
                setattr(self, name, pts)
            if singular:
                self.events["singular_proximity"] += singular
            self.min_clearance = min(self.min_clearance, min_dist)
            seps[name] = sep
        self._snap = WorldSnapshot(self.H, self.T, self.fields, seps["H"], seps["T"])

    # -- run ---------------------------------------------------------------

    def _frame(self, tb: TraceBuilder, metrics: dict) -> None:
        dec = self.decisions()
        n = len(self.H)
        if dec is not None:
            eta, mu, sigma, zeta = dec.eta, dec.mu, dec.sigma, dec.zeta
            if self.mode == "ideal":
                sigma = zeta = np.full(n, np.nan)
        else:
            eta = mu = sigma = zeta = np.full(n, np.nan)
        heading_h = self.h_heading if self.mode != "ideal" else np.full(n, np.nan)
        heading_t = self.t_heading if self.mode == "embodied" else np.full(len(self.T), np.nan)
        tb.add(self.time, self.H, self.T, heading_h, heading_t, eta, mu, sigma, zeta)
        self._sample(metrics)

    def _sample(self, series: dict) -> None:
        hm, hs = radial_stats(self.H)
        tm, ts = radial_stats(self.T)
        for key, val in (("times", self.time), ("chi", self.chi()), ("hm", hm), ("hs", hs), ("tm", tm), ("ts", ts)):
            series[key].append(val)

    def run(self) -> tuple[SimulationTrace, RunMetrics]:
        cfg = self.cfg
        n_steps = int(math.ceil(cfg.t_max / cfg.dt - 1e-9)) if cfg.t_max > 0 else 0
        hold_steps = int(math.ceil(cfg.hold_time / cfg.dt - 1e-9))
        tb = TraceBuilder(len(self.H), len(self.T))
        series = {k: [] for k in ("times", "chi", "hm", "hs", "tm", "ts")}

        chi = self.chi()
        t_all = self.time if chi == 1.0 else None
        streak_start = self.steps if chi == 1.0 else None
        hold_reached = False
        if n_steps == 0:
            self._sample(series)
        else:
            self._frame(tb, series)
        recorded_last = True
        for _ in range(n_steps):
            self.step()
            recorded_last = False
            chi = self.chi()
            if chi == 1.0:
                if t_all is None:
                    t_all = self.time
                if streak_start is None:
                    streak_start = self.steps
                if self.steps - streak_start >= hold_steps:
                    hold_reached = True
            else:
                streak_start = None
            if self.steps % cfg.record_every == 0:
                self._frame(tb, series)
                recorded_last = True
            if hold_reached:
                break
        if n_steps and not recorded_last:
            self._frame(tb, series)

        metrics = RunMetrics(
            times=np.array(series["times"]),
            chi_series=np.array(series["chi"]),
            herder_dist_mean=np.array(series["hm"]),
            herder_dist_std=np.array(series["hs"]),
            target_dist_mean=np.array(series["tm"]),
            target_dist_std=np.array(series["ts"]),
            t_all_captured=t_all,
            final_chi=chi,
            final_time=self.time,
            steps=self.steps,
            hold_reached=hold_reached,
            events=dict(self.events),
            max_wheel_speed=dict(self.max_wheel),
            min_clearance=self.min_clearance,
        )
        if self.planner is not None:
            metrics.events["no_path"] = self.planner.no_path_events
        return tb.build(), metrics


def run(cfg: ScenarioConfig, target_hook: Callable | None = None) -> tuple[SimulationTrace, RunMetrics]:
    return Simulation(cfg, target_hook).run()


# ---------------------------------------------------------------------------
# Batches
# ---------------------------------------------------------------------------


@dataclass
class RunSummary:
    seed: int
    final_chi: float
    t_all_captured: float | None
    hold_reached: bool
    final_time: float
    events: dict = field(default_factory=dict)


@dataclass
class BatchResult:
    runs: list[RunSummary]

    @property
    def chis(self) -> np.ndarray:
        return np.array([r.final_chi for r in self.runs])

    @property
    def mean_chi(self) -> float:
        return float(np.mean(self.chis))

    @property
    def std_chi(self) -> float:
        return float(np.std(self.chis))

    @property
    def capture_times(self) -> np.ndarray:
        return np.array([r.t_all_captured for r in self.runs if r.t_all_captured is not None])

    @property
    def success_rate(self) -> float:
        return float(np.mean([r.hold_reached for r in self.runs]))

    def summary(self) -> dict:
        ct = self.capture_times
        return {
            "n": len(self.runs),
            "mean_chi": self.mean_chi,
            "std_chi": self.std_chi,
            "success_rate": self.success_rate,
            "captured_runs": int(len(ct)),
            "capture_time_median": float(np.median(ct)) if len(ct) else None,
            "capture_time_mean": float(np.mean(ct)) if len(ct) else None,
            "capture_time_std": float(np.std(ct)) if len(ct) else None,
        }


def _run_one(cfg: ScenarioConfig) -> RunSummary:
    _, m = run(cfg)
    return RunSummary(cfg.seed, m.final_chi, m.t_all_captured, m.hold_reached, m.final_time, m.events)


def batch_configs(cfg: ScenarioConfig, n_seeds: int) -> list[ScenarioConfig]:
    if n_seeds < 1:
        raise ValueError("n_seeds must be at least 1")
    return [dataclasses.replace(cfg, seed=cfg.seed + k) for k in range(n_seeds)]


def run_batch(cfg: ScenarioConfig, n_seeds: int, jobs: int = 1) -> BatchResult:
    """Independent runs with seeds ``cfg.seed, cfg.seed + 1, ...``."""
    cfgs = batch_configs(cfg, n_seeds)
    if jobs > 1 and n_seeds > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_one, cfgs))
    else:
        runs = [_run_one(c) for c in cfgs]
    return BatchResult(sorted(runs, key=lambda r: r.seed))
