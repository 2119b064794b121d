"""
Scenario configuration, random scenario generation and trace files.

Configs are flat ``key = value`` text files.  ``#`` starts a comment.  The
keys ``obstacle``, ``herder`` and ``target`` may repeat; each holds a
comma-separated tuple::

    obstacle = cx, cy, width, height, angle     # metres, radians
    herder   = x, y[, heading]
    target   = x, y[, heading]

Numeric values accept ``pi`` and simple arithmetic (``pi/18``).  Keys that are
not set take the defaults of the selected mode.
"""

from __future__ import annotations

import ast
import csv
import dataclasses
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GenerationError, ParseError, ValidationError
from .geometry import ConvexPolygon, boundary_distance, norm, set_distance
from .records import TRACE_COLUMNS, SimulationTrace

MODES = ("ideal", "embodied", "baseline")
INF = math.inf
LIST_KEYS = {"obstacle": "obstacles", "herder": "herders", "target": "targets"}


def _p(default, lo=-INF, hi=INF, doc="", lo_open=False, hi_open=False, unit=""):
    return field(default=default, metadata={"bounds": (lo, hi, lo_open, hi_open), "doc": doc, "unit": unit})


def _pos(default, doc, unit=""):
    return _p(default, 0.0, INF, doc, lo_open=True, unit=unit)


@dataclass
class ScenarioConfig:
    mode: str = field(default="ideal", metadata={"doc": "ideal | embodied | baseline"})
    # population and arena
    n_herders: int = _p(1, 0, 10_000, "number of herders N (ignored when herder lines are given)")
    n_targets: int = _p(1, 0, 100_000, "number of targets M (ignored when target lines are given)")
    n_obstacles: int = _p(0, 0, 1000, "random obstacles L to generate when no obstacle lines are given")
    rho_0: float = _pos(50.0, "radius of the disc initial positions are drawn from", "m")
    rho_g: float = _pos(10.0, "goal region radius", "m")
    min_separation: float = _p(0.0, 0.0, INF, "minimum initial distance between agents of the same type", unit="m")
    # time
    dt: float = _pos(0.01, "sampling time", "s")
    t_max: float = _p(1000.0, 0.0, INF, "simulated horizon", unit="s")
    hold_time: float = _p(5.0, 0.0, INF, "stop once every target stayed in the goal this long", unit="s")
    record_every: int = _p(10, 1, 10**9, "record a trace frame every this many steps")
    seed: int = _p(0, 0, 2**63 - 1, "master random seed")
    # herders
    v_h: float = _pos(7.5, "herder maximum speed", "m/s")
    alpha: float = _pos(5.0, "attraction strength to the steering point")
    delta: float = _pos(1.25, "offset of the steering point behind the target", "m")
    gamma: float = _p(0.3, 0.0, 1.0, "normal/tangential blend of the herder obstacle force")
    epsilon_o: float = _pos(1.0, "obstacle safety margin", "m")
    # targets
    lam: float = _pos(2.5, "herder influence radius on targets", "m")
    beta: float = _pos(3.0, "strength of the herder-induced repulsive drift")
    diffusion: float = _p(0.5, 0.0, INF, "target noise diffusion D", unit="m^2/s")
    # obstacles
    lambda_o: float = _pos(2.5, "obstacle influence radius", "m")
    k_o: float = _pos(10.0, "obstacle repulsion strength")
    obstacle_width_min: float = _pos(8.0, "random obstacle width lower bound", "m")
    obstacle_width_max: float = _pos(20.0, "random obstacle width upper bound", "m")
    obstacle_height_min: float = _pos(2.0, "random obstacle height lower bound", "m")
    obstacle_height_max: float = _pos(20.0, "random obstacle height upper bound", "m")
    max_resample: int = _p(10_000, 1, 10**9, "attempts allowed when sampling a valid random layout")
    # embodied model
    alpha_o: float = _pos(4.5, "orbiting tangential gain")
    alpha_r: float = _p(3.0, 0.0, INF, "orbiting radial gain")
    r_th: float = _pos(0.375, "orbiting distance threshold", "m")
    epsilon_h: float = _pos(0.1, "orbiting blend buffer", "m")
    beta_orb: float = _pos(math.pi / 18, "orbiting deadband angle", "rad")
    beta_th: float = _pos(math.pi / 4, "orbiting activation angle", "rad")
    k_d: float = _pos(1.0, "same-type repulsion strength")
    d_th: float = _pos(0.45, "same-type repulsion cutoff", "m")
    lookahead: float = _pos(0.1, "herder unicycle look-ahead distance d", "m")
    wheelbase: float = _pos(0.233, "herder wheelbase l", "m")
    wheel_v_max: float = _pos(0.31, "herder per-wheel speed limit", "m/s")
    target_lookahead: float = _pos(0.1, "target unicycle look-ahead distance", "m")
    target_wheelbase: float = _pos(0.2, "target wheelbase", "m")
    target_wheel_v_max: float = _pos(0.2, "target per-wheel speed limit", "m/s")
    wheel_epsilon: float = _pos(1e-9, "division guard in the wheel scaling")
    # baseline comparator
    arc_radius: float = _pos(2.5, "radius of the herding arc around the centre of mass", "m")
    arc_span: float = _p(math.pi / 2, 0.0, 2 * math.pi, "angular span of the herding arc", True, True, "rad")
    com_gain: float = _pos(5.0, "gain pulling herders to their arc slots")
    grid_resolution: float = _pos(1.0, "A* grid cell size", "m")
    grid_inflation: float = _p(2.5, 0.0, INF, "obstacle inflation on the A* grid", unit="m")
    baseline_lookahead: float = _pos(0.5, "comparator unicycle look-ahead distance", "m")
    baseline_wheelbase: float = _pos(0.5, "comparator wheelbase", "m")
    # explicit geometry
    obstacles: list = field(default_factory=list, metadata={"doc": "obstacle = cx, cy, width, height, angle"})
    herders: list = field(default_factory=list, metadata={"doc": "herder = x, y[, heading]"})
    targets: list = field(default_factory=list, metadata={"doc": "target = x, y[, heading]"})


# Table A1 values are the dataclass defaults; Table A2 overrides them in embodied mode.
EMBODIED_DEFAULTS = {
    "alpha": 3.0,
    "delta": 0.375,
    "gamma": 0.3,
    "alpha_o": 4.5,
    "alpha_r": 3.0,
    "r_th": 0.375,
    "epsilon_h": 0.1,
    "beta_th": math.pi / 4,
    "beta_orb": math.pi / 18,
    "k_d": 1.0,
    "d_th": 0.45,
    "lam": 0.5,
    "beta": 3.0,
    "epsilon_o": 0.1,
    "diffusion": 0.0,
    "lambda_o": 0.2,
    "rho_g": 0.35,
    "k_o": 10.0,
    "dt": 0.002,
    # not in the tables: arena-scale settings
    "v_h": 0.31,
    "rho_0": 1.0,
    "t_max": 300.0,
    "record_every": 50,
    "min_separation": 0.3,
    "grid_resolution": 0.05,
    "grid_inflation": 0.2,
    "arc_radius": 0.5,
}

SCALAR_KEYS = tuple(f.name for f in dataclasses.fields(ScenarioConfig) if f.name not in LIST_KEYS.values())
INT_KEYS = {"n_herders", "n_targets", "n_obstacles", "record_every", "seed", "max_resample"}


def defaults(mode: str = "ideal") -> ScenarioConfig:
    if mode not in MODES:
        raise ValidationError([f"mode must be one of {MODES}, got {mode!r}"])
    cfg = ScenarioConfig(mode=mode)
    if mode == "embodied":
        for k, v in EMBODIED_DEFAULTS.items():
            setattr(cfg, k, v)
    return cfg


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _eval_number(text: str) -> float:
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        raise ValueError(text)

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError, TypeError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def parse_pairs(lines, start_line: int = 1) -> list[tuple[str, str, int]]:
    """Split config text into ``(key, value, line)`` triples."""
    out = []
    for n, raw in enumerate(lines, start=start_line):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", n)
        key, value = (x.strip() for x in line.split("=", 1))
        if not key:
            raise ParseError("empty key", n)
        out.append((key, value, n))
    return out


def apply_pairs(cfg: ScenarioConfig, pairs) -> ScenarioConfig:
    """Assign parsed values; repeated list keys from a new source replace the old list."""
    touched = set()
    for key, value, line in pairs:
        if key == "mode":
            if value not in MODES:
                raise ParseError(f"unknown mode {value!r}", line)
            continue
        if key in LIST_KEYS:
            attr = LIST_KEYS[key]
            if attr not in touched:
                setattr(cfg, attr, [])
                touched.add(attr)
            try:
                row = tuple(float(_eval_number(v)) for v in value.split(","))
            except ValueError as exc:
                raise ParseError(str(exc), line) from None
            want = (5,) if key == "obstacle" else (2, 3)
            if len(row) not in want:
                raise ParseError(f"{key} takes {' or '.join(map(str, want))} numbers, got {len(row)}", line)
            getattr(cfg, attr).append(row)
            continue
        if key not in SCALAR_KEYS:
            raise ParseError(f"unknown key {key!r}", line)
        try:
            num = _eval_number(value)
        except ValueError as exc:
            raise ParseError(str(exc), line) from None
        if key in INT_KEYS:
            if float(num) != int(num):
                raise ParseError(f"{key} must be an integer", line)
            num = int(num)
        else:
            num = float(num)
        setattr(cfg, key, num)
    return cfg


def _mode_of(pairs) -> str | None:
    mode = None
    for key, value, line in pairs:
        if key == "mode":
            if value not in MODES:
                raise ParseError(f"unknown mode {value!r}", line)
            mode = value
    return mode


def bound_violations(cfg: ScenarioConfig) -> list[str]:
    out = []
    for f in dataclasses.fields(cfg):
        b = f.metadata.get("bounds")
        if b is None:
            continue
        lo, hi, lo_open, hi_open = b
        v = getattr(cfg, f.name)
        if not math.isfinite(v) and not (v == INF and hi == INF and not hi_open):
            out.append(f"{f.name}={v} is not finite")
            continue
        if (v < lo) or (lo_open and v == lo) or (v > hi) or (hi_open and v == hi):
            lb = "(" if lo_open else "["
            rb = ")" if hi_open else "]"
            out.append(f"{f.name}={v} outside {lb}{lo}, {hi}{rb}")
    return out


def config_from_text(text: str, mode: str | None = None, overrides=()) -> ScenarioConfig:
    pairs = parse_pairs(text.splitlines())
    over = parse_pairs(overrides, start_line=1) if overrides else []
    chosen = mode or _mode_of(over) or _mode_of(pairs) or "ideal"
    cfg = defaults(chosen)
    apply_pairs(cfg, pairs)
    apply_pairs(cfg, over)
    bad = bound_violations(cfg)
    if bad:
        raise ValidationError(bad)
    return cfg


def load_config(path, mode: str | None = None, overrides=()) -> ScenarioConfig:
    """Read a config file; ``overrides`` are extra ``key=value`` strings applied last."""
    return config_from_text(Path(path).read_text(encoding="utf-8"), mode=mode, overrides=overrides)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: ScenarioConfig) -> str:
    lines = [f"mode = {cfg.mode}"]
    for k in SCALAR_KEYS:
        if k != "mode":
            lines.append(f"{k} = {_fmt(getattr(cfg, k))}")
    for key, attr in LIST_KEYS.items():
        for row in getattr(cfg, attr):
            lines.append(f"{key} = " + ", ".join(_fmt(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def key_table() -> list[tuple[str, str, str, str]]:
    """``(key, ideal default, embodied default, bound)`` rows for help output."""
    rows = []
    ideal, emb = defaults("ideal"), defaults("embodied")
    for f in dataclasses.fields(ScenarioConfig):
        if f.name in LIST_KEYS.values():
            continue
        b = f.metadata.get("bounds")
        bound = ""
        if b:
            lo, hi, lo_open, hi_open = b
            bound = f"{'(' if lo_open else '['}{lo:g}, {hi:g}{')' if hi_open else ']'}"
        rows.append((f.name, _fmt(getattr(ideal, f.name)), _fmt(getattr(emb, f.name)), bound))
    return rows


# ---------------------------------------------------------------------------
# Scenario realisation
# ---------------------------------------------------------------------------


@dataclass
class Scenario:
    """A config with every random choice resolved."""

    config: ScenarioConfig
    obstacles: list[ConvexPolygon]
    herders: np.ndarray
    targets: np.ndarray
    herder_heading: np.ndarray
    target_heading: np.ndarray
    obstacle_rows: list = field(default_factory=list)


def seed_streams(seed: int):
    """Return ``(scenario_ss, dynamics_ss)`` seed sequences for a run seed."""
    scen, dyn = np.random.SeedSequence(int(seed)).spawn(2)
    return scen, dyn


def obstacle_clearance(cfg: ScenarioConfig) -> float:
    """Required gap between obstacle boundaries."""
    gap = cfg.lambda_o + cfg.epsilon_o
    if cfg.mode == "embodied":
        gap += cfg.d_th
    return gap


def layout_violations(cfg: ScenarioConfig, obstacles: list[ConvexPolygon]) -> list[str]:
    out = []
    gap = obstacle_clearance(cfg)
    for i in range(len(obstacles)):
        for j in range(i + 1, len(obstacles)):
            a, b = obstacles[i], obstacles[j]
            nested = bool(a.contains(b.centroid, strict=False) or b.contains(a.centroid, strict=False))
            d = set_distance(a, b)
            if nested or not d > gap:
                out.append(f"obstacles {i} and {j}: boundary distance {d:.4g} m must exceed {gap:.4g} m")
    for i, poly in enumerate(obstacles):
        d = float(boundary_distance(np.zeros(2), poly))
        if poly.contains(np.zeros(2), strict=False) or d <= cfg.rho_g:
            out.append(f"obstacle {i} reaches into the goal region (clearance {d:.4g} m)")
    return out


def agent_violations(cfg: ScenarioConfig, obstacles, herders, targets) -> list[str]:
    out = []
    for kind, pts in (("herder", herders), ("target", targets)):
        for k, q in enumerate(np.asarray(pts, dtype=float).reshape(-1, 2)):
            for j, poly in enumerate(obstacles):
                if poly.contains(q, strict=False) or boundary_distance(q, poly) <= cfg.epsilon_o:
                    out.append(f"{kind} {k} starts within {cfg.epsilon_o} m of obstacle {j}")
    return out


def _rect_from_row(row) -> ConvexPolygon:
    cx, cy, w, h, ang = row
    return ConvexPolygon.rectangle((cx, cy), w, h, ang)


def generate_obstacles(cfg: ScenarioConfig, rng: np.random.Generator, count: int) -> list[tuple]:
    """Random rectangles, redrawn as a whole until the layout is valid."""
    for _ in range(cfg.max_resample):
        rows = []
        for _ in range(count):
            w = rng.uniform(cfg.obstacle_width_min, cfg.obstacle_width_max)
            h = rng.uniform(cfg.obstacle_height_min, cfg.obstacle_height_max)
            r = cfg.rho_0 * math.sqrt(rng.uniform())
            a = rng.uniform(-math.pi, math.pi)
            rows.append((r * math.cos(a), r * math.sin(a), w, h, rng.uniform(0.0, math.pi)))
        if not layout_violations(cfg, [_rect_from_row(r) for r in rows]):
            return rows
    raise GenerationError([f"no valid obstacle layout after {cfg.max_resample} attempts"])


def sample_agents(cfg, rng, count, obstacles, radius) -> np.ndarray:
    pts: list[np.ndarray] = []
    attempts = 0
    while len(pts) < count:
        attempts += 1
        if attempts > cfg.max_resample * max(count, 1):
            raise GenerationError(["could not place agents outside obstacles"])
        r = radius * math.sqrt(rng.uniform())
        a = rng.uniform(-math.pi, math.pi)
        q = np.array([r * math.cos(a), r * math.sin(a)])
        if agent_violations(cfg, obstacles, q, np.zeros((0, 2))):
            continue
        if cfg.min_separation > 0 and pts and np.min(norm(np.array(pts) - q)) < cfg.min_separation:
            continue
        pts.append(q)
    return np.array(pts, dtype=float).reshape(-1, 2)


def _split_rows(rows):
    arr = np.array([r[:2] for r in rows], dtype=float).reshape(-1, 2)
    heading = np.array([r[2] if len(r) > 2 else 0.0 for r in rows], dtype=float)
    return arr, heading


def realize(cfg: ScenarioConfig) -> Scenario:
    """Resolve random obstacles and initial positions from the config seed."""
    scen_ss, _ = seed_streams(cfg.seed)
    rng = np.random.default_rng(scen_ss)
    rows = list(cfg.obstacles)
    if not rows and cfg.n_obstacles > 0:
        rows = generate_obstacles(cfg, rng, cfg.n_obstacles)
    obstacles = [_rect_from_row(r) for r in rows]
    if cfg.herders:
        herders, hh = _split_rows(cfg.herders)
    else:
        herders = sample_agents(cfg, rng, cfg.n_herders, obstacles, cfg.rho_0)
        hh = rng.uniform(-math.pi, math.pi, len(herders))
    if cfg.targets:
        targets, th = _split_rows(cfg.targets)
    else:
        targets = sample_agents(cfg, rng, cfg.n_targets, obstacles, cfg.rho_0)
        th = rng.uniform(-math.pi, math.pi, len(targets))
    return Scenario(cfg, obstacles, herders, targets, hh, th, rows)


def freeze(scn: Scenario) -> ScenarioConfig:
    """Config with the realised obstacles and positions written out explicitly."""
    cfg = dataclasses.replace(scn.config)
    cfg.obstacles = [tuple(float(x) for x in r) for r in scn.obstacle_rows]
    cfg.n_obstacles = len(cfg.obstacles)
    cfg.herders = [(float(x), float(y), float(h)) for (x, y), h in zip(scn.herders, scn.herder_heading)]
    cfg.targets = [(float(x), float(y), float(h)) for (x, y), h in zip(scn.targets, scn.target_heading)]
    cfg.n_herders, cfg.n_targets = len(cfg.herders), len(cfg.targets)
    return cfg


def generate_scenario(cfg: ScenarioConfig) -> ScenarioConfig:
    """Draw a random layout and positions and return them as an explicit config.

    Running the returned config reproduces a run of ``cfg`` exactly.
    """
    return freeze(realize(cfg))


# ---------------------------------------------------------------------------
# Trace files
# ---------------------------------------------------------------------------

TRACE_HEADER_COMMENT = "# units: t [s], x/y [m], heading [rad]; eta/mu/sigma/zeta dimensionless; empty = not applicable"
TRACE_HEADER = ("t[s]", "id", "kind", "x[m]", "y[m]", "heading[rad]", "eta", "mu", "sigma", "zeta")


def _num(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_trace(trace: SimulationTrace, path) -> None:
    """One row per agent per frame; floats are written at full precision."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(TRACE_HEADER_COMMENT + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for k in range(trace.n_frames):
            t = _num(trace.times[k])
            for i in range(trace.n_herders):
                x, y = trace.herders[k, i]
                w.writerow(
                    [t, i, "herder", _num(x), _num(y), _num(trace.herder_heading[k, i]),
                     _num(trace.eta[k, i]), _num(trace.mu[k, i]), _num(trace.sigma[k, i]), _num(trace.zeta[k, i])]
                )
            for a in range(trace.n_targets):
                x, y = trace.targets[k, a]
                w.writerow([t, a, "target", _num(x), _num(y), _num(trace.target_heading[k, a]), "", "", "", ""])


def _float(s: str) -> float:
    return float(s) if s != "" else math.nan


def read_trace(path) -> SimulationTrace:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    if not rows or tuple(rows[0]) != TRACE_HEADER:
        raise ParseError(f"{path}: trace header must be {','.join(TRACE_HEADER)}", 1)
    rows = rows[1:]
    if any(len(r) != len(TRACE_COLUMNS) for r in rows):
        raise ParseError(f"{path}: every row needs {len(TRACE_COLUMNS)} columns")
    times: list[float] = []
    frames: dict[float, dict] = {}
    n = m = 0
    for r in rows:
        t = float(r[0])
        if t not in frames:
            if times and t < times[-1]:
                raise ParseError(f"{path}: time must be non-decreasing")
            times.append(t)
            frames[t] = {"herder": {}, "target": {}}
        kind = r[2]
        if kind not in ("herder", "target"):
            raise ParseError(f"{path}: unknown agent kind {kind!r}")
        idx = int(r[1])
        frames[t][kind][idx] = [_float(x) for x in r[3:]]
        if kind == "herder":
            n = max(n, idx + 1)
        else:
            m = max(m, idx + 1)
    k = len(times)
    tr = SimulationTrace.empty(n, m)
    tr.times = np.array(times, dtype=float)
    tr.herders = np.full((k, n, 2), np.nan)
    tr.targets = np.full((k, m, 2), np.nan)
    tr.herder_heading = np.full((k, n), np.nan)
    tr.target_heading = np.full((k, m), np.nan)
    tr.eta, tr.mu, tr.sigma, tr.zeta = (np.full((k, n), np.nan) for _ in range(4))
    for f, t in enumerate(times):
        for i, v in frames[t]["herder"].items():
            tr.herders[f, i] = v[0:2]
            tr.herder_heading[f, i] = v[2]
            tr.eta[f, i], tr.mu[f, i], tr.sigma[f, i], tr.zeta[f, i] = v[3:7]
        for a, v in frames[t]["target"].items():
            tr.targets[f, a] = v[0:2]
            tr.target_heading[f, a] = v[2]
    return tr
