"""
Command-line interface.

Exit codes: 0 success, 1 usage error, 2 invalid configuration, 3 physics or
generator failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .engine import Simulation, run_batch, validate_scenario
from .errors import GenerationError, ParseError, PhysicsViolation, ShepherdingError, ValidationError
from .plots import emit_plots, radii_series
from .records import RunMetrics
from .scenario import (
    ScenarioConfig,
    config_from_text,
    dump_config,
    freeze,
    generate_scenario,
    key_table,
    read_trace,
    realize,
    write_trace,
)

EXIT_USAGE, EXIT_INVALID, EXIT_PHYSICS = 1, 2, 3
SCENARIO_DIR = Path(__file__).with_name("scenarios")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _key_help() -> str:
    rows = key_table()
    width = max(len(r[0]) for r in rows)
    lines = ["config keys (ideal default / embodied default, bound):"]
    for key, ideal, emb, bound in rows:
        default = ideal if ideal == emb else f"{ideal} / {emb}"
        lines.append(f"  {key:<{width}}  {default:<28} {bound}")
    lines.append("  obstacle = cx, cy, width, height, angle   (repeatable)")
    lines.append("  herder   = x, y[, heading]                (repeatable)")
    lines.append("  target   = x, y[, heading]                (repeatable)")
    lines.append(f"bundled scenarios: {', '.join(sorted(p.name for p in SCENARIO_DIR.glob('*.cfg')))}")
    return "\n".join(lines)


def default_jobs() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required, help="scenario file, or the name of a bundled scenario")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key (repeatable)")
    p.add_argument("--seed", type=int, help="master seed (same as --set seed=N)")
    p.add_argument("--mode", choices=("ideal", "embodied", "baseline"), help="model variant; selects its defaults")
    p.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    epilog = _key_help()
    parser = _Parser(prog="shepherd", description="Obstacle-aware shepherding simulator.", epilog=epilog, formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="simulate one scenario", epilog=epilog, formatter_class=fmt)
    _common(p)
    p.add_argument("--no-plots", action="store_true", help="skip the figures")

    p = sub.add_parser("batch", help="independent runs over consecutive seeds", epilog=epilog, formatter_class=fmt)
    _common(p)
    p.add_argument("-n", "--n-seeds", type=int, default=50)
    p.add_argument("--jobs", type=int, default=default_jobs(), help="worker processes (default: available cores)")

    p = sub.add_parser("compare", help="proposed strategy vs the centre-of-mass baseline", epilog=epilog, formatter_class=fmt)
    _common(p, config_required=False)
    p.add_argument("-n", "--n-seeds", type=int, default=50)
    p.add_argument("--jobs", type=int, default=default_jobs())
    p.add_argument("--order", choices=("proposed-first", "baseline-first"), default="proposed-first")

    p = sub.add_parser("plot", help="redraw figures from a saved trace", epilog=epilog, formatter_class=fmt)
    _common(p, config_required=False)
    p.add_argument("--trace", type=Path, required=True)

    p = sub.add_parser("validate", help="check a scenario without running it", epilog=epilog, formatter_class=fmt)
    _common(p)

    p = sub.add_parser("gen-scenario", help="write a random validated scenario", epilog=epilog, formatter_class=fmt)
    _common(p, config_required=False)
    return parser


# -- helpers -------------------------------------------------------------------


def _config_path(name: str) -> Path:
    path = Path(name)
    if path.is_file():
        return path
    bundled = SCENARIO_DIR / name
    for cand in (bundled, bundled.with_suffix(".cfg")):
        if cand.is_file():
            return cand
    raise UsageError(f"config file not found: {name}")


def load(args, default_text: str = "") -> ScenarioConfig:
    text = _config_path(args.config).read_text(encoding="utf-8") if args.config else default_text
    overrides = list(args.set)
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
    if args.seed is not None:
        overrides.append(f"seed = {args.seed}")
    return config_from_text(text, mode=args.mode, overrides=overrides)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


def metrics_payload(m: RunMetrics) -> dict:
    return {
        "units": {"time": "s", "distance": "m", "speed": "m/s", "chi": "fraction of targets in the goal"},
        **m.summary(),
        "series": {
            "t": m.times,
            "chi": m.chi_series,
            "herder_mean": m.herder_dist_mean,
            "herder_std": m.herder_dist_std,
            "target_mean": m.target_dist_mean,
            "target_std": m.target_dist_std,
        },
    }


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


# -- commands ------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = load(args)
    out = args.out or Path("results") / f"{cfg.mode}_seed{cfg.seed}"
    sim = Simulation(cfg)
    trace, metrics = sim.run()
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenario.cfg").write_text(dump_config(freeze(sim.scenario)), encoding="utf-8")
    write_trace(trace, out / "trace.csv")
    _write_json(out / "metrics.json", metrics_payload(metrics))
    if not args.no_plots and trace.n_frames:
        emit_plots(trace, metrics, sim.scenario.obstacles, cfg.rho_g, out)
    s = metrics.summary()
    print(
        f"chi = {s['final_chi']:.3f} at t = {s['final_time']:.2f} s; "
        f"all captured at {s['t_all_captured']} s; hold reached: {s['hold_reached']}; output in {out}"
    )
    return 0


def _batch_rows(result) -> list[dict]:
    return [
        {
            "seed": r.seed,
            "final_chi": r.final_chi,
            "t_all_captured": r.t_all_captured,
            "hold_reached": r.hold_reached,
            "final_time": r.final_time,
        }
        for r in result.runs
    ]


def _write_rows(path: Path, rows: list[dict]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("# units: times in s, chi dimensionless; empty t_all_captured = never captured\n")
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if v is None else v) for k, v in row.items()})


def cmd_batch(args) -> int:
    if args.n_seeds < 1 or args.jobs < 1:
        raise UsageError("--n-seeds and --jobs must be at least 1")
    cfg = load(args)
    result = run_batch(cfg, args.n_seeds, jobs=args.jobs)
    out = args.out or Path("results") / f"batch_{cfg.mode}_seed{cfg.seed}"
    out.mkdir(parents=True, exist_ok=True)
    for r in result.runs:
        d = out / f"seed_{r.seed}"
        d.mkdir(exist_ok=True)
        _write_json(d / "metrics.json", {**dataclasses.asdict(r), "units": {"time": "s"}})
    _write_rows(out / "runs.csv", _batch_rows(result))
    _write_json(out / "summary.json", result.summary())
    s = result.summary()
    print(f"{s['n']} runs: chi = {s['mean_chi']:.3f} +/- {s['std_chi']:.3f}, success rate {s['success_rate']:.2f}")
    return 0


def _fmt_time(v) -> str:
    return "-" if v is None else f"{v:.2f}"


def cmd_compare(args) -> int:
    if args.n_seeds < 1 or args.jobs < 1:
        raise UsageError("--n-seeds and --jobs must be at least 1")
    if args.config is None:
        args.config = "compare_single.cfg"
    cfg = load(args)
    proposed_mode = cfg.mode if cfg.mode != "baseline" else "ideal"
    methods = [("proposed", proposed_mode), ("baseline", "baseline")]
    if args.order == "baseline-first":
        methods.reverse()
    results = {}
    for name, mode in methods:
        results[name] = run_batch(dataclasses.replace(cfg, mode=mode), args.n_seeds, jobs=args.jobs)
    rows = []
    for name in ("proposed", "baseline"):
        s = results[name].summary()
        rows.append({"method": name, **s})
    print(f"{'method':<10} {'n':>4} {'chi mean':>9} {'chi std':>8} {'success':>8} {'t_cap median':>13} {'t_cap mean':>11}")
    for r in rows:
        print(
            f"{r['method']:<10} {r['n']:>4} {r['mean_chi']:>9.3f} {r['std_chi']:>8.3f} {r['success_rate']:>8.2f} "
            f"{_fmt_time(r['capture_time_median']):>13} {_fmt_time(r['capture_time_mean']):>11}"
        )
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        _write_json(args.out / "compare.json", {"units": {"time": "s"}, "methods": rows})
        for name in ("proposed", "baseline"):
            _write_rows(args.out / f"{name}_runs.csv", _batch_rows(results[name]))
    return 0


def cmd_plot(args) -> int:
    if not args.trace.is_file():
        raise UsageError(f"trace file not found: {args.trace}")
    if args.config is None:
        sibling = args.trace.with_name("scenario.cfg")
        if not sibling.is_file():
            raise UsageError("--config is required when the trace has no scenario.cfg next to it")
        args.config = str(sibling)
    cfg = load(args)
    trace = read_trace(args.trace)
    if trace.n_frames == 0:
        raise UsageError("the trace is empty")
    scn = realize(cfg)
    series = radii_series(trace, cfg.rho_g)
    metrics = RunMetrics(
        times=series["t"],
        chi_series=series["chi"],
        herder_dist_mean=series["herder_mean"],
        herder_dist_std=series["herder_std"],
        target_dist_mean=series["target_mean"],
        target_dist_std=series["target_std"],
        t_all_captured=None,
        final_chi=float(series["chi"][-1]),
        final_time=float(series["t"][-1]),
        steps=0,
        hold_reached=False,
    )
    out = args.out or args.trace.parent
    for path in emit_plots(trace, metrics, scn.obstacles, cfg.rho_g, out):
        print(path)
    return 0


def cmd_validate(args) -> int:
    cfg = load(args)
    problems = validate_scenario(cfg)
    if problems:
        for p in problems:
            print(f"invalid: {p}", file=sys.stderr)
        return EXIT_INVALID
    print("ok")
    return 0


GENERATOR_DEFAULTS = "n_herders = 10\nn_targets = 100\nn_obstacles = 7\nrho_0 = 50\n"


def cmd_gen_scenario(args) -> int:
    cfg = load(args, default_text=GENERATOR_DEFAULTS)
    if cfg.obstacles:
        raise UsageError("gen-scenario draws its own obstacles; remove obstacle lines from the config")
    text = dump_config(generate_scenario(cfg))
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text, encoding="utf-8")
        print(args.out)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {
    "run": cmd_run,
    "batch": cmd_batch,
    "compare": cmd_compare,
    "plot": cmd_plot,
    "validate": cmd_validate,
    "gen-scenario": cmd_gen_scenario,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"shepherd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GenerationError as exc:
        print(f"shepherd: generator failed: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except (ParseError, ValidationError) as exc:
        print(f"shepherd: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (PhysicsViolation, ShepherdingError) as exc:
        print(f"shepherd: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
