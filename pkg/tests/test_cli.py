import csv
import json
import subprocess
import sys

import pytest

from shepherding.cli import EXIT_INVALID, EXIT_PHYSICS, EXIT_USAGE, main
from shepherding.scenario import SCALAR_KEYS, load_config

QUICK = ["--set", "t_max=5"]


def test_missing_config_is_a_usage_error(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == EXIT_USAGE
    assert "usage:" in capsys.readouterr().err


def test_no_subcommand_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == EXIT_USAGE


def test_required_config_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run"])
    assert exc.value.code == EXIT_USAGE


def test_fig2_scenario_runs_and_writes_artifacts(tmp_path):
    out = tmp_path / "run"
    assert main(["run", "--config", "fig2_single.cfg", "--seed", "1", "--out", str(out)]) == 0
    for name in ("trace.csv", "metrics.json", "scenario.cfg", "radii_series.csv", "radii.svg", "trajectories.svg",
                 "snapshot_start.svg", "snapshot_end.svg"):
        assert (out / name).is_file(), name
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["final_chi"] == 1.0 and metrics["hold_reached"]
    with (out / "trace.csv").open() as fh:
        fh.readline()
        assert next(csv.reader(fh))[:3] == ["t[s]", "id", "kind"]


def test_seed_flag_is_deterministic_and_matters(tmp_path):
    args = ["run", "--config", "compare_single.cfg", "--no-plots", *QUICK]
    for name, seed in (("a", "7"), ("b", "7"), ("c", "8")):
        assert main([*args, "--seed", seed, "--out", str(tmp_path / name)]) == 0
    trace = {n: (tmp_path / n / "trace.csv").read_bytes() for n in "abc"}
    assert trace["a"] == trace["b"]
    assert trace["a"] != trace["c"]


def test_set_seed_equals_seed_flag(tmp_path):
    base = ["run", "--config", "compare_single.cfg", "--no-plots", *QUICK]
    main([*base, "--seed", "7", "--out", str(tmp_path / "a")])
    main([*base, "--set", "seed=7", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


def test_saved_scenario_reproduces_the_run(tmp_path):
    main(["run", "--config", "compare_single.cfg", "--no-plots", *QUICK, "--out", str(tmp_path / "a")])
    main(["run", "--config", str(tmp_path / "a" / "scenario.cfg"), "--no-plots", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


def test_bad_override_is_a_validation_error(tmp_path):
    assert main(["run", "--config", "fig2_single.cfg", "--set", "gamma=1.5", "--out", str(tmp_path)]) == EXIT_INVALID
    assert main(["run", "--config", "fig2_single.cfg", "--set", "nonsense=1", "--out", str(tmp_path)]) == EXIT_INVALID


def test_override_without_equals_is_a_usage_error(tmp_path):
    assert main(["run", "--config", "fig2_single.cfg", "--set", "gamma", "--out", str(tmp_path)]) == EXIT_USAGE


def test_validate(tmp_path, capsys):
    assert main(["validate", "--config", "fig2_single.cfg"]) == 0
    bad = tmp_path / "bad.cfg"
    bad.write_text("obstacle = 0, 20, 4, 4, 0\nobstacle = 3, 20, 4, 4, 0\n")
    assert main(["validate", "--config", str(bad)]) == EXIT_INVALID
    assert "obstacles 0 and 1" in capsys.readouterr().err


def test_batch_rows(tmp_path):
    out = tmp_path / "b"
    assert main(["batch", "--config", "compare_single.cfg", *QUICK, "-n", "2", "--jobs", "1", "--out", str(out)]) == 0
    with (out / "runs.csv").open() as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    assert [r["seed"] for r in rows] == ["0", "1"]
    assert json.loads((out / "summary.json").read_text())["n"] == 2


def test_compare_single_seed_and_order(tmp_path, capsys):
    common = ["compare", *QUICK, "-n", "1", "--jobs", "1"]
    assert main([*common, "--out", str(tmp_path / "a")]) == 0
    table = capsys.readouterr().out
    assert "proposed" in table and "baseline" in table
    assert main([*common, "--order", "baseline-first", "--out", str(tmp_path / "b")]) == 0
    a = json.loads((tmp_path / "a" / "compare.json").read_text())
    b = json.loads((tmp_path / "b" / "compare.json").read_text())
    assert a == b
    assert [r["method"] for r in a["methods"]] == ["proposed", "baseline"]
    assert all(r["mean_chi"] is not None for r in a["methods"])


def test_plot_from_saved_trace(tmp_path):
    run_dir = tmp_path / "r"
    main(["run", "--config", "compare_single.cfg", "--no-plots", *QUICK, "--out", str(run_dir)])
    assert main(["plot", "--trace", str(run_dir / "trace.csv"), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "radii.svg").is_file()
    assert (tmp_path / "p" / "radii_series.csv").is_file()


def test_gen_scenario_same_seed_same_file(tmp_path):
    for name in ("a.cfg", "b.cfg"):
        assert main(["gen-scenario", "--seed", "5", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.cfg").read_bytes() == (tmp_path / "b.cfg").read_bytes()
    cfg = load_config(tmp_path / "a.cfg")
    assert len(cfg.obstacles) == 7 and len(cfg.herders) == 10 and len(cfg.targets) == 100
    assert main(["validate", "--config", str(tmp_path / "a.cfg")]) == 0


def test_gen_scenario_failure_exit_code(tmp_path):
    args = ["gen-scenario", "--set", "n_obstacles=30", "--set", "rho_0=15", "--set", "max_resample=5"]
    assert main([*args, "--out", str(tmp_path / "x.cfg")]) == EXIT_PHYSICS


@pytest.mark.parametrize("sub", ["run", "batch", "compare", "plot", "validate", "gen-scenario"])
def test_help_lists_every_key(sub):
    proc = subprocess.run(
        [sys.executable, "-m", "shepherding.cli", sub, "--help"], capture_output=True, text=True, check=True
    )
    text = proc.stdout
    for key in SCALAR_KEYS:
        if key != "mode":
            assert f"  {key} " in text, key
    assert any(ln.split()[:1] == ["gamma"] and ln.rstrip().endswith("[0, 1]") for ln in text.splitlines())
    for flag in ("--config", "--set", "--seed", "--out", "--mode"):
        assert flag in text
