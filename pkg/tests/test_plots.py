import numpy as np
import pytest

from shepherding.engine import Simulation, run
from shepherding.plots import SERIES_COLUMNS, emit_plots, radii_series, read_series
from shepherding.records import RunMetrics, SimulationTrace
from shepherding.scenario import config_from_text

SCENE = "obstacle = 15, 15, 30, 10, 3*pi/4\nn_herders = 2\nn_targets = 6\nt_max = 15\nseed = 3"


@pytest.fixture(scope="module")
def single_run():
    sim = Simulation(config_from_text(SCENE))
    trace, metrics = sim.run()
    return sim, trace, metrics


def test_emits_every_artifact(tmp_path, single_run):
    sim, trace, metrics = single_run
    paths = emit_plots(trace, metrics, sim.scenario.obstacles, 10.0, tmp_path)
    names = sorted(p.name for p in paths)
    assert names == ["radii.svg", "radii_series.csv", "snapshot_end.svg", "snapshot_start.svg", "trajectories.svg"]
    for p in paths:
        assert p.stat().st_size > 0
    assert (tmp_path / "radii.svg").read_text().lstrip().startswith("<?xml")


def test_series_file_equals_recomputation_from_trace(tmp_path, single_run):
    sim, trace, metrics = single_run
    emit_plots(trace, metrics, sim.scenario.obstacles, 10.0, tmp_path)
    series = read_series(tmp_path / "radii_series.csv")
    assert tuple(series) == SERIES_COLUMNS
    for k in range(trace.n_frames):
        h = np.hypot(trace.herders[k, :, 0], trace.herders[k, :, 1])
        t = np.hypot(trace.targets[k, :, 0], trace.targets[k, :, 1])
        assert series["herder_mean"][k] == pytest.approx(h.mean(), rel=1e-12)
        assert series["herder_std"][k] == pytest.approx(h.std(), rel=1e-12, abs=1e-12)
        assert series["target_mean"][k] == pytest.approx(t.mean(), rel=1e-12)
        assert series["chi"][k] == np.mean(t <= 10.0)


def test_plotted_chi_is_the_engine_chi(single_run):
    _, trace, metrics = single_run
    assert np.array_equal(radii_series(trace, 10.0)["chi"], metrics.chi_series)


def test_stationary_agent_gives_flat_radius():
    cfg = config_from_text("target = 3, 4", overrides=["n_herders=0", "diffusion=0", "t_max=2"])
    trace, _ = run(cfg)
    series = radii_series(trace, cfg.rho_g)
    assert np.all(series["target_mean"] == 5.0)
    assert np.all(series["target_std"] == 0.0)


def test_figures_are_byte_identical_across_runs(tmp_path, single_run):
    sim, trace, metrics = single_run
    a = emit_plots(trace, metrics, sim.scenario.obstacles, 10.0, tmp_path / "a")
    b = emit_plots(trace, metrics, sim.scenario.obstacles, 10.0, tmp_path / "b")
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes(), pa.name


def test_empty_trace_is_refused(tmp_path):
    empty = np.zeros(0)
    m = RunMetrics(empty, empty, empty, empty, empty, empty, None, 1.0, 0.0, 0, False)
    with pytest.raises(ValueError):
        emit_plots(SimulationTrace.empty(1, 1), m, [], 10.0, tmp_path)
