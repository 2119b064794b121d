"""
Static figures for one run.

Every figure is an SVG with a fixed hash salt and no timestamp, so the same run
always produces byte-identical files.  The numbers behind the radii figure are
written next to it as CSV.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402
from matplotlib.patches import Circle, Polygon  # noqa: E402

from .records import RunMetrics, SimulationTrace, capture_fraction, radial_stats  # noqa: E402

SERIES_COLUMNS = ("t", "herder_mean", "herder_std", "target_mean", "target_std", "chi")
SERIES_HEADER = "# units: t [s], distances to the goal centre [m], chi = captured fraction [-]"
HERDER_COLOR = "tab:blue"
TARGET_COLOR = "m"

plt.rcParams["svg.hashsalt"] = "shepherding"
plt.rcParams["svg.fonttype"] = "path"


def radii_series(trace: SimulationTrace, rho_g: float) -> dict[str, np.ndarray]:
    """Per-frame distance statistics and capture fraction, recomputed from positions."""
    rows = []
    for k in range(trace.n_frames):
        hm, hs = radial_stats(trace.herders[k])
        tm, ts = radial_stats(trace.targets[k])
        rows.append((trace.times[k], hm, hs, tm, ts, capture_fraction(trace.targets[k], rho_g)))
    arr = np.array(rows, dtype=float).reshape(-1, len(SERIES_COLUMNS))
    return {name: arr[:, j] for j, name in enumerate(SERIES_COLUMNS)}


def write_series(series: dict[str, np.ndarray], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(SERIES_HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for row in zip(*(series[c] for c in SERIES_COLUMNS)):
            w.writerow([repr(float(v)) for v in row])


def read_series(path) -> dict[str, np.ndarray]:
    with Path(path).open(encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    arr = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(-1, len(header))
    return {name: arr[:, j] for j, name in enumerate(header)}


def _save(fig, path, description: str) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None, "Description": description})
    plt.close(fig)
    return path


def _draw_world(ax, obstacles, rho_g: float) -> None:
    for poly in obstacles:
        ax.add_patch(Polygon(poly.vertices, closed=True, facecolor="0.75", edgecolor="0.3", lw=1.0))
    ax.add_patch(Circle((0.0, 0.0), rho_g, fill=False, ls="--", color="tab:green", lw=1.2))
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")


def _fit_view(ax, trace: SimulationTrace, obstacles, rho_g: float) -> None:
    pts = [trace.herders.reshape(-1, 2), trace.targets.reshape(-1, 2), np.array([[rho_g, rho_g], [-rho_g, -rho_g]])]
    pts += [p.vertices for p in obstacles]
    allp = np.concatenate(pts)
    allp = allp[np.all(np.isfinite(allp), axis=1)]
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    pad = 0.05 * float(np.max(hi - lo)) + 1e-9
    ax.set_xlim(lo[0] - pad, hi[0] + pad)
    ax.set_ylim(lo[1] - pad, hi[1] + pad)


def _gradient_path(ax, xy, times, cmap):
    if len(xy) < 2:
        return None
    segs = np.stack([xy[:-1], xy[1:]], axis=1)
    lc = LineCollection(segs, cmap=cmap, lw=1.4)
    lc.set_array(times[1:])
    lc.set_clim(times[0], times[-1] if times[-1] > times[0] else times[0] + 1.0)
    ax.add_collection(lc)
    return lc


def trajectory_plot(trace: SimulationTrace, obstacles, rho_g: float, path) -> Path:
    """Paths coloured from light (t = 0) to dark (t = t_end)."""
    fig, ax = plt.subplots(figsize=(6.4, 6.0))
    _draw_world(ax, obstacles, rho_g)
    lc = None
    for i in range(trace.n_herders):
        lc = _gradient_path(ax, trace.herders[:, i], trace.times, "Blues") or lc
    for a in range(trace.n_targets):
        _gradient_path(ax, trace.targets[:, a], trace.times, "RdPu")
    if trace.n_frames:
        ax.plot(*trace.herders[0].T, "D", color=HERDER_COLOR, mfc="none", ms=6, label="herders, t = 0")
        ax.plot(*trace.herders[-1].T, "D", color=HERDER_COLOR, ms=6, label="herders, final")
        ax.plot(*trace.targets[0].T, "o", color=TARGET_COLOR, mfc="none", ms=4, label="targets, t = 0")
        ax.plot(*trace.targets[-1].T, "o", color=TARGET_COLOR, ms=4, label="targets, final")
        ax.legend(loc="best", fontsize=8)
    if lc is not None:
        fig.colorbar(lc, ax=ax, label="t [s]", shrink=0.8)
    _fit_view(ax, trace, obstacles, rho_g)
    return _save(fig, path, "trajectories; x, y in m, colour = time in s")


def radii_plot(series: dict[str, np.ndarray], chi: np.ndarray, rho_g: float, path) -> Path:
    """Mean +/- std distance to the goal centre, with the capture fraction inset."""
    t = series["t"]
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for key, color, label in (("herder", HERDER_COLOR, "herders"), ("target", TARGET_COLOR, "targets")):
        m, s = series[f"{key}_mean"], series[f"{key}_std"]
        ax.plot(t, m, color=color, label=label)
        ax.fill_between(t, m - s, m + s, color=color, alpha=0.2, lw=0)
    ax.axhline(rho_g, ls="--", color="tab:green", label="goal radius")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("distance to goal [m]")
    ax.legend(loc="upper right", fontsize=8)
    inset = ax.inset_axes([0.55, 0.45, 0.3, 0.28])
    inset.plot(t, chi, color="k", lw=1.0)
    inset.set_ylim(-0.05, 1.05)
    inset.set_title("χ", fontsize=8)
    inset.tick_params(labelsize=7)
    return _save(fig, path, "radii; t in s, distances in m, chi dimensionless")


def snapshot_plot(trace: SimulationTrace, frame: int, obstacles, rho_g: float, path) -> Path:
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    _draw_world(ax, obstacles, rho_g)
    ax.plot(*trace.herders[frame].T, "D", color=HERDER_COLOR, ms=6, label="herders")
    ax.plot(*trace.targets[frame].T, "o", color=TARGET_COLOR, ms=4, label="targets")
    if trace.n_herders and np.all(np.isfinite(trace.herder_heading[frame])):
        h = trace.herder_heading[frame]
        ax.quiver(*trace.herders[frame].T, np.cos(h), np.sin(h), color=HERDER_COLOR, width=0.004)
    ax.set_title(f"t = {trace.times[frame]:.2f} s")
    ax.legend(loc="best", fontsize=8)
    _fit_view(ax, trace, obstacles, rho_g)
    return _save(fig, path, "scene snapshot; x, y in m")


def emit_plots(trace: SimulationTrace, metrics: RunMetrics, obstacles, rho_g: float, out_dir) -> list[Path]:
    """Write all figures and the radii series; returns the written paths."""
    if trace.n_frames == 0:
        raise ValueError("cannot plot an empty trace")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series = radii_series(trace, rho_g)
    write_series(series, out / "radii_series.csv")
    return [
        out / "radii_series.csv",
        trajectory_plot(trace, obstacles, rho_g, out / "trajectories.svg"),
        radii_plot(series, metrics.chi_series, rho_g, out / "radii.svg"),
        snapshot_plot(trace, 0, obstacles, rho_g, out / "snapshot_start.svg"),
        snapshot_plot(trace, trace.n_frames - 1, obstacles, rho_g, out / "snapshot_end.svg"),
    ]
