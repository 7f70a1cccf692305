"""Deterministic SVG figures and CSV tables for trajectories.

Figures use matplotlib's object API with the SVG canvas directly (no pyplot
state), so scenarios can be rendered from several threads at once.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from matplotlib import rcParams
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .integrate import Trajectory, quotient_observable
from .lie import PLANAR, Scenario, get_chart

# 800 x 800 user units in the SVG viewBox (1 unit = 1 pt at 72 per inch)
FIGURE_INCHES = 800 / 72
AGENT_COLORS = ("tab:green", "tab:blue", "tab:orange", "tab:red", "tab:purple", "tab:brown")

rcParams["svg.hashsalt"] = "equidyn"
rcParams["svg.fonttype"] = "path"


def format_number(value: float) -> str:
    return format(float(value), ".17g")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_number(v) for v in row) + "\n")


def trajectory_table(traj: Trajectory):
    names = get_chart(traj.scenario, traj.c).agent_names(traj.n_agents)
    return ["t", *names], np.column_stack([traj.times, traj.states])


def invariant_table(traj: Trajectory):
    q = quotient_observable(traj)
    return ["t", *q.names], np.column_stack([q.times, q.values]) if len(q.times) else \
        np.zeros((0, 1 + len(q.names))), q


def _agent_color(i: int) -> str:
    return AGENT_COLORS[i % len(AGENT_COLORS)]


def _plane_axes(fig, traj: Trajectory, title: str):
    ax = fig.add_subplot(1, 1, 1)
    blocks = traj.blocks()
    for i in range(traj.n_agents):
        xy = blocks[:, i, :2]
        ax.plot(xy[:, 0], xy[:, 1], color=_agent_color(i), lw=1.5, label=f"agent {i + 1}")
        ax.plot(*xy[0], "o", color=_agent_color(i), ms=5)
        ax.plot(*xy[-1], "s", color=_agent_color(i), ms=5)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=9)
    ax.grid(True, alpha=0.3)


def _timeseries_axes(fig, traj: Trajectory, title: str):
    chart = get_chart(traj.scenario, traj.c)
    blocks = traj.blocks()
    names = chart.coordinate_names
    if traj.scenario is Scenario.SU2_QUANTUM:
        q = quotient_observable(traj)
        panels = [(name, q.times, [q[name]]) for name in q.names]
    else:
        panels = [(name, traj.times, [blocks[:, i, k] for i in range(traj.n_agents)])
                  for k, name in enumerate(names)]
    axes = fig.subplots(len(panels), 1, sharex=True, squeeze=False)[:, 0]
    for ax, (name, times, series) in zip(axes, panels):
        for i, values in enumerate(series):
            ax.plot(times, values, color=_agent_color(i), lw=1.2,
                    label=f"agent {i + 1}" if len(series) > 1 else None)
        ax.set_ylabel(name)
        ax.grid(True, alpha=0.3)
    if traj.n_agents > 1:
        axes[0].legend(loc="best", fontsize=9)
    axes[0].set_title(title)
    axes[-1].set_xlabel("t")


def render_svg(traj: Trajectory, title: str = "") -> str:
    """Planar scenarios draw trajectories in the plane; others draw coordinate panels."""
    fig = Figure(figsize=(FIGURE_INCHES, FIGURE_INCHES), dpi=72)
    FigureCanvasSVG(fig)
    if traj.scenario in PLANAR:
        _plane_axes(fig, traj, title)
    else:
        _timeseries_axes(fig, traj, title)
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def write_outputs(traj: Trajectory, out_dir: Path, name: str, title: str = "", *,
                  csv: bool = True, svg: bool = True) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if csv:
        header, rows = trajectory_table(traj)
        path = out_dir / f"{name}_traj.csv"
        write_csv(path, header, rows)
        written.append(path)
        header, rows, _ = invariant_table(traj)
        path = out_dir / f"{name}_invariants.csv"
        write_csv(path, header, rows)
        written.append(path)
    if svg:
        path = out_dir / f"{name}.svg"
        path.write_text(render_svg(traj, title or name), encoding="utf-8", newline="\n")
        written.append(path)
    return written
