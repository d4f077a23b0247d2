"""Figure rendering for trajectories and strategy families.

Figures are written to files next to the delimited output; nothing here
is needed by the analysis itself.
"""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .casestudy import Trajectory
from .intervals import Interval


def plot_trajectory(traj: Trajectory, path: str, bounds: Optional[Interval] = None,
                    band: Optional[Interval] = None, title: str = "") -> None:
    """Oil level over time with the min/max envelope and pump activity."""
    times = [float(bp.time) for bp in traj.breakpoints]
    nom = [float(bp.level_nominal) for bp in traj.breakpoints]
    lo = [float(bp.level_min) for bp in traj.breakpoints]
    hi = [float(bp.level_max) for bp in traj.breakpoints]

    fig, ax = plt.subplots(figsize=(9, 4))
    if lo != nom or hi != nom:
        ax.fill_between(times, lo, hi, color="tab:red", alpha=0.25, label="min/max envelope")
    ax.plot(times, nom, color="tab:blue", lw=1.4, label="oil level")
    pump_lvl = min(lo) - 0.6
    seg_t, seg_on = [], []
    for a, b in zip(traj.breakpoints, traj.breakpoints[1:]):
        if b.pump_on:
            ax.plot([float(a.time), float(b.time)], [pump_lvl, pump_lvl], color="tab:green", lw=4)
    for limit, style in ((bounds, "k--"), (band, "g:")):
        if limit is not None:
            if limit.lo is not None:
                ax.axhline(float(limit.lo), ls=style[1:], color=style[0], lw=0.9)
            if limit.hi is not None:
                ax.axhline(float(limit.hi), ls=style[1:], color=style[0], lw=0.9)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("oil volume (l)")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_strategy_family(entries: Sequence, path: str, title: str = "") -> None:
    """One horizontal line per entry level; green spans mark pump-on times."""
    fig, ax = plt.subplots(figsize=(7, 5))
    for s in entries:
        y = float(s.w0)
        ax.plot([0, 20], [y, y], color="0.85", lw=0.7)
        for _, on, off in s.switch_times:
            if off > on:
                ax.plot([float(on), float(off)], [y, y], color="tab:green", lw=2.2)
    for k in range(11):
        ax.axvline(2 * k, color="0.9", lw=0.5)
    ax.set_xlabel("time within cycle (s)")
    ax.set_ylabel("initial oil volume (l)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
