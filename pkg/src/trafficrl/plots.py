"""SVG plot emission: reward curves and per-lane spatiotemporal trajectories."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

CAV_COLORS = ["tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple"]


def _rolling(values, window):
    vals = np.asarray(values, dtype=float)
    if len(vals) == 0:
        return vals, vals
    w = max(1, min(window, len(vals)))
    mean = np.array([vals[max(0, i - w + 1):i + 1].mean()
                     for i in range(len(vals))])
    std = np.array([vals[max(0, i - w + 1):i + 1].std()
                    for i in range(len(vals))])
    return mean, std


def render_reward_curves(logs, path, window: int = 10) -> None:
    """Per-dimension reward vs episode with a rolling mean +- std band."""
    episodes = [float(r["episode"]) if isinstance(r, dict) else r.episode
                for r in logs]
    l_rewards = [float(r["l_reward"]) if isinstance(r, dict) else r.l_reward
                 for r in logs]
    f_rewards = [float(r["f_reward"]) if isinstance(r, dict) else r.f_reward
                 for r in logs]
    fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for ax, vals, name in ((axes[0], l_rewards, "lane-change"),
                           (axes[1], f_rewards, "following")):
        mean, std = _rolling(vals, window)
        ax.plot(episodes, vals, color="lightgray", lw=0.8, label="raw")
        ax.plot(episodes, mean, color="tab:blue", lw=1.5, label="rolling mean")
        ax.fill_between(episodes, mean - std, mean + std, color="tab:blue",
                        alpha=0.2)
        ax.set_ylabel(f"{name} reward")
        ax.legend(loc="best", fontsize=8)
    axes[1].set_xlabel("episode")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def render_trajectories(rows, path) -> None:
    """One time-position panel per lane; CAVs colored, HVs gray."""
    by_vehicle = {}
    for row in rows:
        vid = int(row["vehicle_id"])
        by_vehicle.setdefault(vid, []).append(
            (float(row["time_s"]), float(row["pos_m"]), int(row["lane"]),
             row["kind"]))
    fig, axes = plt.subplots(1, 3, figsize=(12, 4), sharey=True)
    cav_ids = sorted({vid for vid, pts in by_vehicle.items()
                      if pts[0][3] == "CAV"})
    for vid, pts in sorted(by_vehicle.items()):
        kind = pts[0][3]
        if kind == "CAV":
            color = CAV_COLORS[cav_ids.index(vid) % len(CAV_COLORS)]
            lw, alpha, z = 1.6, 1.0, 3
        else:
            color, lw, alpha, z = "gray", 0.8, 0.6, 1
        # split the trace at lane changes so each segment lands in its panel
        segment = []
        for t, pos, lane, _ in pts:
            if segment and segment[-1][2] != lane:
                lane_prev = segment[-1][2]
                axes[lane_prev].plot([p[0] for p in segment],
                                     [p[1] for p in segment],
                                     color=color, lw=lw, alpha=alpha, zorder=z)
                segment = []
            segment.append((t, pos, lane))
        if segment:
            axes[segment[-1][2]].plot([p[0] for p in segment],
                                      [p[1] for p in segment],
                                      color=color, lw=lw, alpha=alpha, zorder=z)
    for lane, ax in enumerate(axes):
        ax.set_title(f"lane {lane}")
        ax.set_xlabel("time (s)")
    axes[0].set_ylabel("position (m)")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
