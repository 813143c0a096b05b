"""Episode metrics and CSV export.

Columns follow the evaluation schema: success rate, emergency-braking
count, travel time, normalized energy and per-dimension reward means.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import sim
from .env import energy_increment

EMERGENCY_BRAKE_MPS2 = -4.0

TRAJECTORY_HEADER = ["tick", "time_s", "vehicle_id", "kind", "lane", "pos_m",
                     "speed_mps", "accel_mps2", "last_l_cmd"]

METRICS_HEADER = ["episode", "p_success", "n_braking", "t_travel_s",
                  "energy", "l_reward", "f_reward"]

LOG_HEADER = ["episode", "l_reward", "f_reward", "eps", "sigma", "loss_l",
              "loss_critic", "actor_obj", "successes", "cavs", "collisions",
              "l_decisions", "f_decisions"]


@dataclass
class EpisodeMetrics:
    episode: int
    p_success: float
    n_braking: float  # mean emergency-braking ticks per CAV
    t_travel_s: float  # mean spawn-to-resolution time per CAV
    energy: float  # mean normalized energy per CAV
    l_reward: float
    f_reward: float


def compute_metrics(trajectory: list[dict], outcomes: dict[int, str],
                    spawn_times: dict[int, float],
                    resolve_times: dict[int, float],
                    l_reward: float, f_reward: float, dt: float,
                    episode: int = 0, e_norm: float = 105.0) -> EpisodeMetrics:
    """Aggregate one episode's trajectory rows into the metric columns."""
    cav_ids = sorted(outcomes)
    n = max(len(cav_ids), 1)
    p_success = sum(1 for c in cav_ids if outcomes[c] == sim.SUCCESS) / n

    braking = {c: 0 for c in cav_ids}
    energy = {c: 0.0 for c in cav_ids}
    last_seen = {}
    for row in trajectory:
        vid = row["vehicle_id"]
        if vid not in braking:
            continue
        if row["accel_mps2"] < EMERGENCY_BRAKE_MPS2:
            braking[vid] += 1
        energy[vid] += energy_increment(row["speed_mps"], row["accel_mps2"],
                                        dt, e_norm)
        last_seen[vid] = row["time_s"]

    travel = []
    for c in cav_ids:
        start = spawn_times.get(c, 0.0)
        end = resolve_times.get(c, last_seen.get(c, start))
        travel.append(max(0.0, end - start))

    return EpisodeMetrics(
        episode=episode,
        p_success=p_success,
        n_braking=float(np.mean(list(braking.values()))) if cav_ids else 0.0,
        t_travel_s=float(np.mean(travel)) if travel else 0.0,
        energy=float(np.mean(list(energy.values()))) if cav_ids else 0.0,
        l_reward=l_reward,
        f_reward=f_reward)


def summarize(metrics: list[EpisodeMetrics]) -> dict:
    """(mean, std) per metric column over a batch of evaluation episodes."""
    out = {}
    for col in METRICS_HEADER[1:]:
        vals = [getattr(m, col) for m in metrics]
        out[col] = {"mean": float(np.mean(vals)) if vals else 0.0,
                    "std": float(np.std(vals)) if vals else 0.0}
    return out


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


def export_trajectories(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_HEADER)
        for row in rows:
            writer.writerow([_fmt(row[col]) for col in TRAJECTORY_HEADER])


def export_metrics(metrics: list[EpisodeMetrics], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for m in metrics:
            writer.writerow([_fmt(getattr(m, col)) for col in METRICS_HEADER])


def export_training_log(logs, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_HEADER)
        for log in logs:
            writer.writerow([_fmt(getattr(log, col)) for col in LOG_HEADER])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
