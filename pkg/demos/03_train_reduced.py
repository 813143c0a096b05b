"""A short hierarchical training run on the desk-scale scenario.

Two agents learn simultaneously on different clocks: a dueling double
Q-network picks lane commands every 0.5 s, while an actor-critic pair
picks accelerations every 0.1 s.  Both consume graph observations of the
surrounding traffic.  This demo trains for a reduced number of episodes,
evaluates the greedy policy, and renders the SVG plots via the same code
paths as the `trafficrl` command line.
"""

import os
import time

from trafficrl import config as config_mod
from trafficrl import metrics, plots, rl
from trafficrl.cli import make_env_factory

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

EPISODES = 40  # bump to 200 for the full desk-scale trend experiment

cfg = config_mod.reduced_scenario(seed=0, episodes=EPISODES)
trainer = rl.HierarchicalTrainer(make_env_factory(cfg), cfg.train, cfg.net)

print(f"training {EPISODES} episodes "
      f"({cfg.scenario.n_vehicles} vehicles, {cfg.scenario.m_cavs} CAVs, "
      f"{cfg.road.length_m:.0f} m road)...")
t0 = time.time()


def progress(log):
    if (log.episode + 1) % 10 == 0:
        print(f"  episode {log.episode + 1:3d}  "
              f"L-reward {log.l_reward:+7.3f}  F-reward {log.f_reward:+6.3f}  "
              f"eps {log.eps:.3f}  successes {log.successes}/{log.cavs}")


logs = trainer.train(EPISODES, callback=progress)
print(f"trained in {time.time() - t0:.0f} s")

log_path = os.path.join(OUT, "training_log.csv")
metrics.export_training_log(logs, log_path)
plots.render_reward_curves(logs, os.path.join(OUT, "rewards.svg"))

print("\ngreedy evaluation over 20 episodes...")
traj: list = []
evals = trainer.evaluate(20, trajectory=traj)
succ = sum(e.successes for e in evals)
cavs = sum(e.cavs for e in evals)
print(f"  success rate {succ}/{cavs} = {succ / max(cavs, 1):.2f}")

traj_path = os.path.join(OUT, "eval_trajectories.csv")
metrics.export_trajectories(traj, traj_path)
plots.render_trajectories(metrics.read_csv(traj_path),
                          os.path.join(OUT, "trajectories.svg"))
print(f"\nartifacts in {OUT}: training_log.csv, rewards.svg, "
      f"eval_trajectories.csv, trajectories.svg")
