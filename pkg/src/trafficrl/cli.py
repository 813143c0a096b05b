"""Command-line entry points: train, eval, inspect-graph, plot."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace


import yaml

from . import config as config_mod
from . import env as env_mod
from . import metrics, plots, rl


def make_env_factory(cfg: config_mod.RunConfig):
    def factory(seed: int) -> env_mod.HighwayEnv:
        scenario = replace(cfg.scenario, rng_seed=seed)
        return env_mod.HighwayEnv(cfg.road, scenario, cfg.thresholds,
                                  cfg.braking, cfg.rewards, cfg.graph_mode)
    return factory


def _apply_toggles(cfg: config_mod.RunConfig, toggles):
    for toggle in toggles or []:
        if "=" not in toggle:
            raise SystemExit(f"--toggle expects key=value, got {toggle!r}")
        key, value = toggle.split("=", 1)
        if key == "graph_mode":
            cfg = replace(cfg, graph_mode=value)
        elif key == "network_kind":
            cfg = replace(cfg, net=replace(cfg.net, kind=value))
        elif key == "head_agg":
            cfg = replace(cfg, net=replace(cfg.net, head_agg=value))
        else:
            raise SystemExit(f"unknown toggle {key!r}")
    return cfg


def _load(args) -> config_mod.RunConfig:
    cfg = config_mod.load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = replace(
            cfg, train=replace(cfg.train, seed=args.seed),
            scenario=replace(cfg.scenario, rng_seed=args.seed),
            seeds=[args.seed])
    if getattr(args, "out", None):
        cfg = replace(cfg, out_dir=args.out)
    cfg = _apply_toggles(cfg, getattr(args, "toggle", None))
    return cfg


def cmd_train(args) -> int:
    cfg = _load(args)
    os.makedirs(cfg.out_dir, exist_ok=True)
    trainer = rl.HierarchicalTrainer(make_env_factory(cfg), cfg.train, cfg.net)
    episodes = args.episodes or cfg.train.episodes
    logs = trainer.train(episodes)
    log_path = os.path.join(cfg.out_dir, f"train_seed{cfg.train.seed}.csv")
    metrics.export_training_log(logs, log_path)
    ckpt_path = os.path.join(cfg.out_dir, f"checkpoint_seed{cfg.train.seed}.npz")
    trainer.save(ckpt_path)
    print(f"trained {episodes} episodes -> {log_path}, {ckpt_path}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load(args)
    os.makedirs(cfg.out_dir, exist_ok=True)
    trainer = rl.HierarchicalTrainer(make_env_factory(cfg), cfg.train, cfg.net)
    if args.checkpoint:
        trainer.load(args.checkpoint)
    episodes = args.episodes or 10
    rows_all = []
    per_episode = []
    for i in range(episodes):
        traj: list = []
        log = trainer.run_episode(10 ** 6 + i, learn=False, greedy=True,
                                  trajectory=traj)
        env = trainer.last_env
        rows_all.extend(traj)
        per_episode.append(metrics.compute_metrics(
            traj, env.sim.outcomes, env.sim.spawn_times,
            env.sim.resolve_times, log.l_reward, log.f_reward,
            cfg.road.dt_f, episode=i, e_norm=cfg.rewards.e_norm))
    metrics_path = os.path.join(cfg.out_dir, "eval_metrics.csv")
    metrics.export_metrics(per_episode, metrics_path)
    traj_path = os.path.join(cfg.out_dir, "eval_trajectories.csv")
    metrics.export_trajectories(rows_all, traj_path)
    summary = metrics.summarize(per_episode)
    summary_path = os.path.join(cfg.out_dir, "eval_summary.yaml")
    with open(summary_path, "w") as fh:
        yaml.safe_dump(summary, fh, sort_keys=True)
    print(yaml.safe_dump(summary, sort_keys=True))
    return 0


def cmd_inspect_graph(args) -> int:
    cfg = _load(args)
    factory = make_env_factory(cfg)
    env = factory(cfg.scenario.rng_seed)
    for _ in range(args.ticks):
        if env.done():
            break
        actions_l = ({c.id: 0 for c in env.sim.active_cavs()}
                     if env.is_l_tick() else None)
        env.step({c.id: 0.0 for c in env.sim.active_cavs()}, actions_l)
    g = env.observe(env_mod.DIM_L).graph
    lines = [f"tick {g.tick}", "nodes:"]
    for vid, row in zip(g.ids, g.features_global.rows):
        lines.append(f"  {vid} " + " ".join(f"{x:.6f}" for x in row))
    lines.append("edges:")
    for tag, adj in (("L", g.adj_L), ("F", g.adj_F)):
        w = adj.weights
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                if i != j and w[i, j] > 0:
                    lines.append(f"  {g.ids[i]} {g.ids[j]} {w[i, j]:.6f} {tag}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_plot(args) -> int:
    cfg = _load(args)
    os.makedirs(cfg.out_dir, exist_ok=True)
    made = []
    if args.log:
        logs = metrics.read_csv(args.log)
        out = os.path.join(cfg.out_dir, "rewards.svg")
        plots.render_reward_curves(logs, out)
        made.append(out)
    if args.trajectories:
        rows = metrics.read_csv(args.trajectories)
        out = os.path.join(cfg.out_dir, "trajectories.svg")
        plots.render_trajectories(rows, out)
        made.append(out)
    if not made:
        raise SystemExit("plot needs --log and/or --trajectories")
    print("wrote " + ", ".join(made))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trafficrl",
        description="Hierarchical graph RL on a three-lane highway simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="YAML config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--toggle", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="graph_mode=, network_kind=, head_agg=")

    p_train = sub.add_parser("train", help="train the hierarchical agents")
    common(p_train)
    p_train.add_argument("--episodes", type=int, default=None)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="greedy noise-free evaluation")
    common(p_eval)
    p_eval.add_argument("--checkpoint", default=None)
    p_eval.add_argument("--episodes", type=int, default=None)
    p_eval.set_defaults(func=cmd_eval)

    p_ig = sub.add_parser("inspect-graph", help="dump a graph snapshot")
    common(p_ig)
    p_ig.add_argument("--ticks", type=int, default=50,
                      help="simulate this many ticks first")
    p_ig.set_defaults(func=cmd_inspect_graph)

    p_plot = sub.add_parser("plot", help="render SVG plots")
    common(p_plot)
    p_plot.add_argument("--log", default=None, help="training log CSV")
    p_plot.add_argument("--trajectories", default=None,
                        help="trajectory CSV")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
