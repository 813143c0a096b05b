"""Run configuration: YAML loading, defaults, env-var overrides.

An empty file yields the full-scale defaults (50 vehicles, 5 CAVs, 1 km
road).  Unknown keys are rejected with their location.  Any scalar key can
also be overridden through environment variables prefixed TRAFFICRL_, e.g.
TRAFFICRL_THRESHOLDS__X=40 or TRAFFICRL_TRAIN__EPISODES=20.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

import yaml

from .env import RewardConfig
from .graphs import GraphThresholds
from .nets import NetSpec
from .risk import BrakingParams
from .rl import ExploreSchedule, TrainConfig
from .sim import RoadConfig, ScenarioConfig

ENV_PREFIX = "TRAFFICRL_"

GRAPH_MODES = ("basic", "multilevel")


@dataclass
class RunConfig:
    road: RoadConfig = field(default_factory=RoadConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    thresholds: GraphThresholds = field(default_factory=GraphThresholds)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    braking: BrakingParams = field(default_factory=BrakingParams)
    net: NetSpec = field(default_factory=NetSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    graph_mode: str = "multilevel"
    out_dir: str = "out"
    seeds: list = field(default_factory=lambda: [0])

    def __post_init__(self):
        if self.graph_mode not in GRAPH_MODES:
            raise ValueError(f"graph_mode must be one of {GRAPH_MODES}")


_SECTIONS = {
    "road": RoadConfig,
    "scenario": ScenarioConfig,
    "thresholds": GraphThresholds,
    "rewards": RewardConfig,
    "braking": BrakingParams,
    "net": NetSpec,
    "train": TrainConfig,
}

_TOP_SCALARS = ("graph_mode", "out_dir", "seeds")


class ConfigError(ValueError):
    pass


def _coerce(cls, key, raw):
    names = {f.name for f in fields(cls)}
    if key not in names:
        raise ConfigError(f"unknown key {key!r} in section {cls.__name__}")
    current = getattr(cls(), key) if cls is not TrainConfig else getattr(
        TrainConfig(), key)
    if isinstance(current, bool):
        return raw in (True, "true", "True", "1", 1)
    if isinstance(current, int) and not isinstance(current, bool):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, (tuple, list)):
        if isinstance(raw, str):
            raw = [part.strip() for part in raw.split(",")]
        return tuple(type(current[0])(v) for v in raw) if current else tuple(raw)
    if isinstance(current, ExploreSchedule):
        if not isinstance(raw, dict):
            raise ConfigError(f"{key} must be a mapping eps0/epsT/T")
        return ExploreSchedule(**raw)
    return raw


def _build_section(cls, mapping: dict):
    # environment variable names arrive lowercased; match field names
    # such as GraphThresholds.X case-insensitively
    folded = {f.name.lower(): f.name for f in fields(cls)}
    kwargs = {}
    for key, raw in mapping.items():
        key = folded.get(key.lower(), key)
        kwargs[key] = _coerce(cls, key, raw)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from exc


def load_config(path: str | None = None,
                overrides: dict | None = None) -> RunConfig:
    """Load a YAML config; None or an empty file gives pure defaults."""
    data = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh)
        if loaded is not None:
            if not isinstance(loaded, dict):
                raise ConfigError(f"{path}: top level must be a mapping")
            data = loaded

    # environment variable overrides: TRAFFICRL_SECTION__KEY=value
    env_over = {}
    for name, value in os.environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        spec = name[len(ENV_PREFIX):].lower()
        if "__" in spec:
            section, key = spec.split("__", 1)
            env_over.setdefault(section, {})[key] = value
        else:
            env_over[spec] = value
    data = _merge(data, env_over)
    if overrides:
        data = _merge(data, overrides)

    kwargs = {}
    for section, mapping in data.items():
        if section in _SECTIONS:
            if not isinstance(mapping, dict):
                raise ConfigError(f"section {section!r} must be a mapping")
            kwargs[section] = _build_section(_SECTIONS[section], mapping)
        elif section in _TOP_SCALARS:
            if section == "seeds" and isinstance(mapping, str):
                mapping = [int(s) for s in mapping.split(",")]
            kwargs[section] = mapping
        else:
            raise ConfigError(f"unknown config section {section!r}")
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _merge(base: dict, extra: dict) -> dict:
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in base.items()}
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k].update(v)
        else:
            out[k] = v
    return out


def reduced_scenario(seed: int = 0, episodes: int = 200) -> RunConfig:
    """Desk-scale trend experiment: 12 vehicles, 2 CAVs, 400 m road.

    Exploration horizons and update cadences are rescaled to the shorter
    training budget; the algorithm configuration stays the default
    multilevel + attention stack.
    """
    road = RoadConfig(length_m=400.0, entry_pos=50.0, exit_pos=350.0)
    scenario = ScenarioConfig(
        n_vehicles=12, m_cavs=2,
        hv_density_per_lane=(300.0, 420.0, 420.0),
        episode_limit_s=60.0, cav_spawn_window_s=15.0, rng_seed=seed)
    # on the short road the exit-lane incentive must span the whole drive
    # and the fast-lane bonus only its first stretch, or 200 episodes are
    # not enough to discover the return maneuver; the task rewards are
    # raised so that safe in-band driving is net-positive per tick --
    # otherwise the ever-negative safety term makes early termination
    # cheaper than surviving and the agents learn to crash
    # the fast-lane bonus is disabled outright: on 400 m the detour it
    # rewards cannot be completed reliably within the training budget
    rewards = RewardConfig(w_fast=0.0, f1_scale=100.0, f2_scale=300.0,
                           r_in=1.5, w_slow=2.0)
    # half-width networks: the 12-vehicle graphs need far less capacity
    # than the full-scale scenario, and train much faster on one core
    net = NetSpec(encoder_width=32, graph_width=32, heads=2,
                  trunk_width=32, critic_trunk_width=64)
    train = TrainConfig(
        seed=seed, episodes=episodes,
        lr_l=0.0015, lr_critic=0.002, lr_actor=0.0005,
        online_interval_l=15, online_interval_f=15,
        target_interval_l=60, target_interval_f=60,
        tau_l=0.02, tau_f=0.01,
        buffer_l=20000, buffer_f=50000, warmup_batches=4,
        explore_l=ExploreSchedule(0.6, 0.02, 12000),
        explore_f=ExploreSchedule(0.5, 0.1, 40000))
    return RunConfig(road=road, scenario=scenario, rewards=rewards,
                     net=net, train=train, seeds=[seed])
