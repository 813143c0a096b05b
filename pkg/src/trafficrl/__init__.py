"""Hierarchical graph reinforcement learning on a highway micro-simulator."""

from .env import HighwayEnv, RewardConfig
from .graphs import GraphThresholds, build_multilevel_graph
from .risk import BrakingParams, braking_safety_distance, safety_coefficient
from .rl import HierarchicalTrainer, TrainConfig
from .sim import RoadConfig, ScenarioConfig, Simulator

__all__ = [
    "BrakingParams", "GraphThresholds", "HierarchicalTrainer", "HighwayEnv",
    "RewardConfig", "RoadConfig", "ScenarioConfig", "Simulator",
    "TrainConfig", "braking_safety_distance", "build_multilevel_graph",
    "safety_coefficient",
]

__version__ = "0.1.0"
