"""YAML config loading, defaults, overrides, and rejection tests."""

import pytest

from trafficrl import config as config_mod
from trafficrl.config import ConfigError, load_config


def test_defaults_without_file():
    cfg = load_config(None)
    assert cfg.scenario.n_vehicles == 50 and cfg.scenario.m_cavs == 5
    assert cfg.road.length_m == 1000.0 and cfg.road.lanes == 3
    assert cfg.graph_mode == "multilevel" and cfg.net.kind == "gat"


def test_empty_file_equals_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert load_config(path) == load_config(None)


def test_section_override(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("thresholds:\n  X: 40\nscenario:\n  n_vehicles: 12\n"
                    "graph_mode: basic\n")
    cfg = load_config(path)
    assert cfg.thresholds.X == 40.0
    assert cfg.scenario.n_vehicles == 12
    assert cfg.graph_mode == "basic"


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("thresholds:\n  Z: 40\n")
    with pytest.raises(ConfigError, match="Z"):
        load_config(path)


def test_unknown_section_rejected(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("mystery:\n  a: 1\n")
    with pytest.raises(ConfigError, match="mystery"):
        load_config(path)


def test_invalid_values_reported_with_section(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("road:\n  lanes: 4\n")
    with pytest.raises(ConfigError, match="three-lane"):
        load_config(path)


def test_non_mapping_top_level_rejected(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(path)


def test_env_var_override(tmp_path, monkeypatch):
    monkeypatch.setenv("TRAFFICRL_TRAIN__EPISODES", "20")
    monkeypatch.setenv("TRAFFICRL_THRESHOLDS__X", "40")
    monkeypatch.setenv("TRAFFICRL_GRAPH_MODE", "basic")
    cfg = load_config(None)
    assert cfg.train.episodes == 20
    assert cfg.thresholds.X == 40.0
    assert cfg.graph_mode == "basic"


def test_env_var_beats_file(tmp_path, monkeypatch):
    path = tmp_path / "c.yaml"
    path.write_text("train:\n  episodes: 5\n")
    monkeypatch.setenv("TRAFFICRL_TRAIN__EPISODES", "9")
    assert load_config(path).train.episodes == 9


def test_explore_schedule_mapping(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("train:\n  explore_l:\n    eps0: 0.9\n    epsT: 0.1\n"
                    "    T: 100\n")
    sched = load_config(path).train.explore_l
    assert (sched.eps0, sched.epsT, sched.T) == (0.9, 0.1, 100)


def test_tuple_and_seed_list_coercion(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("scenario:\n  hv_density_per_lane: 100, 200, 300\n"
                    "seeds: '3,4'\n")
    cfg = load_config(path)
    assert cfg.scenario.hv_density_per_lane == (100.0, 200.0, 300.0)
    assert cfg.seeds == [3, 4]


def test_reduced_scenario_shape():
    cfg = config_mod.reduced_scenario(seed=5)
    assert cfg.road.length_m == 400.0
    assert cfg.scenario.n_vehicles == 12 and cfg.scenario.m_cavs == 2
    assert cfg.train.seed == 5 and cfg.seeds == [5]
    # algorithm toggles stay at the full-scale defaults
    assert cfg.graph_mode == "multilevel"
    assert cfg.net.kind == "gat" and cfg.net.head_agg == "sum"


def test_bad_graph_mode_rejected():
    with pytest.raises(ValueError, match="graph_mode"):
        config_mod.RunConfig(graph_mode="fancy")
