"""Asynchronous two-timescale highway environment.

Two coupled decision dimensions share one world: the following dimension (F)
acts every fine tick (0.1 s) with continuous accelerations, the lane-change
dimension (L) every delta ticks (0.5 s) with discrete lane commands.  Each
dimension observes its own weighted graph slice plus per-CAV state vectors
built from the safety-coefficient neighbor scan, and receives its own reward
breakdown.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import graphs, risk, sim

DIM_L = "L"
DIM_F = "F"

# per-CAV state vector layout: s_self (3) + s_env (6 or 2) + s_add (1 or 2)
STATE_DIM_L = 10
STATE_DIM_F = 7


@dataclass
class RewardConfig:
    c1: float = 3.0  # lane-change safety base
    c2: float = 3.0  # following safety base
    c3: float = 0.2  # lane-change comfort slope per maneuver
    lane_change_window_s: float = 10.0
    w_fast: float = 1.0
    w_slow: float = 1.0
    f1_scale: float = 500.0  # m, fast-lane-early bonus decay
    f2_scale: float = 300.0  # m, slow-lane-near-exit bonus decay
    r_in: float = 0.5  # per-tick speed-band reward
    band_slope: float = 0.1  # penalty per m/s outside the band
    a_comf: float = 2.5  # m/s^2 comfort threshold
    c5: float = 0.5  # comfort penalty slope
    c6: float = 1.0  # energy penalty slope
    e_norm: float = 105.0  # full-throttle second at the speed limit -> E = 1


@dataclass
class RewardBreakdown:
    dim: str
    safe: float
    task: float
    comfort: float
    energy: float = 0.0

    @property
    def total(self) -> float:
        return self.safe + self.task + self.comfort + self.energy


@dataclass
class GraphObservation:
    dim: str
    graph: graphs.MultilevelGraph
    state_vectors: dict[int, np.ndarray]  # per active CAV
    tick: int

    @property
    def adjacency(self) -> graphs.WeightedAdjacency:
        return self.graph.adj_L if self.dim == DIM_L else self.graph.adj_F

    @property
    def features(self) -> graphs.NodeFeatureMatrix:
        return self.graph.features_L if self.dim == DIM_L else self.graph.features_F


def energy_increment(v: float, accel: float, dt: float,
                     e_norm: float = 105.0) -> float:
    """Positive-traction-work proxy, zero under braking or coasting."""
    return max(0.0, accel) * v * dt / e_norm


class HighwayEnv:
    """Two-timescale decision environment around one Simulator instance.

    Lane-change and following decisions share one world: lane commands are
    accepted every fifth tick, accelerations every tick, and each dimension
    sees its own graph observation and reward channel.
    """

    def __init__(self, road: sim.RoadConfig, scenario: sim.ScenarioConfig,
                 thresholds: graphs.GraphThresholds | None = None,
                 braking: risk.BrakingParams | None = None,
                 rewards: RewardConfig | None = None,
                 graph_mode: str = "multilevel"):
        if graph_mode not in ("multilevel", "basic"):
            raise ValueError(f"graph_mode must be 'multilevel' or 'basic'")
        self.road = road
        self.scenario = scenario
        self.thresholds = thresholds or graphs.GraphThresholds()
        self.braking = braking or risk.BrakingParams()
        self.rewards = rewards or RewardConfig()
        self.graph_mode = graph_mode
        self.sim = sim.Simulator(road, scenario)
        self.delta = road.delta
        self.last_l_actions: dict[int, int] = {}
        # (time, attempted) log per CAV for the comfort window
        self._maneuvers: dict[int, list] = {}
        self._interval_l_rewards: dict[int, RewardBreakdown] = {}

    # -- clock ---------------------------------------------------------------

    @property
    def f_tick(self) -> int:
        return self.sim.tick

    @property
    def l_tick(self) -> int:
        return self.sim.tick // self.delta

    def is_l_tick(self) -> bool:
        return self.sim.tick % self.delta == 0

    def done(self) -> bool:
        return self.sim.episode_status() == sim.DONE

    # -- observation ---------------------------------------------------------

    def _graph(self) -> graphs.MultilevelGraph:
        g = graphs.build_multilevel_graph(
            self.sim.active_vehicles(), self.thresholds, self.last_l_actions,
            tick=self.sim.tick, road_length=self.road.length_m)
        if self.graph_mode == "basic":
            base = graphs.build_base_adjacency(self.sim.active_vehicles(),
                                               self.thresholds)
            g.adj_L = graphs.WeightedAdjacency(base.weights.copy(), DIM_L, base.ids)
            g.adj_F = graphs.WeightedAdjacency(base.weights.copy(), DIM_F, base.ids)
        return g

    def observe(self, dim: str) -> GraphObservation:
        if dim not in (DIM_L, DIM_F):
            raise ValueError(f"unknown dimension {dim!r}")
        g = self._graph()
        world = self.sim.active_vehicles()
        states = {}
        for cav in self.sim.active_cavs():
            s_self = [cav.speed / sim.SPEED_LIMIT,
                      cav.pos / self.road.length_m,
                      cav.lane / 2.0]
            slots = risk.neighbor_scan(world, cav.id, dim, self.braking)
            names = risk.SLOTS_L if dim == DIM_L else risk.SLOTS_F
            s_env = [slots[n].kappa for n in names]
            if dim == DIM_L:
                s_add = [1.0]
            else:
                s_add = [1.0, float(self.last_l_actions.get(cav.id, 0))]
            states[cav.id] = np.array(s_self + s_env + s_add, dtype=float)
        return GraphObservation(dim=dim, graph=g, state_vectors=states,
                                tick=self.sim.tick)

    # -- rewards -------------------------------------------------------------

    def _window_maneuvers(self, cav_id: int) -> int:
        log = self._maneuvers.get(cav_id, [])
        cutoff = self.sim.clock - self.rewards.lane_change_window_s
        return sum(1 for t, attempted in log if t >= cutoff and attempted)

    def _scan_kappa_max(self, cav: sim.VehicleState, dim: str,
                        names: tuple) -> float:
        # resolved CAVs can no longer be scanned: collisions count as maximal
        # risk, clean exits as maximal safety
        if not cav.active:
            outcome = self.sim.outcomes.get(cav.id)
            return 1.0 if outcome == sim.FAIL_COLLISION else -1.0
        slots = risk.neighbor_scan(self.sim.active_vehicles(), cav.id, dim,
                                   self.braking)
        return max(slots[n].kappa for n in names)

    def reward_lane_change(self, cav: sim.VehicleState) -> RewardBreakdown:
        rc = self.rewards
        kappa_max = self._scan_kappa_max(
            cav, DIM_L, ("left_front", "right_front", "left_rear", "right_rear"))
        safe = -rc.c1 ** (kappa_max + 1.0)
        task = 0.0
        if cav.lane == 2:
            dy_speed = max(0.0, cav.pos - self.road.entry_pos)
            task += rc.w_fast * max(0.0, 1.0 - dy_speed / rc.f1_scale)
        if cav.lane == 0:
            dy_task = max(0.0, self.road.exit_pos - cav.pos)
            task += rc.w_slow * max(0.0, 1.0 - dy_task / rc.f2_scale)
        comfort = -rc.c3 * self._window_maneuvers(cav.id)
        return RewardBreakdown(dim=DIM_L, safe=safe, task=task, comfort=comfort)

    def reward_following(self, cav: sim.VehicleState, accel: float) -> RewardBreakdown:
        rc = self.rewards
        kappa_max = self._scan_kappa_max(cav, DIM_F, risk.SLOTS_F)
        safe = -rc.c2 ** (kappa_max + 1.0)
        lo, hi = self.road.lane_speed_bands[cav.lane]
        if lo <= cav.speed <= hi:
            task = rc.r_in
        else:
            dev = (lo - cav.speed) if cav.speed < lo else (cav.speed - hi)
            task = -rc.band_slope * dev
        comfort = -rc.c5 * max(0.0, abs(accel) - rc.a_comf)
        energy = -rc.c6 * energy_increment(cav.speed, accel, self.road.dt_f,
                                           rc.e_norm)
        return RewardBreakdown(dim=DIM_F, safe=safe, task=task,
                               comfort=comfort, energy=energy)

    # -- stepping ------------------------------------------------------------

    def step(self, actions_f: dict[int, float],
             actions_l: dict[int, int] | None = None):
        """Advance one fine tick.

        actions_l must be supplied exactly on L-ticks (tick % delta == 0);
        lane changes apply before the longitudinal step.  Returns
        (rewards_f, rewards_l, done, info): rewards_f every tick, rewards_l
        non-None only when a delta interval just closed.
        """
        if self.is_l_tick():
            if actions_l is None:
                raise ValueError("actions_l required on an L-tick")
        elif actions_l is not None:
            raise ValueError("actions_l supplied off-schedule")

        if actions_l is not None:
            for cav in self.sim.active_cavs():
                cmd = int(actions_l.get(cav.id, 0))
                accepted = sim.apply_lane_change(cav, cmd)
                self.last_l_actions[cav.id] = cmd
                self._maneuvers.setdefault(cav.id, []).append(
                    (self.sim.clock, cmd != 0))

        acting = {c.id: c for c in self.sim.active_cavs()}
        applied = {cid: float(np.clip(actions_f.get(cid, 0.0),
                                      sim.A_DEC, sim.A_ACC))
                   for cid in acting}
        collisions = self.sim.step(applied)

        rewards_f = {}
        for cid, cav in acting.items():
            rewards_f[cid] = self.reward_following(cav, applied[cid])

        rewards_l = None
        if self.sim.tick % self.delta == 0:
            rewards_l = {cid: self.reward_lane_change(cav)
                         for cid, cav in acting.items()}

        done = self.done()
        info = {"collisions": collisions,
                "outcomes": dict(self.sim.outcomes),
                "resolved": {cid: self.sim.outcomes[cid] != sim.IN_PROGRESS
                             for cid in acting}}
        return rewards_f, rewards_l, done, info

    def global_reward(self, per_cav: dict[int, RewardBreakdown]) -> float:
        """Dimension-level reward: exact sum of the per-CAV totals."""
        return sum(r.total for r in per_cav.values())
