"""Deterministic fixed-step three-lane highway micro-simulator.

Vehicles live on a 1 km main road with an on-ramp injection point and an
off-ramp exit on lane 0.  Human-driven vehicles (HVs) follow the Intelligent
Driver Model and never change lanes; connected autonomous vehicles (CAVs)
receive external acceleration and discrete lane-change commands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

CAV = "CAV"
HV = "HV"

SEG_RAMP_IN = "ramp-in"
SEG_MAIN = "main"
SEG_RAMP_OUT = "ramp-out"

VEHICLE_LENGTH = 5.0
SPEED_LIMIT = 35.0
LANE_WIDTH = 3.5

# CAV longitudinal command bounds, also used to clamp IDM output.
A_DEC = -4.5
A_ACC = 3.0


@dataclass
class VehicleState:
    """Kinematic and identity record of one vehicle."""

    id: int
    kind: str  # CAV or HV
    lane: int
    pos: float  # longitudinal position, m
    speed: float  # m/s
    accel: float = 0.0
    length: float = VEHICLE_LENGTH
    segment: str = SEG_MAIN
    active: bool = True

    @property
    def lat(self) -> float:
        """Lateral position: center of the occupied lane."""
        return (self.lane + 0.5) * LANE_WIDTH


@dataclass
class IdmParams:
    v0: float = 18.0  # desired speed, m/s
    T: float = 1.5  # time headway, s
    a: float = 1.5  # max accel, m/s^2
    b: float = 2.0  # comfortable decel, m/s^2
    s0: float = 2.0  # jam distance, m
    delta: float = 4.0


@dataclass
class RoadConfig:
    length_m: float = 1000.0
    lanes: int = 3
    entry_pos: float = 100.0
    exit_pos: float = 900.0
    dt_f: float = 0.1
    dt_l: float = 0.5
    # Per-lane (min, max) speed bands used by the following-dimension task
    # reward: lane 0 slow, lane 2 fast.
    lane_speed_bands: tuple = ((8.0, 15.0), (14.0, 24.0), (20.0, 35.0))

    def __post_init__(self):
        ratio = self.dt_l / self.dt_f
        if abs(ratio - round(ratio)) > 1e-9 or ratio <= 0:
            raise ValueError("dt_l must be a positive integer multiple of dt_f")
        if not (0.0 < self.entry_pos < self.exit_pos < self.length_m):
            raise ValueError("need 0 < entry_pos < exit_pos < length_m")
        if self.lanes != 3:
            raise ValueError("the road model is three-lane only")

    @property
    def delta(self) -> int:
        """Ratio of lane-change to following decision periods."""
        return int(round(self.dt_l / self.dt_f))


@dataclass
class ScenarioConfig:
    n_vehicles: int = 50
    m_cavs: int = 5
    hv_density_per_lane: tuple = (360.0, 720.0, 720.0)  # vehicles/h
    hv_init_speed_per_lane: tuple = (12.0, 18.0, 22.0)  # m/s
    cav_init_speed: float = 15.0
    episode_limit_s: float = 150.0
    cav_spawn_window_s: float = 50.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.m_cavs > self.n_vehicles:
            raise ValueError("m_cavs must not exceed n_vehicles")
        if any(d <= 0 for d in self.hv_density_per_lane):
            raise ValueError("HV densities must be positive")


# outcome labels for each CAV
IN_PROGRESS = "in-progress"
SUCCESS = "success"
FAIL_MISSED_EXIT = "fail-missed-exit"
FAIL_COLLISION = "fail-collision"
FAIL_TIMEOUT = "fail-timeout"

RUNNING = "running"
DONE = "done"


def idm_acceleration(ego: VehicleState, leader: VehicleState | None,
                     params: IdmParams) -> tuple[float, bool]:
    """IDM acceleration clamped to [A_DEC, A_ACC].

    Returns (accel, collision_flag); the flag is set when the bumper gap to
    the leader is negative (overlap).
    """
    v = max(ego.speed, 0.0)
    free = params.a * (1.0 - (v / params.v0) ** params.delta)
    if leader is None:
        return min(max(free, A_DEC), A_ACC), False
    gap = leader.pos - ego.pos - ego.length
    if gap < 0.0:
        return A_DEC, True
    dv = v - leader.speed
    s_star = params.s0 + v * params.T + v * dv / (2.0 * math.sqrt(params.a * params.b))
    s_star = max(s_star, 0.0)
    gap = max(gap, 1e-6)
    acc = params.a * (1.0 - (v / params.v0) ** params.delta - (s_star / gap) ** 2)
    return min(max(acc, A_DEC), A_ACC), False


def advance_step(world: list[VehicleState], accels: dict[int, float], dt: float,
                 road: RoadConfig) -> list[tuple[int, int]]:
    """Advance every active vehicle one step of dt seconds, in place.

    Positions follow constant-acceleration kinematics; speed is clamped to
    [0, SPEED_LIMIT] and never reverses.  Returns the list of same-lane
    overlapping pairs (collisions) after the move.  Vehicles running off the
    end of the road are deactivated.
    """
    for veh in world:
        if not veh.active:
            continue
        a = accels[veh.id]
        # do not integrate through the v=0 floor
        v_new = veh.speed + a * dt
        if v_new < 0.0:
            t_stop = veh.speed / (-a) if a < 0 else 0.0
            veh.pos += veh.speed * t_stop + 0.5 * a * t_stop * t_stop
            v_new = 0.0
        else:
            veh.pos += veh.speed * dt + 0.5 * a * dt * dt
            v_new = min(v_new, SPEED_LIMIT)
        veh.speed = v_new
        veh.accel = a
        if veh.pos > road.length_m:
            veh.active = False

    collisions = []
    active = [v for v in world if v.active]
    for lane in range(road.lanes):
        lane_vs = sorted((v for v in active if v.lane == lane), key=lambda v: v.pos)
        for lead, follow in zip(lane_vs[1:], lane_vs[:-1]):
            gap = lead.pos - follow.pos - follow.length
            if gap < 0.0:
                collisions.append((follow.id, lead.id))
    return collisions


def apply_lane_change(ego: VehicleState, cmd: int) -> bool:
    """Apply a discrete lane hop; returns False if the command is rejected.

    Rejected commands (off the road edge, or issued by a non-CAV) leave the
    state untouched.
    """
    if cmd not in (-1, 0, 1):
        raise ValueError(f"lane command must be -1, 0 or 1, got {cmd}")
    if cmd == 0:
        return True
    if ego.kind != CAV or ego.segment != SEG_MAIN:
        return False
    new_lane = ego.lane + cmd
    if not (0 <= new_lane <= 2):
        return False
    ego.lane = new_lane
    return True


class Simulator:
    """Owns the world state, spawning, clock and per-CAV outcomes.

    Deterministic: identical (RoadConfig, ScenarioConfig) including the seed
    produce bit-identical state sequences.
    """

    def __init__(self, road: RoadConfig, scenario: ScenarioConfig):
        self.road = road
        self.scenario = scenario
        self.rng = np.random.default_rng(scenario.rng_seed)
        self.world: list[VehicleState] = []
        self.clock = 0.0
        self.tick = 0
        self._next_id = 0
        self._spawned = 0
        self.outcomes: dict[int, str] = {}
        self.spawn_times: dict[int, float] = {}
        self.resolve_times: dict[int, float] = {}
        self.idm = IdmParams()
        # one pre-drawn exponential arrival clock per lane
        self._next_hv_arrival = [
            self.rng.exponential(3600.0 / d) for d in scenario.hv_density_per_lane
        ]
        # CAV appearance times, uniform in the spawn window
        self._cav_times = sorted(
            self.rng.uniform(0.0, scenario.cav_spawn_window_s, scenario.m_cavs).tolist()
        )
        self._cavs_spawned = 0
        self.cav_ids: list[int] = []

    # -- vehicle bookkeeping -------------------------------------------------

    def _new_vehicle(self, kind: str, lane: int, pos: float, speed: float) -> VehicleState:
        veh = VehicleState(id=self._next_id, kind=kind, lane=lane, pos=pos, speed=speed)
        self._next_id += 1
        self._spawned += 1
        self.world.append(veh)
        self.spawn_times[veh.id] = self.clock
        if kind == CAV:
            self.outcomes[veh.id] = IN_PROGRESS
            self.cav_ids.append(veh.id)
        return veh

    def _cell_occupied(self, lane: int, pos: float, cell: float = 10.0) -> bool:
        return any(v.active and v.lane == lane and abs(v.pos - pos) < cell
                   for v in self.world)

    def active_vehicles(self) -> list[VehicleState]:
        return [v for v in self.world if v.active]

    def active_cavs(self) -> list[VehicleState]:
        return [v for v in self.world if v.active and v.kind == CAV]

    def get(self, vid: int) -> VehicleState:
        for v in self.world:
            if v.id == vid:
                return v
        raise KeyError(vid)

    # -- spawning ------------------------------------------------------------

    def spawn_tick(self) -> list[VehicleState]:
        """Inject newly arriving vehicles for the current clock value.

        HVs arrive per lane as Poisson processes; CAVs appear at the pre-drawn
        times on the ramp injection point.  Arrivals into an occupied entry
        cell are deferred to a later tick.  Total spawns are capped at
        n_vehicles.
        """
        spawned = []
        sc = self.scenario
        # HVs may not consume the slots reserved for still-unspawned CAVs
        hv_budget = sc.n_vehicles - (sc.m_cavs - self._cavs_spawned)
        for lane in range(self.road.lanes):
            while (self._next_hv_arrival[lane] <= self.clock
                   and self._spawned < hv_budget):
                if self._cell_occupied(lane, 0.0):
                    break  # deferred: retry next tick without redrawing
                speed = sc.hv_init_speed_per_lane[lane]
                spawned.append(self._new_vehicle(HV, lane, 0.0, speed))
                self._next_hv_arrival[lane] += self.rng.exponential(
                    3600.0 / sc.hv_density_per_lane[lane])
        while (self._cavs_spawned < sc.m_cavs
               and self._cav_times[self._cavs_spawned] <= self.clock):
            if self._cell_occupied(0, self.road.entry_pos):
                break
            veh = self._new_vehicle(CAV, 0, self.road.entry_pos, sc.cav_init_speed)
            spawned.append(veh)
            self._cavs_spawned += 1
        return spawned

    # -- stepping ------------------------------------------------------------

    def leader_of(self, ego: VehicleState) -> VehicleState | None:
        best = None
        for v in self.world:
            if not v.active or v.id == ego.id or v.lane != ego.lane:
                continue
            if v.pos > ego.pos and (best is None or v.pos < best.pos):
                best = v
        return best

    def hv_accels(self) -> dict[int, float]:
        """IDM accelerations for all active HVs, desired speed per lane."""
        out = {}
        for v in self.world:
            if not v.active or v.kind != HV:
                continue
            params = replace(self.idm, v0=self.scenario.hv_init_speed_per_lane[v.lane])
            acc, _ = idm_acceleration(v, self.leader_of(v), params)
            out[v.id] = acc
        return out

    def step(self, cav_accels: dict[int, float]) -> list[tuple[int, int]]:
        """One dt_f step: spawn, integrate, resolve collisions and exits."""
        self.spawn_tick()
        accels = self.hv_accels()
        for cav in self.active_cavs():
            a = cav_accels.get(cav.id, 0.0)
            accels[cav.id] = min(max(a, A_DEC), A_ACC)
        collisions = advance_step(self.world, accels, self.road.dt_f, self.road)

        # a collision ends only the involved CAVs' tasks; both vehicles leave
        for i, j in collisions:
            for vid in (i, j):
                v = self.get(vid)
                if v.active:
                    v.active = False
                    if v.kind == CAV and self.outcomes[vid] == IN_PROGRESS:
                        self.outcomes[vid] = FAIL_COLLISION
                        self.resolve_times[vid] = self.clock + self.road.dt_f

        # exits and missed exits
        for v in self.active_vehicles():
            if v.kind != CAV:
                continue
            if v.pos >= self.road.exit_pos:
                if v.lane == 0:
                    v.active = False
                    v.segment = SEG_RAMP_OUT
                    self.outcomes[v.id] = SUCCESS
                else:
                    v.active = False
                    self.outcomes[v.id] = FAIL_MISSED_EXIT
                self.resolve_times[v.id] = self.clock + self.road.dt_f
        # vehicles deactivated by running off the road end
        for v in self.world:
            if (v.kind == CAV and not v.active
                    and self.outcomes[v.id] == IN_PROGRESS):
                self.outcomes[v.id] = FAIL_MISSED_EXIT
                self.resolve_times[v.id] = self.clock + self.road.dt_f

        self.clock += self.road.dt_f
        self.tick += 1

        if self.episode_status() == DONE:
            for vid, out in self.outcomes.items():
                if out == IN_PROGRESS:
                    self.outcomes[vid] = FAIL_TIMEOUT
                    self.resolve_times[vid] = self.clock
        return collisions

    def episode_status(self) -> str:
        if self.clock >= self.scenario.episode_limit_s - 1e-9:
            return DONE
        if (self._cavs_spawned == self.scenario.m_cavs
                and all(out != IN_PROGRESS for out in self.outcomes.values())
                and self.outcomes):
            return DONE
        return RUNNING
