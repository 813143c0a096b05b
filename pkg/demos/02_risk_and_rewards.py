"""Risk quantification and the anatomy of the two reward channels.

Every CAV continuously compares the braking safety distance it would need
against the gap it actually has; the ratio folds into a risk coefficient
in (-1, 1], where -1 marks an empty slot, 0 a gap exactly at the safety
distance, and 1 a vehicle inside it.  Rewards for both decision dimensions
are built from this coefficient plus task, comfort, and energy terms.
"""

from trafficrl import env as env_mod
from trafficrl import sim
from trafficrl.risk import (BrakingParams, braking_safety_distance,
                            neighbor_scan, safety_coefficient)
from trafficrl.sim import VehicleState

params = BrakingParams()
print("braking safety distance (follower at 20 m/s):")
for v_front in (25.0, 20.0, 15.0, 10.0, 0.0):
    d = braking_safety_distance(20.0, v_front, params)
    print(f"  front vehicle at {v_front:4.1f} m/s -> {d:6.2f} m needed")

print("\nrisk coefficient for a 30 m needed distance:")
for gap in (90.0, 60.0, 30.0, 20.0, 10.0):
    kappa = safety_coefficient(30.0, gap)
    print(f"  actual gap {gap:5.1f} m -> kappa {kappa:+.3f}")

# a three-vehicle scene: ego CAV boxed in by a slow leader
world = [
    VehicleState(id=0, kind=sim.CAV, lane=1, pos=100.0, speed=22.0),
    VehicleState(id=1, kind=sim.HV, lane=1, pos=130.0, speed=12.0),
    VehicleState(id=2, kind=sim.HV, lane=2, pos=95.0, speed=24.0),
]
print("\nneighbor scan for the boxed-in CAV:")
for dim in ("L", "F"):
    slots = neighbor_scan(world, ego_id=0, dim=dim, params=params)
    kappas = {name: f"{s.kappa:+.2f}" for name, s in slots.items()}
    print(f"  {dim} dimension: {kappas}")

# run a short episode and decompose one CAV's rewards
road = sim.RoadConfig()
scenario = sim.ScenarioConfig(n_vehicles=12, m_cavs=1,
                              cav_spawn_window_s=2.0, rng_seed=1)
env = env_mod.HighwayEnv(road, scenario)
print("\nreward decomposition while holding +1.0 m/s^2:")
shown = 0
while not env.done() and shown < 6:
    actions_l = ({c.id: 0 for c in env.sim.active_cavs()}
                 if env.is_l_tick() else None)
    rewards_f, rewards_l, done, info = env.step(
        {c.id: 1.0 for c in env.sim.active_cavs()}, actions_l)
    if rewards_f and env.sim.tick % 50 == 0:
        cid, rb = next(iter(rewards_f.items()))
        print(f"  t={env.sim.clock:5.1f}s CAV {cid}: "
              f"safe {rb.safe:+.3f} task {rb.task:+.3f} "
              f"comfort {rb.comfort:+.3f} energy {rb.energy:+.4f} "
              f"= {rb.total:+.3f}")
        shown += 1
print(f"\noutcomes: {env.sim.outcomes}")
