"""Shared helpers for the test suite."""

import numpy as np
import pytest

from trafficrl import sim


def veh(vid, kind=sim.CAV, lane=0, pos=0.0, speed=10.0, **kw):
    return sim.VehicleState(id=vid, kind=kind, lane=lane, pos=pos,
                            speed=speed, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_world(gen, n_max=6, road_length=1000.0):
    """A random mixed CAV/HV world with distinct positions."""
    n = int(gen.integers(1, n_max + 1))
    world = []
    for i in range(n):
        world.append(veh(
            i,
            kind=sim.CAV if gen.random() < 0.5 else sim.HV,
            lane=int(gen.integers(0, 3)),
            pos=float(gen.uniform(0.0, road_length)),
            speed=float(gen.uniform(0.0, 35.0)),
        ))
    return world
