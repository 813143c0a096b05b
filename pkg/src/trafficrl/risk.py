"""Braking safety distance and the standard safety distance coefficient.

The braking process is split into four phases (sensing delay, gap
elimination, linear braking, constant braking); the safety coefficient
compares the resulting required distance with the actual bumper gap.  The
neighbor scan picks out the up-to-six surrounding vehicles whose coefficients
feed the per-CAV state vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

from .sim import VehicleState

# slot names, in the canonical order: front, left-front, right-front,
# rear, left-rear, right-rear.  "left" is lane index +1 (toward the fast
# lane), "right" is lane index -1.
SLOTS_L = ("front", "left_front", "right_front", "rear", "left_rear", "right_rear")
SLOTS_F = ("front", "rear")

EMPTY_SLOT_KAPPA = -1.0
_MIN_GAP = 0.01  # m; overlapping neighbors are reported at maximal risk


class DegenerateContactError(ValueError):
    """Raised when the actual distance is non-positive (vehicles touching)."""


@dataclass(frozen=True)
class BrakingParams:
    t1: float = 0.3  # sensor delay, s
    t2: float = 0.1  # braking-gap elimination, s
    t3: float = 0.24  # linear braking, s
    d: float = 0.6  # stopped safety gap, m
    a_max: float = 4.5  # max deceleration, m/s^2

    def __post_init__(self):
        if min(self.t1, self.t2, self.t3, self.d, self.a_max) <= 0:
            raise ValueError("all braking parameters must be positive")


@dataclass
class NeighborSlot:
    vehicle_id: int | None = None
    gap: float | None = None  # bumper-to-bumper, m
    speed: float | None = None
    kappa: float = EMPTY_SLOT_KAPPA


def braking_safety_distance(v_e: float, v_f: float, params: BrakingParams) -> float:
    """Four-phase braking safety distance, m.

    v_e is the rear (approaching) vehicle's speed, v_f the front vehicle's.
    An opening gap (v_f > v_e) is computed with v_f clamped to v_e, giving
    the minimal reactive distance.
    """
    if v_e < 0 or v_f < 0:
        raise ValueError("speeds must be non-negative")
    v_f = min(v_f, v_e)
    return ((params.t1 + params.t2) * v_e
            + 0.5 * params.t3 * (v_e - v_f)
            + (v_e * v_e - v_f * v_f) / (2.0 * params.a_max)
            + params.d)


def safety_coefficient(d_sf: float, d_es: float) -> float:
    """kappa = min(D_sf/D_es - 1, 1); positive values flag collision risk."""
    if d_es <= 0:
        raise DegenerateContactError(f"actual distance must be positive, got {d_es}")
    return min(d_sf / d_es - 1.0, 1.0)


def _pair_kappa(rear: VehicleState, front: VehicleState,
                params: BrakingParams) -> tuple[float, float]:
    """(kappa, gap) for an ordered rear/front pair, bumper to bumper."""
    gap = front.pos - rear.pos - rear.length
    if gap <= 0:
        return 1.0, max(gap, 0.0)
    d_sf = braking_safety_distance(rear.speed, front.speed, params)
    return safety_coefficient(d_sf, max(gap, _MIN_GAP)), gap


def neighbor_scan(world: list[VehicleState], ego_id: int, dim: str,
                  params: BrakingParams) -> dict[str, NeighborSlot]:
    """Safety coefficients of the surrounding vehicles of one CAV.

    dim "L" fills all six slots; dim "F" only front and rear.  For front
    slots the ego is the rear vehicle of the pair; for rear slots the
    neighbor is.  Empty slots report kappa = -1.
    """
    active = [v for v in world if v.active]
    ego = next((v for v in active if v.id == ego_id), None)
    if ego is None:
        raise ValueError(f"ego {ego_id} not found or inactive")
    if dim not in ("L", "F"):
        raise ValueError(f"dim must be 'L' or 'F', got {dim!r}")

    lane_offset = {"front": 0, "rear": 0, "left_front": 1, "left_rear": 1,
                   "right_front": -1, "right_rear": -1}
    slots = {name: NeighborSlot() for name in (SLOTS_L if dim == "L" else SLOTS_F)}
    for name, slot in slots.items():
        lane = ego.lane + lane_offset[name]
        if not (0 <= lane <= 2):
            continue
        ahead = name.endswith("front")
        best = None
        for v in active:
            if v.id == ego.id or v.lane != lane:
                continue
            if ahead and v.pos >= ego.pos:
                if best is None or v.pos < best.pos:
                    best = v
            elif not ahead and v.pos < ego.pos:
                if best is None or v.pos > best.pos:
                    best = v
        if best is None:
            continue
        if ahead:
            kappa, gap = _pair_kappa(ego, best, params)
        else:
            kappa, gap = _pair_kappa(best, ego, params)
        slots[name] = NeighborSlot(vehicle_id=best.id, gap=gap,
                                   speed=best.speed, kappa=kappa)
    return slots
