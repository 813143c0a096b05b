"""Traffic-graph construction: node features, binary and weighted adjacency.

The traffic scene becomes a directed graph whose nodes are vehicles.  A
binary base adjacency encodes who can share information with whom; on top of
it sit two weighted views, one for the lane-change dimension (adjacent-lane
pairs, distance-decaying weights) and one for the following dimension
(same-lane nearest leader/follower pairs, distance- and closing-speed-
dependent weights).  HV rows never carry outgoing edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sim import CAV, LANE_WIDTH, SPEED_LIMIT, VehicleState

DIM_GLOBAL = "global"
DIM_BASE = "base"
DIM_L = "L"
DIM_F = "F"

_SEG_CODE = {"ramp-in": 0.0, "main": 0.5, "ramp-out": 1.0}


@dataclass(frozen=True)
class GraphThresholds:
    """Distance/speed scales for the weighted adjacency construction."""

    X: float = 50.0  # lane-change dimension distance threshold, m
    Y: float = 80.0  # following dimension distance threshold, m
    dV: float = 0.5  # speed-difference threshold, m/s
    lambda_d: float = 30.0  # distance decay scale, m
    lambda_v: float = 2.0  # speed scale, m/s
    eps_v: float = 0.1  # minimum speed difference, m/s

    def __post_init__(self):
        for name in ("X", "Y", "dV", "lambda_d", "lambda_v", "eps_v"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass
class NodeFeatureMatrix:
    rows: np.ndarray  # (n, f)
    dim_tag: str
    ids: list  # row order, ascending vehicle id


@dataclass
class WeightedAdjacency:
    weights: np.ndarray  # (n, n), entries in [0, 1]
    dim_tag: str
    ids: list

    def index_of(self, vid: int) -> int:
        try:
            return self.ids.index(vid)
        except ValueError:
            raise KeyError(f"unknown vehicle id {vid}") from None


@dataclass
class MultilevelGraph:
    features_global: NodeFeatureMatrix
    features_L: NodeFeatureMatrix
    features_F: NodeFeatureMatrix
    adj_L: WeightedAdjacency
    adj_F: WeightedAdjacency
    tick: int

    @property
    def ids(self):
        return self.adj_L.ids


def _sorted_world(world: list[VehicleState]) -> list[VehicleState]:
    return sorted((v for v in world if v.active), key=lambda v: v.id)


def build_node_features(world, dim_tag: str, last_l_actions: dict | None = None,
                        road_length: float = 1000.0) -> NodeFeatureMatrix:
    """Feature rows in deterministic ascending-id order, scaled to [0, 1].

    global: [v, lat, pos, segment, lane, kind]
    L:      [pos, lat, lane, kind]
    F:      [v, pos, lane, kind, last lane command]
    """
    last_l_actions = last_l_actions or {}
    vehicles = _sorted_world(world)
    rows = []
    for v in vehicles:
        sv = v.speed / SPEED_LIMIT
        slat = v.lat / (3 * LANE_WIDTH)
        sp = v.pos / road_length
        seg = _SEG_CODE[v.segment]
        slane = v.lane / 2.0
        kind = 1.0 if v.kind == CAV else 0.0
        if dim_tag == DIM_GLOBAL:
            rows.append([sv, slat, sp, seg, slane, kind])
        elif dim_tag == DIM_L:
            rows.append([sp, slat, slane, kind])
        elif dim_tag == DIM_F:
            rows.append([sv, sp, slane, kind, float(last_l_actions.get(v.id, 0))])
        else:
            raise ValueError(f"unknown dim_tag {dim_tag!r}")
    n_cols = {"global": 6, "L": 4, "F": 5}[dim_tag]
    arr = np.array(rows, dtype=float).reshape(len(vehicles), n_cols)
    return NodeFeatureMatrix(rows=arr, dim_tag=dim_tag, ids=[v.id for v in vehicles])


def build_base_adjacency(world, thresholds: GraphThresholds) -> WeightedAdjacency:
    """Binary directed adjacency under the information-sharing assumptions.

    CAV rows connect to every vehicle (CAV or HV) within the distance
    threshold X; HV rows are zero off the diagonal; every vehicle connects
    to itself.
    """
    vehicles = _sorted_world(world)
    n = len(vehicles)
    a = np.zeros((n, n))
    for i, vi in enumerate(vehicles):
        a[i, i] = 1.0
        if vi.kind != CAV:
            continue
        for j, vj in enumerate(vehicles):
            if i == j:
                continue
            if abs(vi.pos - vj.pos) < thresholds.X:
                a[i, j] = 1.0
    return WeightedAdjacency(weights=a, dim_tag=DIM_BASE, ids=[v.id for v in vehicles])


def lane_change_weight(delta_d: float, X: float) -> float:
    """Piecewise-linear distance decay: 1 at contact, 0 at and beyond X."""
    if not (math.isfinite(delta_d) and math.isfinite(X)):
        raise ValueError("lane_change_weight needs finite inputs")
    if delta_d >= X:
        return 0.0
    return max(0.0, 1.0 - delta_d / X)


def following_weight(delta_d: float, delta_v: float,
                     thresholds: GraphThresholds) -> float:
    """Distance- and speed-difference-dependent weight for same-lane pairs.

    Nonzero only when the pair is within Y and the speed difference exceeds
    eps_v; decays with distance and grows with the speed difference.
    """
    if not (math.isfinite(delta_d) and math.isfinite(delta_v)):
        raise ValueError("following_weight needs finite inputs")
    dv = abs(delta_v)
    if delta_d >= thresholds.Y or dv < thresholds.eps_v:
        return 0.0
    dv = max(dv, thresholds.eps_v)
    return math.exp(-delta_d / thresholds.lambda_d - thresholds.lambda_v / dv)


def build_multilevel_graph(world, thresholds: GraphThresholds,
                           last_l_actions: dict | None = None, tick: int = 0,
                           road_length: float = 1000.0) -> MultilevelGraph:
    """Assemble the per-dimension feature matrices and weighted adjacencies.

    adj_L: CAV rows, adjacent-lane targets within X, lane_change_weight.
    adj_F: CAV rows, nearest same-lane leader and follower, following_weight.
    Diagonals are 1 for CAV rows in both dimensions.
    """
    vehicles = _sorted_world(world)
    ids = [v.id for v in vehicles]
    n = len(vehicles)
    a_l = np.zeros((n, n))
    a_f = np.zeros((n, n))
    for i, vi in enumerate(vehicles):
        if vi.kind != CAV:
            continue
        a_l[i, i] = 1.0
        a_f[i, i] = 1.0
        # lane-change dimension: every adjacent-lane vehicle within X
        for j, vj in enumerate(vehicles):
            if i == j:
                continue
            if abs(vi.lane - vj.lane) == 1:
                d = abs(vi.pos - vj.pos)
                if d < thresholds.X:
                    a_l[i, j] = lane_change_weight(d, thresholds.X)
        # following dimension: nearest leader and follower in the same lane
        leader = follower = None
        for j, vj in enumerate(vehicles):
            if i == j or vj.lane != vi.lane:
                continue
            if vj.pos >= vi.pos:
                if leader is None or vj.pos < vehicles[leader].pos:
                    leader = j
            else:
                if follower is None or vj.pos > vehicles[follower].pos:
                    follower = j
        for j in (leader, follower):
            if j is None:
                continue
            vj = vehicles[j]
            a_f[i, j] = following_weight(abs(vi.pos - vj.pos),
                                         vi.speed - vj.speed, thresholds)
    feats_g = build_node_features(vehicles, DIM_GLOBAL, road_length=road_length)
    feats_l = build_node_features(vehicles, DIM_L, road_length=road_length)
    feats_f = build_node_features(vehicles, DIM_F, last_l_actions,
                                  road_length=road_length)
    return MultilevelGraph(
        features_global=feats_g, features_L=feats_l, features_F=feats_f,
        adj_L=WeightedAdjacency(a_l, DIM_L, ids),
        adj_F=WeightedAdjacency(a_f, DIM_F, ids),
        tick=tick)


def weighted_degree(adj: WeightedAdjacency, vid: int) -> float:
    """Row sum excluding the diagonal."""
    i = adj.index_of(vid)
    return float(adj.weights[i].sum() - adj.weights[i, i])


def node_removal_degree_delta(adj: WeightedAdjacency, vid: int) -> dict:
    """Exact weighted-degree change of every other node when vid vanishes.

    For each remaining node v, delta(v) = -a_vu where a_vu is v's edge weight
    toward the removed node.  The companion binary delta is -1 per severed
    edge, the step-wise change a 0/1 graph would exhibit.
    """
    u = adj.index_of(vid)
    out = {}
    for i, other in enumerate(adj.ids):
        if i == u:
            continue
        w = float(adj.weights[i, u])
        out[other] = {"weighted": -w, "binary": -1.0 if w > 0 else 0.0}
    return out


def attention_entropy(attention: dict) -> float:
    """Shannon entropy (nats) of a node->probability attention map."""
    total = sum(attention.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"attention map sums to {total}, not 1")
    h = 0.0
    for p in attention.values():
        if p < 0:
            raise ValueError("attention probabilities must be non-negative")
        if p > 0:
            h -= p * math.log(p)
    return h


def attention_entropy_compare(attn_L: dict, attn_F: dict,
                              attn_G: dict) -> tuple[float, float, float]:
    """Entropies (H_L, H_F, H_G) of the dimension-level and global maps."""
    return (attention_entropy(attn_L), attention_entropy(attn_F),
            attention_entropy(attn_G))
