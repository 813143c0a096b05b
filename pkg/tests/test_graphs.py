"""Weighted multilevel graph construction, degrees and entropy analyses."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trafficrl import graphs, sim
from conftest import veh, random_world

TH = graphs.GraphThresholds()


# -- node features ------------------------------------------------------------

def test_global_feature_row_scaling():
    w = [veh(0, lane=1, pos=100.0, speed=15.0)]
    m = graphs.build_node_features(w, graphs.DIM_GLOBAL)
    row = m.rows[0]
    assert row[0] == pytest.approx(15.0 / 35.0, abs=1e-4)  # 0.4286
    assert row[1] == pytest.approx((1.5 * 3.5) / 10.5)  # lane-1 center
    assert row[2] == pytest.approx(0.1)
    assert row[3] == pytest.approx(0.5)  # main segment
    assert row[4] == pytest.approx(0.5)
    assert row[5] == 1.0


def test_kind_column_hv_zero_cav_one():
    w = [veh(0, kind=sim.HV), veh(1, kind=sim.CAV)]
    m = graphs.build_node_features(w, graphs.DIM_GLOBAL)
    assert m.rows[0][5] == 0.0
    assert m.rows[1][5] == 1.0


def test_f_features_default_last_command_zero():
    w = [veh(0)]
    m = graphs.build_node_features(w, graphs.DIM_F, last_l_actions=None)
    assert m.rows[0][4] == 0.0


def test_f_features_carry_last_command():
    w = [veh(0)]
    m = graphs.build_node_features(w, graphs.DIM_F, last_l_actions={0: -1})
    assert m.rows[0][4] == -1.0


def test_feature_rows_sorted_by_id_and_active_only():
    w = [veh(3), veh(1), veh(2, active=False)]
    m = graphs.build_node_features(w, graphs.DIM_L)
    assert m.ids == [1, 3]
    assert m.rows.shape == (2, 4)


def test_unknown_dim_tag_rejected():
    with pytest.raises(ValueError):
        graphs.build_node_features([veh(0)], "bogus")


# -- base adjacency -----------------------------------------------------------

def test_base_adjacency_hv_rows_zero_off_diagonal():
    w = [veh(0, kind=sim.HV, pos=0.0), veh(1, kind=sim.HV, pos=5.0)]
    a = graphs.build_base_adjacency(w, TH).weights
    assert a[0, 1] == 0.0 and a[1, 0] == 0.0
    assert a[0, 0] == 1.0 and a[1, 1] == 1.0


def test_base_adjacency_is_directed_toward_hvs():
    w = [veh(0, kind=sim.CAV, pos=0.0), veh(1, kind=sim.HV, pos=10.0)]
    a = graphs.build_base_adjacency(w, TH).weights
    assert a[0, 1] == 1.0  # CAV senses the HV
    assert a[1, 0] == 0.0  # HV never sends


def test_base_adjacency_diagonal_always_one():
    gen = np.random.default_rng(0)
    for _ in range(20):
        w = random_world(gen)
        a = graphs.build_base_adjacency(w, TH).weights
        assert np.all(np.diag(a) == 1.0)
        assert set(np.unique(a)) <= {0.0, 1.0}


def test_base_adjacency_distance_threshold():
    w = [veh(0, pos=0.0), veh(1, kind=sim.HV, pos=49.9), veh(2, kind=sim.HV, pos=50.0)]
    a = graphs.build_base_adjacency(w, TH).weights
    assert a[0, 1] == 1.0
    assert a[0, 2] == 0.0


# -- edge weights -------------------------------------------------------------

def test_lane_change_weight_examples():
    assert graphs.lane_change_weight(0.0, 50.0) == 1.0
    assert graphs.lane_change_weight(50.0, 50.0) == 0.0
    assert graphs.lane_change_weight(12.5, 50.0) == pytest.approx(0.75, abs=1e-12)


def test_lane_change_weight_rejects_non_finite():
    with pytest.raises(ValueError):
        graphs.lane_change_weight(float("nan"), 50.0)


@given(d=st.floats(0.0, 200.0))
@settings(max_examples=200, deadline=None)
def test_lane_change_weight_range_and_zero_beyond_threshold(d):
    w = graphs.lane_change_weight(d, 50.0)
    assert 0.0 <= w <= 1.0
    if d >= 50.0:
        assert w == 0.0


@given(d1=st.floats(0.0, 200.0), d2=st.floats(0.0, 200.0))
@settings(max_examples=200, deadline=None)
def test_lane_change_weight_non_increasing(d1, d2):
    lo, hi = sorted((d1, d2))
    assert graphs.lane_change_weight(lo, 50.0) >= graphs.lane_change_weight(hi, 50.0)


def test_following_weight_examples():
    # distance at the decay scale, huge speed difference -> e^-1
    big_dv = 1e9
    assert graphs.following_weight(TH.lambda_d, big_dv, TH) == pytest.approx(
        math.exp(-1.0), abs=1e-6)
    # beyond Y, or below the speed-difference floor -> no edge
    assert graphs.following_weight(TH.Y, 10.0, TH) == 0.0
    assert graphs.following_weight(10.0, 0.05, TH) == 0.0
    # contact limit
    assert graphs.following_weight(0.0, big_dv, TH) == pytest.approx(1.0, abs=1e-6)


@given(d=st.floats(0.0, 120.0), dv=st.floats(-40.0, 40.0))
@settings(max_examples=300, deadline=None)
def test_following_weight_range(d, dv):
    w = graphs.following_weight(d, dv, TH)
    assert 0.0 <= w <= 1.0


@given(d=st.floats(0.0, 79.0), dv1=st.floats(0.1, 40.0), dv2=st.floats(0.1, 40.0))
@settings(max_examples=200, deadline=None)
def test_following_weight_non_decreasing_in_speed_gap(d, dv1, dv2):
    lo, hi = sorted((dv1, dv2))
    assert graphs.following_weight(d, hi, TH) >= graphs.following_weight(d, lo, TH)


@given(d1=st.floats(0.0, 79.0), d2=st.floats(0.0, 79.0), dv=st.floats(0.1, 40.0))
@settings(max_examples=200, deadline=None)
def test_following_weight_non_increasing_in_distance(d1, d2, dv):
    lo, hi = sorted((d1, d2))
    assert graphs.following_weight(lo, dv, TH) >= graphs.following_weight(hi, dv, TH)


# -- multilevel construction --------------------------------------------------

def test_multilevel_adjacent_lane_entry():
    w = [veh(0, lane=1, pos=0.0, speed=15.0),
         veh(1, kind=sim.HV, lane=2, pos=25.0, speed=22.0)]
    g = graphs.build_multilevel_graph(w, TH)
    assert g.adj_L.weights[0, 1] == pytest.approx(0.5, abs=1e-12)
    assert g.adj_F.weights[0, 1] == 0.0


def test_multilevel_same_lane_leader_in_f_only():
    w = [veh(0, lane=1, pos=0.0, speed=20.0),
         veh(1, kind=sim.HV, lane=1, pos=30.0, speed=10.0)]
    g = graphs.build_multilevel_graph(w, TH)
    assert g.adj_F.weights[0, 1] > 0.0
    assert g.adj_L.weights[0, 1] == 0.0


def test_multilevel_cav_pair_same_lane_connected():
    w = [veh(0, lane=0, pos=0.0, speed=20.0), veh(1, lane=0, pos=40.0, speed=10.0)]
    g = graphs.build_multilevel_graph(w, TH)
    assert g.adj_F.weights[0, 1] > 0.0
    assert g.adj_F.weights[1, 0] > 0.0


def test_multilevel_f_restricted_to_nearest_neighbors():
    # three HVs ahead in the same lane; only the nearest gets an F edge
    w = [veh(0, lane=0, pos=0.0, speed=25.0)] + [
        veh(i, kind=sim.HV, lane=0, pos=10.0 * i, speed=5.0) for i in (1, 2, 3)]
    g = graphs.build_multilevel_graph(w, TH)
    assert g.adj_F.weights[0, 1] > 0.0
    assert g.adj_F.weights[0, 2] == 0.0
    assert g.adj_F.weights[0, 3] == 0.0


def test_dimension_separation_random_worlds():
    gen = np.random.default_rng(42)
    for _ in range(50):
        w = random_world(gen)
        g = graphs.build_multilevel_graph(w, TH)
        lanes = {v.id: v.lane for v in w}
        ids = g.ids
        for i, vi in enumerate(ids):
            for j, vj in enumerate(ids):
                if i == j:
                    continue
                if g.adj_L.weights[i, j] > 0:
                    assert abs(lanes[vi] - lanes[vj]) == 1
                if g.adj_F.weights[i, j] > 0:
                    assert lanes[vi] == lanes[vj]


def test_hv_rows_zero_in_both_dimensions():
    gen = np.random.default_rng(7)
    for _ in range(30):
        w = random_world(gen)
        g = graphs.build_multilevel_graph(w, TH)
        kinds = {v.id: v.kind for v in w}
        for i, vid in enumerate(g.ids):
            if kinds[vid] == sim.HV:
                assert np.all(g.adj_L.weights[i] == 0.0)
                assert np.all(g.adj_F.weights[i] == 0.0)


def test_all_weights_in_unit_interval():
    gen = np.random.default_rng(8)
    for _ in range(30):
        w = random_world(gen)
        g = graphs.build_multilevel_graph(w, TH)
        for a in (g.adj_L.weights, g.adj_F.weights):
            assert np.all(a >= 0.0) and np.all(a <= 1.0)


# -- degrees and node removal -------------------------------------------------

def test_weighted_degree_examples():
    a = np.array([[1.0, 0.5, 0.25], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    adj = graphs.WeightedAdjacency(a, graphs.DIM_L, [10, 11, 12])
    assert graphs.weighted_degree(adj, 10) == pytest.approx(0.75)
    assert graphs.weighted_degree(adj, 11) == 0.0  # isolated
    assert graphs.weighted_degree(adj, 12) == 0.0


def test_weighted_degree_unknown_id():
    adj = graphs.WeightedAdjacency(np.eye(1), graphs.DIM_L, [0])
    with pytest.raises(KeyError):
        graphs.weighted_degree(adj, 99)


def test_node_removal_delta_is_minus_edge_weight():
    a = np.array([[1.0, 0.2, 0.0], [0.2, 1.0, 0.7], [0.0, 0.7, 1.0]])
    adj = graphs.WeightedAdjacency(a, graphs.DIM_L, [0, 1, 2])
    out = graphs.node_removal_degree_delta(adj, 1)
    assert out[0]["weighted"] == pytest.approx(-0.2)
    assert out[2]["weighted"] == pytest.approx(-0.7)
    assert out[0]["binary"] == -1.0
    # zero edge -> zero delta
    out0 = graphs.node_removal_degree_delta(adj, 0)
    assert out0[2]["weighted"] == 0.0
    assert out0[2]["binary"] == 0.0


def test_node_removal_matches_recomputed_degree():
    gen = np.random.default_rng(77)
    for _ in range(50):
        n = int(gen.integers(2, 12))
        a = gen.uniform(0.0, 1.0, (n, n))
        adj = graphs.WeightedAdjacency(a, graphs.DIM_L, list(range(n)))
        u = int(gen.integers(n))
        deltas = graphs.node_removal_degree_delta(adj, u)
        keep = [i for i in range(n) if i != u]
        sub = graphs.WeightedAdjacency(a[np.ix_(keep, keep)], graphs.DIM_L, keep)
        for v in keep:
            before = graphs.weighted_degree(adj, v)
            after = graphs.weighted_degree(sub, v)
            # the reported delta is exact; the resummed degrees agree up to
            # float addition rounding
            assert deltas[v]["weighted"] == -a[v, u]
            assert after - before == pytest.approx(-a[v, u], abs=1e-12)


def test_binary_degree_drop_counts_severed_edges():
    a = np.array([
        [1.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, 0.0, 0.0],
        [1.0, 0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0, 1.0]])
    adj = graphs.WeightedAdjacency(a, graphs.DIM_BASE, [0, 1, 2, 3])
    out = graphs.node_removal_degree_delta(adj, 0)
    assert sum(d["binary"] for d in out.values()) == -3.0


# -- entropy ------------------------------------------------------------------

def test_entropy_examples():
    assert graphs.attention_entropy({0: 1.0}) == 0.0
    h4 = graphs.attention_entropy({i: 0.25 for i in range(4)})
    assert h4 == pytest.approx(math.log(4.0), abs=1e-12)


def test_entropy_rejects_unnormalized():
    with pytest.raises(ValueError):
        graphs.attention_entropy({0: 0.5, 1: 0.4})


def test_subgraph_attention_less_entropic_than_diffuse_global():
    p_t = {0: 0.7, 1: 0.3}
    p_g = {i: w for i, w in enumerate([0.17, 0.17, 0.17, 0.17, 0.16, 0.16])}
    h_l, h_f, h_g = graphs.attention_entropy_compare(p_t, p_t, p_g)
    assert h_l < h_g and h_f < h_g
