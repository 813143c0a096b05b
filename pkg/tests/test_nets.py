"""Graph attention, convolution, dueling heads, optimizers, serialization."""

import numpy as np
import pytest

from trafficrl import nets
from trafficrl.autodiff import Tensor


def small_spec(kind="gat", **kw):
    defaults = dict(kind=kind, encoder_width=8, graph_width=8, graph_layers=2,
                    heads=2, trunk_width=8, critic_trunk_width=16)
    defaults.update(kw)
    return nets.NetSpec(**defaults)


# -- attention ----------------------------------------------------------------

def attention_fixture(adj_row):
    """3 nodes; node 0 attends over nodes 1 and 2 with logit exactly 1."""
    h = Tensor(np.array([[0.0], [1.0], [1.0]]))
    w = Tensor(np.array([[1.0]]))
    a_left = Tensor(np.array([[0.0]]))
    a_right = Tensor(np.array([[1.0]]))
    adj = np.array([adj_row, [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    return nets.gat_attention(h, adj, w, a_left, a_right).data


def test_attention_single_neighbor_is_one():
    alpha = attention_fixture([0.0, 1.0, 0.0])
    assert alpha[0, 1] == pytest.approx(1.0)
    assert alpha[0, 0] == 0.0 and alpha[0, 2] == 0.0


def test_attention_equal_logits_equal_weights_split_evenly():
    alpha = attention_fixture([0.0, 1.0, 1.0])
    assert alpha[0, 1] == pytest.approx(0.5)
    assert alpha[0, 2] == pytest.approx(0.5)


def test_attention_edge_weight_scales_logit():
    # logits 1 for both neighbors, edge weights 1.0 and 0.5:
    # alpha = e^1/(e^1+e^0.5), e^0.5/(e^1+e^0.5)
    alpha = attention_fixture([0.0, 1.0, 0.5])
    denom = np.e + np.exp(0.5)
    assert alpha[0, 1] == pytest.approx(np.e / denom, abs=1e-12)
    assert alpha[0, 2] == pytest.approx(np.exp(0.5) / denom, abs=1e-12)
    assert alpha[0, 1] == pytest.approx(0.6225, abs=1e-4)


def test_attention_isolated_row_all_zero():
    alpha = attention_fixture([0.0, 0.0, 0.0])
    assert np.all(alpha[0] == 0.0)


def test_attention_rows_sum_to_one_and_hard_mask(rng):
    n, f = 7, 4
    h = Tensor(rng.standard_normal((n, f)))
    w = Tensor(rng.standard_normal((f, f)))
    al = Tensor(rng.standard_normal((f, 1)))
    ar = Tensor(rng.standard_normal((f, 1)))
    adj = rng.uniform(0.0, 1.0, (n, n)) * (rng.random((n, n)) < 0.4)
    alpha = nets.gat_attention(h, adj, w, al, ar).data
    for i in range(n):
        if np.any(adj[i] > 0):
            assert alpha[i].sum() == pytest.approx(1.0, abs=1e-12)
        else:
            assert np.all(alpha[i] == 0.0)
    assert np.all(alpha[adj == 0] == 0.0)


def test_attention_large_logits_stay_finite(rng):
    h = Tensor(rng.standard_normal((3, 2)) * 1000.0)
    w = Tensor(np.eye(2) * 100.0)
    al = Tensor(np.ones((2, 1)))
    ar = Tensor(np.ones((2, 1)))
    adj = np.ones((3, 3)) - np.eye(3)
    alpha = nets.gat_attention(h, adj, w, al, ar).data
    assert np.all(np.isfinite(alpha))


# -- layers -------------------------------------------------------------------

def test_gat_layer_identity_configuration():
    rng = np.random.default_rng(0)
    layer = nets.GatLayer(2, 2, heads=1, rng=rng, activation="none")
    layer.w[0].data[:] = np.eye(2)
    h = Tensor(np.array([[0.3, -0.7]]))
    out = layer.forward(h, np.array([[1.0]]))
    assert np.allclose(out.data, h.data)


def test_gat_layer_zero_features_zero_output():
    rng = np.random.default_rng(1)
    layer = nets.GatLayer(3, 4, heads=2, rng=rng)
    h = Tensor(np.zeros((4, 3)))
    adj = np.ones((4, 4))
    assert np.all(layer.forward(h, adj).data == 0.0)


def test_gat_layer_matches_hand_rolled_oracle(rng):
    layer = nets.GatLayer(3, 5, heads=2, rng=np.random.default_rng(9),
                          slope=0.2, head_agg="sum")
    n = 3
    h = rng.standard_normal((n, 3))
    adj = np.array([[1.0, 0.8, 0.0], [0.8, 1.0, 0.3], [0.0, 0.3, 1.0]])

    def leaky(x):
        return np.where(x > 0, x, 0.2 * x)

    expect = np.zeros((n, 5))
    for k in range(layer.heads):
        hw = h @ layer.w[k].data
        z = leaky(hw @ layer.a_left[k].data + (hw @ layer.a_right[k].data).T)
        logits = z * adj
        alpha = np.zeros_like(adj)
        for i in range(n):
            nb = adj[i] > 0
            e = np.exp(logits[i, nb] - logits[i, nb].max())
            alpha[i, nb] = e / e.sum()
        expect += np.maximum(alpha @ hw, 0.0)
    out = layer.forward(Tensor(h), adj).data
    assert np.allclose(out, expect, atol=1e-12)


def test_gat_layer_concat_width():
    layer = nets.GatLayer(3, 4, heads=3, rng=np.random.default_rng(2),
                          head_agg="concat")
    assert layer.out_width == 12
    out = layer.forward(Tensor(np.zeros((2, 3))), np.ones((2, 2)))
    assert out.shape == (2, 12)


def test_gat_layer_permutation_equivariance(rng):
    layer = nets.GatLayer(4, 4, heads=2, rng=np.random.default_rng(3))
    n = 6
    h = rng.standard_normal((n, 4))
    adj = rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < 0.5)
    np.fill_diagonal(adj, 1.0)
    perm = rng.permutation(n)
    p = np.eye(n)[perm]
    out = layer.forward(Tensor(h), adj).data
    out_p = layer.forward(Tensor(p @ h), p @ adj @ p.T).data
    assert np.allclose(out_p, p @ out, atol=1e-10)


def test_gat_layer_isolated_node_does_not_disturb_others(rng):
    layer = nets.GatLayer(4, 4, heads=2, rng=np.random.default_rng(4))
    n = 5
    h = rng.standard_normal((n, 4))
    adj = rng.uniform(0.2, 1.0, (n, n))
    np.fill_diagonal(adj, 1.0)
    base = layer.forward(Tensor(h), adj).data
    h2 = np.vstack([h, rng.standard_normal((1, 4))])
    adj2 = np.zeros((n + 1, n + 1))
    adj2[:n, :n] = adj
    out = layer.forward(Tensor(h2), adj2).data
    assert np.allclose(out[:n], base, atol=1e-12)


def test_gcn_identity_configuration():
    layer = nets.GcnLayer(2, 2, np.random.default_rng(0), activation="none")
    layer.w.data[:] = np.eye(2)
    h = Tensor(np.array([[1.5, -2.0]]))
    out = layer.forward(h, np.array([[1.0]]))
    assert np.allclose(out.data, h.data)


def test_gcn_symmetric_nodes_identical_outputs():
    layer = nets.GcnLayer(3, 4, np.random.default_rng(1))
    h = Tensor(np.array([[0.2, 0.4, 0.6], [0.2, 0.4, 0.6]]))
    adj = np.array([[0.0, 0.7], [0.7, 0.0]])
    out = layer.forward(h, adj).data
    assert np.allclose(out[0], out[1])


def test_gcn_matches_dense_oracle(rng):
    layer = nets.GcnLayer(3, 4, np.random.default_rng(2))
    n = 3
    h = rng.standard_normal((n, 3))
    adj = np.array([[0.0, 0.5, 0.2], [0.5, 0.0, 0.0], [0.2, 0.0, 0.0]])
    a_hat = adj + np.eye(n)
    d = np.diag(1.0 / np.sqrt(a_hat.sum(axis=1)))
    expect = np.maximum(d @ a_hat @ d @ h @ layer.w.data, 0.0)
    out = layer.forward(Tensor(h), adj).data
    assert np.allclose(out, expect, atol=1e-12)


# -- dueling head -------------------------------------------------------------

def dueling_fixture(v_val, d_vals):
    rng = np.random.default_rng(0)
    v_head = nets.Linear(1, 1, rng)
    d_head = nets.Linear(1, 3, rng)
    v_head.w.data[:] = 0.0
    v_head.b.data[:] = v_val
    d_head.w.data[:] = 0.0
    d_head.b.data[:] = np.array(d_vals)
    return nets.dueling_q(Tensor(np.zeros((1, 1))), v_head, d_head).data[0]


def test_dueling_zero_advantage():
    assert np.allclose(dueling_fixture(2.5, [0.0, 0.0, 0.0]), [2.5, 2.5, 2.5])


def test_dueling_mean_subtraction():
    assert np.allclose(dueling_fixture(1.0, [1.0, 2.0, 3.0]), [0.0, 1.0, 2.0])


def test_dueling_q_minus_v_zero_mean(rng):
    for _ in range(20):
        v = rng.standard_normal()
        d = rng.standard_normal(3)
        q = dueling_fixture(v, d)
        assert np.mean(q - v) == pytest.approx(0.0, abs=1e-12)


# -- full networks ------------------------------------------------------------

def test_net_spec_validation():
    with pytest.raises(ValueError):
        nets.NetSpec(kind="transformer")
    with pytest.raises(ValueError):
        nets.NetSpec(head_agg="max")
    with pytest.raises(ValueError):
        nets.NetSpec(trunk_width=64, critic_trunk_width=64)


def test_lane_policy_output_shape(rng):
    net = nets.LanePolicyNet(4, 10, small_spec(), np.random.default_rng(0))
    feats = rng.standard_normal((6, 4))
    adj = np.eye(6)
    q = net.forward(feats, adj, np.array([1, 4]), rng.standard_normal((2, 10)))
    assert q.shape == (2, 3)


def test_actor_output_bounded(rng):
    net = nets.ActorNet(5, 7, small_spec(), np.random.default_rng(0))
    for _ in range(10):
        feats = rng.standard_normal((4, 5)) * 10.0
        mu = net.forward(feats, np.eye(4), np.array([0]),
                         rng.standard_normal((1, 7)) * 10.0)
        assert -4.5 <= mu.data[0, 0] <= 3.0


def test_critic_scalar_output_and_action_sensitivity(rng):
    net = nets.CriticNet(5, 7, small_spec(), np.random.default_rng(0))
    feats = rng.standard_normal((4, 5))
    states = rng.standard_normal((1, 7))
    q0 = net.forward(feats, np.eye(4), np.array([0]), states,
                     np.array([[0.0]])).data[0, 0]
    q1 = net.forward(feats, np.eye(4), np.array([0]), states,
                     np.array([[2.0]])).data[0, 0]
    assert q0 != q1


def test_mlp_kind_ignores_adjacency(rng):
    net = nets.LanePolicyNet(4, 10, small_spec(kind="mlp"),
                             np.random.default_rng(0))
    feats = rng.standard_normal((5, 4))
    states = rng.standard_normal((1, 10))
    qa = net.forward(feats, np.eye(5), np.array([2]), states).data
    qb = net.forward(feats, np.ones((5, 5)), np.array([2]), states).data
    assert np.allclose(qa, qb)


def test_gcn_kind_builds_and_runs(rng):
    net = nets.LanePolicyNet(4, 10, small_spec(kind="gcn"),
                             np.random.default_rng(0))
    q = net.forward(rng.standard_normal((3, 4)), np.eye(3), np.array([0]),
                    rng.standard_normal((1, 10)))
    assert q.shape == (1, 3)


# -- parameter-space utilities ------------------------------------------------

def test_soft_update_examples():
    t = {"w": Tensor(np.zeros((1, 1)))}
    o = {"w": Tensor(np.ones((1, 1)))}
    nets.soft_update(t, o, 0.01)
    assert t["w"].data[0, 0] == pytest.approx(0.01)
    nets.soft_update(t, o, 1.0)
    assert t["w"].data[0, 0] == 1.0
    before = t["w"].data.copy()
    nets.soft_update(t, o, 0.0)
    assert np.all(t["w"].data == before)


def test_clone_and_copy_are_value_snapshots():
    src = {"w": Tensor(np.ones((2, 2)))}
    c = nets.clone_params(src)
    src["w"].data[:] = 5.0
    assert np.all(c["w"].data == 1.0)
    nets.copy_into(src, c)
    assert np.all(src["w"].data == 1.0)


def test_adam_zero_grad_no_move():
    p = {"w": Tensor(np.ones((2, 2)), requires_grad=True)}
    p["w"].grad = np.zeros((2, 2))
    opt = nets.Adam(p, lr=0.1)
    opt.step()
    assert np.all(p["w"].data == 1.0)


def test_adam_first_step_magnitude_is_lr():
    p = {"w": Tensor(np.zeros((1, 2)), requires_grad=True)}
    p["w"].grad = np.array([[3.0, -0.5]])
    opt = nets.Adam(p, lr=0.01)
    opt.step()
    # bias-corrected first step: -lr * sign(g) up to the epsilon term
    assert np.allclose(p["w"].data, [[-0.01, 0.01]], atol=1e-6)


def test_adam_constant_gradient_descends():
    p = {"w": Tensor(np.array([[5.0]]), requires_grad=True)}
    opt = nets.Adam(p, lr=0.05)
    for _ in range(50):
        p["w"].grad = np.array([[2.0]])
        opt.step()
    assert p["w"].data[0, 0] < 5.0 - 40 * 0.05 * 0.9


def test_save_load_roundtrip(tmp_path):
    net = nets.LanePolicyNet(4, 10, small_spec(), np.random.default_rng(5))
    path = tmp_path / "params.npz"
    nets.save_params(path, net.params())
    loaded = nets.load_params(path)
    for k, v in net.params().items():
        assert np.array_equal(loaded[k].data, v.data)


def test_load_rejects_unknown_format(tmp_path):
    path = tmp_path / "bad.npz"
    np.savez(path, __format_version__="999", w=np.zeros(2))
    with pytest.raises(ValueError):
        nets.load_params(path)
