"""Graph attention networks, dueling heads, actor/critic and optimizers.

Attention is hard-masked: softmax runs only over the neighbor set
{v : a_uv > 0}, and the edge weight additionally scales the logit.  Head
outputs are summed by default (a `concat` aggregation toggle exists for
ablation).  Everything runs on the minimal autodiff engine in 64-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat, parameter
from .sim import A_ACC, A_DEC


@dataclass
class NetSpec:
    kind: str = "gat"  # gat | gcn | mlp
    head_agg: str = "sum"  # sum | concat
    encoder_width: int = 64
    graph_width: int = 64
    graph_layers: int = 2
    heads: int = 3
    trunk_width: int = 64
    critic_trunk_width: int = 128  # value network is wider than the policy
    leaky_slope: float = 0.2

    def __post_init__(self):
        if self.kind not in ("gat", "gcn", "mlp"):
            raise ValueError(f"unknown network kind {self.kind!r}")
        if self.head_agg not in ("sum", "concat"):
            raise ValueError(f"unknown head aggregation {self.head_agg!r}")
        if self.critic_trunk_width < 2 * self.trunk_width:
            raise ValueError("critic trunk must be at least twice the policy trunk")


def gat_attention(h: Tensor, adj: np.ndarray, w: Tensor, a_left: Tensor,
                  a_right: Tensor, slope: float = 0.2) -> Tensor:
    """Masked weighted attention matrix for one head.

    Logits LeakyReLU(a^T [W h_u || W h_v]) are scaled by the edge weight and
    softmax-normalized over each node's neighbor set; entries without an edge
    are exactly zero, and rows without neighbors come back all-zero.
    """
    mask = (adj > 0).astype(float)
    hw = h @ w
    s_left = hw @ a_left  # (n, 1)
    s_right = hw @ a_right
    z = (s_left + s_right.T).leaky_relu(slope)
    logits = z * Tensor(adj)
    # constant per-row shift over neighbors keeps exp in range without
    # changing the softmax value or gradient
    raw = logits.data
    shifted_max = np.where(mask.any(axis=1, keepdims=True),
                           np.max(np.where(mask > 0, raw, -np.inf),
                                  axis=1, keepdims=True), 0.0)
    e = ((logits - Tensor(shifted_max)) * Tensor(mask)).exp() * Tensor(mask)
    denom = e.sum(axis=1, keepdims=True)
    denom_safe = denom + Tensor((denom.data == 0).astype(float))
    return e / denom_safe


class GatLayer:
    def __init__(self, f_in, f_out, heads, rng, slope=0.2, head_agg="sum",
                 activation="relu"):
        self.heads = heads
        self.slope = slope
        self.head_agg = head_agg
        self.activation = activation
        self.w = [parameter((f_in, f_out), rng) for _ in range(heads)]
        self.a_left = [parameter((f_out, 1), rng) for _ in range(heads)]
        self.a_right = [parameter((f_out, 1), rng) for _ in range(heads)]

    @property
    def out_width(self):
        base = self.w[0].shape[1]
        return base * self.heads if self.head_agg == "concat" else base

    def params(self, prefix):
        out = {}
        for k in range(self.heads):
            out[f"{prefix}.w{k}"] = self.w[k]
            out[f"{prefix}.al{k}"] = self.a_left[k]
            out[f"{prefix}.ar{k}"] = self.a_right[k]
        return out

    def _act(self, t):
        return t.relu() if self.activation == "relu" else t

    def forward(self, h: Tensor, adj: np.ndarray) -> Tensor:
        outs = []
        for k in range(self.heads):
            alpha = gat_attention(h, adj, self.w[k], self.a_left[k],
                                  self.a_right[k], self.slope)
            outs.append(self._act(alpha @ (h @ self.w[k])))
        if self.head_agg == "concat":
            return concat(outs, axis=1)
        acc = outs[0]
        for o in outs[1:]:
            acc = acc + o
        return acc


class GcnLayer:
    """Symmetric degree-normalized convolution over the weighted adjacency."""

    def __init__(self, f_in, f_out, rng, activation="relu"):
        self.w = parameter((f_in, f_out), rng)
        self.activation = activation

    @property
    def out_width(self):
        return self.w.shape[1]

    def params(self, prefix):
        return {f"{prefix}.w": self.w}

    def forward(self, h: Tensor, adj: np.ndarray) -> Tensor:
        a_hat = adj + np.eye(adj.shape[0])
        deg = a_hat.sum(axis=1)
        d_inv_sqrt = 1.0 / np.sqrt(deg)
        norm = a_hat * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]
        out = Tensor(norm) @ (h @ self.w)
        return out.relu() if self.activation == "relu" else out


class Linear:
    def __init__(self, f_in, f_out, rng):
        self.w = parameter((f_in, f_out), rng)
        self.b = parameter(np.zeros((1, f_out)))

    def params(self, prefix):
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}

    def forward(self, x: Tensor) -> Tensor:
        return (x @ self.w) + self.b


def dueling_q(features: Tensor, v_head: Linear, d_head: Linear) -> Tensor:
    """Q(g, a) = V(g) + D(g, a) - mean_a D(g, a)."""
    v = v_head.forward(features)
    d = d_head.forward(features)
    return v + d - d.mean(axis=1, keepdims=True)


class GraphStack:
    """Node encoder plus graph layers; `mlp` kind skips neighbor mixing."""

    def __init__(self, f_in, spec: NetSpec, rng):
        self.spec = spec
        self.encoder = Linear(f_in, spec.encoder_width, rng)
        self.layers = []
        width = spec.encoder_width
        for _ in range(spec.graph_layers):
            if spec.kind == "gat":
                layer = GatLayer(width, spec.graph_width, spec.heads, rng,
                                 spec.leaky_slope, spec.head_agg)
            elif spec.kind == "gcn":
                layer = GcnLayer(width, spec.graph_width, rng)
            else:
                layer = Linear(width, spec.graph_width, rng)
            self.layers.append(layer)
            width = layer.out_width if spec.kind != "mlp" else spec.graph_width
        self.out_width = width

    def params(self, prefix):
        out = self.encoder.params(f"{prefix}.enc")
        for i, layer in enumerate(self.layers):
            out.update(layer.params(f"{prefix}.g{i}"))
        return out

    def forward(self, feats: np.ndarray, adj: np.ndarray) -> Tensor:
        h = self.encoder.forward(Tensor(feats)).relu()
        for layer in self.layers:
            if self.spec.kind == "mlp":
                h = layer.forward(h).relu()
            else:
                h = layer.forward(h, adj)
        return h


class LanePolicyNet:
    """Dueling Q-network over the lane-change graph: 3 discrete actions."""

    N_ACTIONS = 3  # commands -1, 0, +1

    def __init__(self, f_in, state_dim, spec: NetSpec, rng):
        self.stack = GraphStack(f_in, spec, rng)
        self.trunk = Linear(self.stack.out_width + state_dim, spec.trunk_width, rng)
        self.v_head = Linear(spec.trunk_width, 1, rng)
        self.d_head = Linear(spec.trunk_width, self.N_ACTIONS, rng)

    def params(self):
        out = self.stack.params("stack")
        out.update(self.trunk.params("trunk"))
        out.update(self.v_head.params("v"))
        out.update(self.d_head.params("d"))
        return out

    def forward(self, feats, adj, cav_rows, states) -> Tensor:
        h = self.stack.forward(feats, adj)
        emb = h.gather_rows(cav_rows)
        x = self.trunk.forward(concat([emb, Tensor(states)], axis=1)).relu()
        return dueling_q(x, self.v_head, self.d_head)


class ActorNet:
    """Deterministic policy over the following graph, bounded output."""

    def __init__(self, f_in, state_dim, spec: NetSpec, rng,
                 a_lo=A_DEC, a_hi=A_ACC):
        self.stack = GraphStack(f_in, spec, rng)
        self.trunk = Linear(self.stack.out_width + state_dim, spec.trunk_width, rng)
        self.head = Linear(spec.trunk_width, 1, rng)
        self.center = 0.5 * (a_hi + a_lo)
        self.half_range = 0.5 * (a_hi - a_lo)

    def params(self):
        out = self.stack.params("stack")
        out.update(self.trunk.params("trunk"))
        out.update(self.head.params("head"))
        return out

    def forward(self, feats, adj, cav_rows, states) -> Tensor:
        h = self.stack.forward(feats, adj)
        emb = h.gather_rows(cav_rows)
        x = self.trunk.forward(concat([emb, Tensor(states)], axis=1)).relu()
        return self.head.forward(x).tanh() * self.half_range + self.center


class CriticNet:
    """Action-value network; action joins the trunk input, trunk is wider."""

    def __init__(self, f_in, state_dim, spec: NetSpec, rng):
        self.stack = GraphStack(f_in, spec, rng)
        self.trunk = Linear(self.stack.out_width + state_dim + 1,
                            spec.critic_trunk_width, rng)
        self.head = Linear(spec.critic_trunk_width, 1, rng)

    def params(self):
        out = self.stack.params("stack")
        out.update(self.trunk.params("trunk"))
        out.update(self.head.params("head"))
        return out

    def forward(self, feats, adj, cav_rows, states, actions) -> Tensor:
        h = self.stack.forward(feats, adj)
        emb = h.gather_rows(cav_rows)
        if isinstance(actions, Tensor):
            x = concat([emb, Tensor(states), actions], axis=1)
        else:
            x = concat([emb, Tensor(states), Tensor(actions)], axis=1)
        return self.head.forward(self.trunk.forward(x).relu())


# -- parameter-space utilities ----------------------------------------------

def clone_params(params: dict) -> dict:
    return {k: Tensor(v.data.copy(), requires_grad=True)
            for k, v in params.items()}


def copy_into(dst: dict, src: dict) -> None:
    for k in dst:
        dst[k].data[...] = src[k].data


def soft_update(target: dict, online: dict, tau: float) -> None:
    """target <- (1 - tau) * target + tau * online, elementwise."""
    for k in target:
        target[k].data *= (1.0 - tau)
        target[k].data += tau * online[k].data


class Adam:
    def __init__(self, params: dict, lr: float, beta1=0.9, beta2=0.999,
                 eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def step(self):
        """One update from the gradients currently stored on the params."""
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            m_hat = self.m[k] / b1t
            v_hat = self.v[k] / b2t
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


PARAM_FORMAT_VERSION = "1"


def save_params(path, params: dict) -> None:
    arrays = {k: p.data for k, p in params.items()}
    np.savez(path, __format_version__=PARAM_FORMAT_VERSION, **arrays)


def load_params(path) -> dict:
    with np.load(path) as data:
        version = str(data["__format_version__"])
        if version != PARAM_FORMAT_VERSION:
            raise ValueError(f"unsupported parameter file version {version}")
        return {k: Tensor(data[k].copy(), requires_grad=True)
                for k in data.files if k != "__format_version__"}
