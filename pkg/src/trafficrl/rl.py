"""Hierarchical agents and the asynchronous training loop.

The lane-change dimension learns with a dueling double Q-network under an
exponentially decaying epsilon-greedy policy; the following dimension learns
with a deterministic policy gradient actor/critic under exponentially
decaying Gaussian action noise.  Both store per-CAV transitions in their own
replay buffers and update on fixed tick cadences, the lane-change dimension
acting once every delta fine ticks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import env as env_mod
from . import nets, sim
from .autodiff import Tensor


@dataclass(frozen=True)
class ExploreSchedule:
    eps0: float
    epsT: float
    T: int

    def __post_init__(self):
        if not (0.0 < self.epsT < self.eps0 <= 1.0):
            raise ValueError("need 0 < epsT < eps0 <= 1")
        if self.T <= 0:
            raise ValueError("T must be positive")


def epsilon_at(t: int, schedule: ExploreSchedule) -> float:
    """Geometric decay from eps0 to epsT over T steps, held afterwards."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if t >= schedule.T:
        return schedule.epsT
    return schedule.eps0 * math.exp(
        math.log(schedule.epsT / schedule.eps0) * t / schedule.T)


@dataclass
class TrainConfig:
    gamma: float = 0.99
    lr_l: float = 0.00075
    lr_critic: float = 0.0001
    lr_actor: float = 0.000025
    online_interval_l: int = 100  # gradient-step cadence in fine ticks
    online_interval_f: int = 200
    target_interval_l: int = 400  # target-sync cadence in fine ticks
    target_interval_f: int = 800
    tau_l: float = 0.01
    tau_f: float = 0.005
    batch_l: int = 64
    batch_f: int = 64
    buffer_l: int = 20000
    buffer_f: int = 100000
    warmup_batches: int = 10
    episodes: int = 100
    seed: int = 0
    explore_l: ExploreSchedule = field(
        default_factory=lambda: ExploreSchedule(0.6, 0.02, 140000))
    explore_f: ExploreSchedule = field(
        default_factory=lambda: ExploreSchedule(0.5, 0.05, 700000))

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        for name in ("online_interval_l", "online_interval_f",
                     "target_interval_l", "target_interval_f"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class Transition:
    feats: np.ndarray
    adj: np.ndarray
    row: int
    state: np.ndarray
    action: float  # L: command in {-1,0,1}; F: acceleration
    reward: float
    next_feats: np.ndarray
    next_adj: np.ndarray
    next_row: int
    next_state: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Uniform ring buffer; batches sample without replacement."""

    def __init__(self, capacity: int, rng: np.random.Generator):
        self.capacity = capacity
        self.rng = rng
        self._store: list[Transition] = []
        self._next = 0

    def __len__(self):
        return len(self._store)

    def add(self, transition: Transition):
        if len(self._store) < self.capacity:
            self._store.append(transition)
        else:
            self._store[self._next] = transition
            self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int) -> list[Transition]:
        if batch_size > len(self._store):
            raise ValueError("cannot sample more transitions than stored")
        idx = self.rng.choice(len(self._store), size=batch_size, replace=False)
        return [self._store[i] for i in idx]


def batch_graphs(transitions, use_next=False):
    """Stack per-transition graphs block-diagonally for one forward pass."""
    feats, adjs, rows, states = [], [], [], []
    offset = 0
    for tr in transitions:
        f = tr.next_feats if use_next else tr.feats
        a = tr.next_adj if use_next else tr.adj
        r = tr.next_row if use_next else tr.row
        s = tr.next_state if use_next else tr.state
        feats.append(f)
        adjs.append(a)
        rows.append(offset + r)
        states.append(s)
        offset += f.shape[0]
    big_adj = np.zeros((offset, offset))
    at = 0
    for a in adjs:
        n = a.shape[0]
        big_adj[at:at + n, at:at + n] = a
        at += n
    return (np.concatenate(feats, axis=0), big_adj, np.array(rows),
            np.stack(states))


CMD_ORDER = (-1, 0, 1)  # action index 0, 1, 2


def select_action_l(q_values: np.ndarray, eps: float,
                    rng: np.random.Generator) -> int:
    """Epsilon-greedy lane command from a length-3 Q row."""
    if rng.random() < eps:
        return CMD_ORDER[rng.integers(3)]
    return CMD_ORDER[int(np.argmax(q_values))]


def select_action_f(mu: float, sigma: float, rng: np.random.Generator,
                    a_lo=sim.A_DEC, a_hi=sim.A_ACC) -> float:
    """Clipped Gaussian-perturbed deterministic action."""
    a = mu + (rng.normal(0.0, sigma) if sigma > 0 else 0.0)
    return float(np.clip(a, a_lo, a_hi))


def double_q_target(q_next_online: np.ndarray, q_next_target: np.ndarray,
                    rewards: np.ndarray, gamma: float,
                    terminal: np.ndarray) -> np.ndarray:
    """y = r + gamma * (1 - d) * Q_target(g', argmax_a Q_online(g', a))."""
    a_star = np.argmax(q_next_online, axis=1)
    boot = q_next_target[np.arange(q_next_target.shape[0]), a_star][:, None]
    return rewards + gamma * (1.0 - terminal) * boot


def dpg_critic_target(q_next_target: np.ndarray, rewards: np.ndarray,
                      gamma: float, terminal: np.ndarray) -> np.ndarray:
    """Bootstrap at the target actor's action (already evaluated)."""
    return rewards + gamma * (1.0 - terminal) * q_next_target


def _selected_q(q: Tensor, actions) -> Tensor:
    onehot = np.zeros(q.shape)
    for i, a in enumerate(actions):
        onehot[i, CMD_ORDER.index(int(a))] = 1.0
    return (q * Tensor(onehot)).sum(axis=1, keepdims=True)


def learn_l(batch, online: nets.LanePolicyNet, target: nets.LanePolicyNet,
            optimizer: nets.Adam, gamma: float) -> float:
    """Double-Q dueling update; returns the TD loss."""
    if not batch:
        return 0.0
    feats, adj, rows, states = batch_graphs(batch)
    nfeats, nadj, nrows, nstates = batch_graphs(batch, use_next=True)
    rewards = np.array([[tr.reward] for tr in batch])
    term = np.array([[1.0 if tr.terminal else 0.0] for tr in batch])

    # next action from the online net, valued by the target net
    q_next_online = online.forward(nfeats, nadj, nrows, nstates).data
    q_next_target = target.forward(nfeats, nadj, nrows, nstates).data
    y = double_q_target(q_next_online, q_next_target, rewards, gamma, term)

    q = online.forward(feats, adj, rows, states)
    q_taken = _selected_q(q, [tr.action for tr in batch])
    delta = q_taken - Tensor(y)
    loss = delta.square().mean()
    loss.backward()
    optimizer.step()
    return float(loss.data)


def learn_f(batch, actor: nets.ActorNet, critic: nets.CriticNet,
            actor_target: nets.ActorNet, critic_target: nets.CriticNet,
            opt_actor: nets.Adam, opt_critic: nets.Adam,
            gamma: float) -> tuple[float, float]:
    """DPG update; returns (critic loss, actor objective)."""
    if not batch:
        return 0.0, 0.0
    feats, adj, rows, states = batch_graphs(batch)
    nfeats, nadj, nrows, nstates = batch_graphs(batch, use_next=True)
    rewards = np.array([[tr.reward] for tr in batch])
    term = np.array([[1.0 if tr.terminal else 0.0] for tr in batch])
    actions = np.array([[tr.action] for tr in batch])

    # bootstrap with the target actor's deterministic action
    mu_next = actor_target.forward(nfeats, nadj, nrows, nstates).data
    q_next = critic_target.forward(nfeats, nadj, nrows, nstates, mu_next).data
    y = dpg_critic_target(q_next, rewards, gamma, term)

    q = critic.forward(feats, adj, rows, states, actions)
    critic_loss = (q - Tensor(y)).square().mean()
    critic_loss.backward()
    opt_critic.step()

    mu = actor.forward(feats, adj, rows, states)
    q_of_mu = critic.forward(feats, adj, rows, states, mu)
    actor_obj = q_of_mu.mean()
    neg = actor_obj * -1.0
    neg.backward()
    opt_actor.step()
    return float(critic_loss.data), float(actor_obj.data)


@dataclass
class EpisodeLog:
    episode: int
    l_reward: float  # mean per L decision (summed over CAVs)
    f_reward: float  # mean per F tick (summed over CAVs)
    eps: float
    sigma: float
    loss_l: float
    loss_critic: float
    actor_obj: float
    successes: int
    cavs: int
    collisions: int
    l_decisions: int
    f_decisions: int


class HierarchicalTrainer:
    """Owns networks, buffers and the two-timescale loop."""

    def __init__(self, env_factory, cfg: TrainConfig,
                 spec: nets.NetSpec | None = None):
        self.env_factory = env_factory
        self.cfg = cfg
        self.spec = spec or nets.NetSpec()
        rng = np.random.default_rng(cfg.seed)
        self.rng = rng
        # feature widths are fixed by the graph schema: L rows carry 4
        # columns, F rows 5
        self.q_net = nets.LanePolicyNet(4, env_mod.STATE_DIM_L, self.spec, rng)
        self.q_target = nets.LanePolicyNet(4, env_mod.STATE_DIM_L, self.spec, rng)
        nets.copy_into(self.q_target.params(), self.q_net.params())
        self.actor = nets.ActorNet(5, env_mod.STATE_DIM_F, self.spec, rng)
        self.actor_target = nets.ActorNet(5, env_mod.STATE_DIM_F, self.spec, rng)
        nets.copy_into(self.actor_target.params(), self.actor.params())
        self.critic = nets.CriticNet(5, env_mod.STATE_DIM_F, self.spec, rng)
        self.critic_target = nets.CriticNet(5, env_mod.STATE_DIM_F, self.spec, rng)
        nets.copy_into(self.critic_target.params(), self.critic.params())
        self.opt_l = nets.Adam(self.q_net.params(), cfg.lr_l)
        self.opt_actor = nets.Adam(self.actor.params(), cfg.lr_actor)
        self.opt_critic = nets.Adam(self.critic.params(), cfg.lr_critic)
        self.buffer_l = ReplayBuffer(cfg.buffer_l, np.random.default_rng(
            rng.integers(2 ** 63)))
        self.buffer_f = ReplayBuffer(cfg.buffer_f, np.random.default_rng(
            rng.integers(2 ** 63)))
        self.global_f_ticks = 0
        self.global_l_ticks = 0

    # -- per-CAV encodings ---------------------------------------------------

    @staticmethod
    def _encode(obs: env_mod.GraphObservation, cav_id: int):
        feats = obs.features.rows
        adj = obs.adjacency.weights
        row = obs.adjacency.index_of(cav_id)
        state = obs.state_vectors[cav_id]
        return feats, adj, row, state

    def q_values(self, obs, cav_id) -> np.ndarray:
        feats, adj, row, state = self._encode(obs, cav_id)
        return self.q_net.forward(feats, adj, np.array([row]),
                                  state[None, :]).data[0]

    def mu_value(self, obs, cav_id) -> float:
        feats, adj, row, state = self._encode(obs, cav_id)
        return float(self.actor.forward(feats, adj, np.array([row]),
                                        state[None, :]).data[0, 0])

    # -- training ------------------------------------------------------------

    def _maybe_learn(self) -> tuple[float, float, float]:
        cfg = self.cfg
        loss_l = loss_c = obj_a = 0.0
        if (self.global_f_ticks % cfg.online_interval_l == 0
                and len(self.buffer_l) >= cfg.warmup_batches * cfg.batch_l):
            loss_l = learn_l(self.buffer_l.sample(cfg.batch_l), self.q_net,
                             self.q_target, self.opt_l, cfg.gamma)
        if (self.global_f_ticks % cfg.online_interval_f == 0
                and len(self.buffer_f) >= cfg.warmup_batches * cfg.batch_f):
            loss_c, obj_a = learn_f(
                self.buffer_f.sample(cfg.batch_f), self.actor, self.critic,
                self.actor_target, self.critic_target, self.opt_actor,
                self.opt_critic, cfg.gamma)
        if self.global_f_ticks % cfg.target_interval_l == 0:
            nets.soft_update(self.q_target.params(), self.q_net.params(),
                             cfg.tau_l)
        if self.global_f_ticks % cfg.target_interval_f == 0:
            nets.soft_update(self.actor_target.params(), self.actor.params(),
                             cfg.tau_f)
        for v in (loss_l, loss_c, obj_a):
            if not math.isfinite(v):
                raise RuntimeError(
                    f"non-finite training loss at tick {self.global_f_ticks}: "
                    f"L={loss_l} critic={loss_c} actor={obj_a}")
        return loss_l, loss_c, obj_a

    def run_episode(self, episode: int, learn: bool = True,
                    greedy: bool = False, trajectory: list | None = None
                    ) -> EpisodeLog:
        cfg = self.cfg
        env = self.env_factory(cfg.seed * 100003 + episode)
        delta = env.delta
        pending_l: dict[int, tuple] = {}
        pending_f: dict[int, tuple] = {}
        last_rewards_f: dict[int, env_mod.RewardBreakdown] = {}
        last_rewards_l = None
        last_info = {"resolved": {}}
        sum_l = sum_f = 0.0
        n_l = n_f = 0
        losses_l, losses_c, objs_a = [], [], []
        collisions = 0
        eps = sigma = 0.0

        while not env.done():
            is_l = env.is_l_tick()
            if is_l:
                obs_l = env.observe(env_mod.DIM_L)
                # close out the previous delta interval; CAVs resolved
                # mid-interval are re-scored now so that collision
                # penalties reach the lane agent regardless of when in
                # the interval the collision happened
                for cid, (f, a, r, s, act) in list(pending_l.items()):
                    rb = last_rewards_l.get(cid) if last_rewards_l else None
                    if rb is None or cid not in obs_l.state_vectors:
                        rb = env.reward_lane_change(env.sim.get(cid))
                    reward = rb.total
                    terminal = cid not in obs_l.state_vectors
                    nxt = (self._encode(obs_l, cid) if not terminal
                           else (f, a, r, s))
                    if learn:
                        self.buffer_l.add(Transition(
                            f, a, r, s, act, reward, nxt[0], nxt[1], nxt[2],
                            nxt[3], terminal))
                    sum_l += reward
                    n_l += 1
                    del pending_l[cid]
                # choose new lane commands
                eps = 0.0 if greedy else epsilon_at(self.global_l_ticks,
                                                    cfg.explore_l)
                actions_l = {}
                for cid in obs_l.state_vectors:
                    q = self.q_values(obs_l, cid)
                    actions_l[cid] = select_action_l(q, eps, self.rng)
                    pending_l[cid] = (*self._encode(obs_l, cid),
                                      actions_l[cid])
                # the chosen command enters the F observation of this tick
                env.last_l_actions.update(actions_l)
                self.global_l_ticks += 1
            else:
                actions_l = None

            obs_f = env.observe(env_mod.DIM_F)
            for cid, (f, a, r, s, act) in list(pending_f.items()):
                rb = last_rewards_f.get(cid)
                reward = rb.total if rb is not None else 0.0
                terminal = cid not in obs_f.state_vectors
                nxt = (self._encode(obs_f, cid) if not terminal
                       else (f, a, r, s))
                if learn:
                    self.buffer_f.add(Transition(
                        f, a, r, s, act, reward, nxt[0], nxt[1], nxt[2],
                        nxt[3], terminal))
                sum_f += reward
                n_f += 1
                del pending_f[cid]

            sigma = 0.0 if greedy else epsilon_at(self.global_f_ticks,
                                                  cfg.explore_f)
            actions_f = {}
            for cid in obs_f.state_vectors:
                mu = self.mu_value(obs_f, cid)
                actions_f[cid] = select_action_f(mu, sigma, self.rng)
                pending_f[cid] = (*self._encode(obs_f, cid), actions_f[cid])

            if trajectory is not None:
                self._record(trajectory, env, actions_f)

            rewards_f, rewards_l, done, info = env.step(actions_f, actions_l)
            last_rewards_f = rewards_f
            if rewards_l is not None:
                last_rewards_l = rewards_l
            last_info = info
            collisions += len(info["collisions"])
            self.global_f_ticks += 1
            if learn:
                ll, lc, oa = self._maybe_learn()
                if ll:
                    losses_l.append(ll)
                if lc:
                    losses_c.append(lc)
                if oa:
                    objs_a.append(oa)

        # terminal flush: remaining pending transitions end the episode
        for cid, (f, a, r, s, act) in pending_f.items():
            rb = last_rewards_f.get(cid)
            reward = rb.total if rb is not None else 0.0
            if learn:
                self.buffer_f.add(Transition(f, a, r, s, act, reward,
                                             f, a, r, s, True))
            sum_f += reward
            n_f += 1
        for cid, (f, a, r, s, act) in pending_l.items():
            # re-score at flush so resolved CAVs carry their outcome
            reward = env.reward_lane_change(env.sim.get(cid)).total
            if learn:
                self.buffer_l.add(Transition(f, a, r, s, act, reward,
                                             f, a, r, s, True))
            sum_l += reward
            n_l += 1

        outcomes = env.sim.outcomes
        self.last_env = env
        return EpisodeLog(
            episode=episode,
            l_reward=sum_l / max(n_l, 1),
            f_reward=sum_f / max(n_f, 1),
            eps=eps, sigma=sigma,
            loss_l=float(np.mean(losses_l)) if losses_l else 0.0,
            loss_critic=float(np.mean(losses_c)) if losses_c else 0.0,
            actor_obj=float(np.mean(objs_a)) if objs_a else 0.0,
            successes=sum(1 for o in outcomes.values() if o == sim.SUCCESS),
            cavs=len(outcomes),
            collisions=collisions,
            l_decisions=n_l, f_decisions=n_f)

    @staticmethod
    def _record(trajectory, env, actions_f):
        for v in env.sim.active_vehicles():
            trajectory.append({
                "tick": env.sim.tick,
                "time_s": env.sim.clock,
                "vehicle_id": v.id,
                "kind": v.kind,
                "lane": v.lane,
                "pos_m": v.pos,
                "speed_mps": v.speed,
                "accel_mps2": actions_f.get(v.id, v.accel)
                if v.kind == sim.CAV else v.accel,
                "last_l_cmd": env.last_l_actions.get(v.id, 0)
                if v.kind == sim.CAV else 0,
            })

    def train(self, episodes: int | None = None,
              callback=None) -> list[EpisodeLog]:
        logs = []
        for ep in range(episodes if episodes is not None else self.cfg.episodes):
            log = self.run_episode(ep, learn=True, greedy=False)
            logs.append(log)
            if callback is not None:
                callback(log)
        return logs

    def save(self, path) -> None:
        merged = {}
        for prefix, net in (("q", self.q_net), ("q_targ", self.q_target),
                            ("actor", self.actor),
                            ("actor_targ", self.actor_target),
                            ("critic", self.critic),
                            ("critic_targ", self.critic_target)):
            for k, p in net.params().items():
                merged[f"{prefix}/{k}"] = p
        nets.save_params(path, merged)

    def load(self, path) -> None:
        merged = nets.load_params(path)
        for prefix, net in (("q", self.q_net), ("q_targ", self.q_target),
                            ("actor", self.actor),
                            ("actor_targ", self.actor_target),
                            ("critic", self.critic),
                            ("critic_targ", self.critic_target)):
            subset = {k[len(prefix) + 1:]: v for k, v in merged.items()
                      if k.startswith(prefix + "/")}
            nets.copy_into(net.params(), subset)

    def evaluate(self, episodes: int, start_episode: int = 10 ** 6,
                 trajectory: list | None = None) -> list[EpisodeLog]:
        """Greedy, noise-free rollouts without learning."""
        return [self.run_episode(start_episode + i, learn=False, greedy=True,
                                 trajectory=trajectory)
                for i in range(episodes)]
