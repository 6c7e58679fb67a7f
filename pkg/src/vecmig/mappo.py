"""Multi-agent PPO with a shared actor, a per-action critic head, and
counterfactual advantages, plus the four non-learning baselines.

All agents share one actor and one critic and act on local observations
only (centralized training, decentralized execution).  The critic
predicts one value per action; the state value is the policy-weighted
mean of those heads, and an action's advantage is its head minus the
uniform mean over heads, so per-observation advantages always sum to
zero.

Training is on-policy: each iteration's trajectories form the update
minibatches, while the replay buffer retains transitions for
diagnostics.  Everything is a pure function of ``(config, seed)``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import seeding
from .config import ExperimentConfig
from .env import MigrationEnv, SlotRecord
from .nets import (
    NetworkParams,
    OptimizerState,
    as_tensors,
    entropy,
    forward,
    forward_tape,
    gradient,
    init_network,
    optimizer_step,
    policy_distribution,
)

BASELINE_KINDS = ("random", "greedy", "full_premigration", "no_premigration")


@dataclass(frozen=True)
class Transition:
    """One agent-slot experience record."""

    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    old_prob: float


class ReplayBuffer:
    """Bounded FIFO store of transitions; eviction is oldest-first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("buffer capacity must be >= 1")
        self.capacity = capacity
        self._items: deque[Transition] = deque(maxlen=capacity)

    def append(self, transition: Transition) -> None:
        self._items.append(transition)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)


@dataclass
class Batch:
    obs: np.ndarray          # (n, obs_dim)
    actions: np.ndarray      # (n,) int
    old_probs: np.ndarray    # (n,)
    returns: np.ndarray      # (n,) value regression targets
    advantages: np.ndarray   # (n,)
    rewards: np.ndarray | None = None    # (n,) scaled immediate rewards
    next_obs: np.ndarray | None = None   # (n, obs_dim)
    terminal: np.ndarray | None = None   # (n,) bool, episode-final slot

    def take(self, index: np.ndarray) -> "Batch":
        def pick(a):
            return None if a is None else a[index]

        return Batch(self.obs[index], self.actions[index], self.old_probs[index],
                     self.returns[index], self.advantages[index],
                     pick(self.rewards), pick(self.next_obs), pick(self.terminal))

    def __len__(self) -> int:
        return self.obs.shape[0]


@dataclass(frozen=True)
class LossReport:
    clip: float
    value: float
    entropy: float
    total: float


@dataclass
class TrainResult:
    actor: NetworkParams
    critic: NetworkParams
    episode_metrics: list[dict]
    buffer: ReplayBuffer
    evaluations: list[dict] = field(default_factory=list)


@dataclass(frozen=True)
class EvalResult:
    mean_reward: float
    mean_latency: float
    per_episode: tuple[tuple[float, float], ...]
    records: tuple[tuple[SlotRecord, ...], ...] = ()


# -- value heads, advantages, and the clipped surrogate ---------------------


def q_and_v(critic: NetworkParams, actor: NetworkParams, obs: np.ndarray
            ) -> tuple[np.ndarray, np.ndarray]:
    """Per-action values and the policy-weighted state value."""
    q = forward(critic, obs)
    probs = policy_distribution(forward(actor, obs))
    v = (probs * q).sum(axis=-1)
    return q, v


def advantage(q_values: np.ndarray) -> np.ndarray:
    """Counterfactual advantage per action: head minus mean over heads."""
    q = np.asarray(q_values, dtype=np.float64)
    return q - q.mean(axis=-1, keepdims=True)


def ratio_and_clip(new_prob: float, old_prob: float, eps: float
                   ) -> tuple[float, float]:
    """Policy ratio and its clipped value."""
    if old_prob <= 0.0:
        raise ValueError("degenerate stored probability; ratios need old_prob > 0")
    r = new_prob / old_prob
    if r < 1.0 - eps:
        clipped = 1.0 - eps
    elif r > 1.0 + eps:
        clipped = 1.0 + eps
    else:
        clipped = r
    return r, clipped


def clipped_surrogate(ratios: np.ndarray, advantages: np.ndarray, eps: float) -> float:
    """Mean of min(r * A, clip(r) * A) over the batch."""
    r = np.asarray(ratios, dtype=np.float64)
    a = np.asarray(advantages, dtype=np.float64)
    clipped = np.clip(r, 1.0 - eps, 1.0 + eps)
    return float(np.minimum(r * a, clipped * a).mean())


def discounted_returns(rewards: np.ndarray, discount: float) -> np.ndarray:
    """Return-to-go at every step of a reward sequence."""
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + discount * acc
        out[t] = acc
    return out


def ppo_losses(batch: Batch, actor: NetworkParams, critic: NetworkParams,
               hyper) -> LossReport:
    """Diagnostic loss scalars for a batch under the current networks.

    ``total`` composes the value loss, the clipped surrogate, and the
    entropy bonus with the value and entropy coefficients; the trainer
    ascends surrogate-plus-entropy and descends the value loss.
    """
    probs = policy_distribution(forward(actor, batch.obs))
    floor = hyper.exploration_floor
    behavior = (1.0 - floor) * probs + floor / probs.shape[1]
    new_p = np.maximum(behavior[np.arange(len(batch)), batch.actions],
                       hyper.prob_floor)
    if (batch.old_probs <= 0.0).any():
        raise ValueError("degenerate stored probability in batch")
    ratios = new_p / batch.old_probs
    l_clip = clipped_surrogate(ratios, batch.advantages, hyper.clip)
    q = forward(critic, batch.obs)
    v = (probs * q).sum(axis=-1)
    if not np.isfinite(v).all():
        bad = int(np.flatnonzero(~np.isfinite(v))[0])
        raise FloatingPointError(f"non-finite value estimate at sample {bad}")
    l_value = float(((v - batch.returns) ** 2).mean())
    h = entropy(probs)
    total = hyper.value_coef * l_value + l_clip - hyper.entropy_coef * h
    return LossReport(clip=l_clip, value=l_value, entropy=h, total=total)


# -- tape graphs for the updates and the gradient acceptance ----------------


def _mixture_prob_graph(logp_a: ad.Tensor, hyper, n_actions: int) -> ad.Tensor:
    """Behavior-policy probability of the taken action on the tape."""
    floor = hyper.exploration_floor
    pure = ad.exp(logp_a)
    if floor == 0.0:
        return pure
    return ad.add(ad.mul(pure, ad.Tensor(1.0 - floor)),
                  ad.Tensor(floor / n_actions))


def actor_objective_graph(batch: Batch, actor_layers, hyper) -> ad.Tensor:
    """Surrogate plus entropy bonus as a tape scalar (to be ascended).

    Ratios compare behavior-policy probabilities (exploration floor
    included on both sides) so they converge to one; the entropy bonus
    regularizes the pure policy.
    """
    logits = forward_tape(actor_layers, batch.obs)
    logp = ad.log_softmax(logits)
    logp_a = ad.gather_rows(logp, batch.actions)
    n_actions = logits.shape[1]
    new_probs = _mixture_prob_graph(logp_a, hyper, n_actions)
    ratios = ad.exp(ad.sub(ad.log(new_probs), ad.Tensor(np.log(batch.old_probs))))
    adv = ad.Tensor(batch.advantages)
    surr = ad.minimum(ad.mul(ratios, adv),
                      ad.mul(ad.clip(ratios, 1.0 - hyper.clip, 1.0 + hyper.clip), adv))
    probs = ad.exp(logp)
    ent = ad.mean_all(ad.mul(ad.sum_axis(ad.mul(probs, logp), 1), ad.Tensor(-1.0)))
    return ad.add(ad.mean_all(surr), ad.mul(ent, ad.Tensor(hyper.entropy_coef)))


def critic_loss_graph(batch: Batch, critic_layers, policy_probs: np.ndarray) -> ad.Tensor:
    """Critic training loss: value regression plus head grounding.

    The policy-weighted value must match the observed return, and so
    must the head of the action actually taken; the second term is what
    makes the per-action heads identifiable (without it every head
    receives the same error signal and the counterfactual advantages
    carry no information).
    """
    q = forward_tape(critic_layers, batch.obs)
    v = ad.sum_axis(ad.mul(q, ad.Tensor(policy_probs)), 1)
    targets = ad.Tensor(batch.returns)
    v_diff = ad.sub(v, targets)
    q_taken = ad.gather_rows(q, batch.actions)
    q_diff = ad.sub(q_taken, targets)
    return ad.add(ad.mean_all(ad.mul(v_diff, v_diff)),
                  ad.mean_all(ad.mul(q_diff, q_diff)))


def total_loss_graph(batch: Batch, actor_layers, critic_layers, hyper) -> ad.Tensor:
    """The composite training loss over both networks as one tape scalar.

    Used by the gradient acceptance check; the live policy feeds both
    the surrogate and the value heads' weighting.
    """
    logits = forward_tape(actor_layers, batch.obs)
    logp = ad.log_softmax(logits)
    logp_a = ad.gather_rows(logp, batch.actions)
    new_probs = _mixture_prob_graph(logp_a, hyper, logits.shape[1])
    ratios = ad.exp(ad.sub(ad.log(new_probs), ad.Tensor(np.log(batch.old_probs))))
    adv = ad.Tensor(batch.advantages)
    surr = ad.mean_all(
        ad.minimum(ad.mul(ratios, adv),
                   ad.mul(ad.clip(ratios, 1.0 - hyper.clip, 1.0 + hyper.clip), adv))
    )
    probs = ad.exp(logp)
    ent = ad.mean_all(ad.mul(ad.sum_axis(ad.mul(probs, logp), 1), ad.Tensor(-1.0)))
    q = forward_tape(critic_layers, batch.obs)
    v = ad.sum_axis(ad.mul(q, probs), 1)
    diff = ad.sub(v, ad.Tensor(batch.returns))
    l_value = ad.mean_all(ad.mul(diff, diff))
    return ad.add(
        ad.sub(ad.mul(l_value, ad.Tensor(hyper.value_coef)), ad.mul(ent, ad.Tensor(hyper.entropy_coef))),
        surr,
    )


# -- policies ----------------------------------------------------------------


def learned_policy(actor: NetworkParams, *, explore_rng=None, prob_floor=1e-8):
    """Policy over observation rows; greedy argmax unless exploring."""

    def policy(obs: np.ndarray, env) -> np.ndarray:
        probs = policy_distribution(forward(actor, obs))
        if explore_rng is None:
            return probs.argmax(axis=-1)
        cdf = probs.cumsum(axis=-1)
        draws = explore_rng.random(size=(obs.shape[0], 1))
        return (draws > cdf).sum(axis=-1)

    return policy


def _estimate_latency(x, size, statics, loads_cur, loads_next, cur_idx, nxt_idx,
                      gamma, sigma):
    """Myopic analytic latency under nominal (unattacked) link quality."""
    from .world import (
        ChannelParams, channel_gain, link_rate, ring_distance,
        MB_TO_BITS, MB_TO_MEGABITS,
    )

    channel: ChannelParams = statics.channel

    def rate(rsu_idx, bandwidth):
        pos = statics.rsu_positions[rsu_idx]
        d = max(ring_distance((x, 0.0), pos, statics.road_length), 1.0)
        return link_rate(channel_gain(d, channel), statics.transmit_power,
                         statics.noise_power, bandwidth)

    mig_size = sigma * size if gamma == 1 else 0.0
    up = statics.upload_size * MB_TO_BITS / rate(cur_idx, channel.uplink_bandwidth)
    cap_cur = statics.compute_capacities[cur_idx]
    proc_cur = (loads_cur + size - mig_size) / cap_cur
    down = (size - mig_size) * MB_TO_BITS / rate(cur_idx, channel.downlink_bandwidth)
    if gamma == 1:
        mig = mig_size * MB_TO_MEGABITS / statics.inter_bandwidths[nxt_idx]
        cap_next = statics.compute_capacities[nxt_idx]
        proc_next = (loads_next + mig_size) / cap_next
        proc_total = proc_cur if proc_cur < proc_next else proc_next + mig
        down += mig_size * MB_TO_BITS / rate(nxt_idx, channel.downlink_bandwidth)
    else:
        proc_total = proc_cur
    return up + proc_total + down


def _action_sigmas(env) -> list[tuple[int, int, float]]:
    """(action index, gamma, sigma) for every action the env accepts."""
    levels = env.config.ppo.sigma_levels
    if levels is None:
        return [(0, 0, env.config.ppo.sigma), (1, 1, env.config.ppo.sigma)]
    return [(i, 1 if s > 0.0 else 0, s) for i, s in enumerate(levels)]


def greedy_policy():
    """Pick the action minimizing the vehicle's own analytic latency this
    slot, from observed loads and nominal link quality (attack-blind)."""

    def policy(obs: np.ndarray, env) -> np.ndarray:
        statics = env.statics()
        positions = np.asarray(statics.rsu_positions)
        actions = np.zeros(obs.shape[0], dtype=int)
        choices = _action_sigmas(env)
        road = statics.road_length
        for i, row in enumerate(obs):
            x = row[0] * statics.road_length
            load_cur = row[2] * statics.max_load
            load_next = row[3] * statics.max_load
            dx = np.abs(x - positions[:, 0]) % road
            dx = np.minimum(dx, road - dx)
            dists = np.hypot(dx, positions[:, 1])
            cur = int(dists.argmin())
            gaps = (positions[:, 0] - x) % statics.road_length
            gaps[cur] = np.inf
            nxt = int(gaps.argmin())
            size = statics.agent_sizes[i]
            best_action, best_latency = 0, np.inf
            for index, gamma, sigma in choices:
                estimate = _estimate_latency(x, size, statics, load_cur, load_next,
                                             cur, nxt, gamma=gamma, sigma=sigma)
                if estimate < best_latency:
                    best_action, best_latency = index, estimate
            actions[i] = best_action
        return actions

    return policy


def baseline_policy(kind: str, seed: int = 0):
    """The four non-learning baselines."""
    if kind == "random":
        rng = np.random.Generator(np.random.PCG64(seed))
        return lambda obs, env: rng.integers(0, env.action_count, size=obs.shape[0])
    if kind == "greedy":
        return greedy_policy()
    if kind == "full_premigration":
        return lambda obs, env: np.full(obs.shape[0], env.action_count - 1, dtype=int)
    if kind == "no_premigration":
        return lambda obs, env: np.zeros(obs.shape[0], dtype=int)
    raise ValueError(f"unknown baseline {kind!r}; expected one of {BASELINE_KINDS}")


# -- training and evaluation --------------------------------------------------


def _collect_episode(env: MigrationEnv, actor: NetworkParams, episode: int,
                     explore_rng, hyper, buffer: ReplayBuffer
                     ) -> tuple[Batch, float, float]:
    """Roll one episode with the current policy; returns the flat batch
    (advantages unset), the mean slot reward, and the mean latency.

    The behavior policy mixes in a uniform exploration floor so every
    action keeps a minimum sampling probability; without it the
    unvisited critic heads go stale and their counterfactual
    advantages fossilize.  Stored probabilities are the mixture's, so
    the surrogate ratios stay consistent with the data distribution.
    """
    obs = env.reset(episode)
    n_agents = obs.shape[0]
    n_actions = env.action_count
    floor = hyper.exploration_floor
    all_obs, all_actions, all_probs = [], [], []
    slot_rewards = []
    latencies = []
    next_obs_rows: list[np.ndarray] = []
    while not env.done:
        probs = policy_distribution(forward(actor, obs))
        probs = (1.0 - floor) * probs + floor / n_actions
        cdf = probs.cumsum(axis=-1)
        draws = explore_rng.random(size=(n_agents, 1))
        actions = (draws > cdf).sum(axis=-1)
        taken = np.maximum(probs[np.arange(n_agents), actions], hyper.prob_floor)
        new_obs, reward, record = env.step(actions)
        all_obs.append(obs)
        all_actions.append(actions)
        all_probs.append(taken)
        next_obs_rows.append(new_obs)
        slot_rewards.append(reward)
        latencies.extend(v.latency.total for v in record.vehicles)
        obs = new_obs
    slots = len(slot_rewards)
    flat_obs = np.concatenate(all_obs, axis=0) if all_obs else np.zeros((0, 6))
    flat_actions = (np.concatenate(all_actions) if all_actions
                    else np.zeros(0, dtype=int))
    flat_probs = np.concatenate(all_probs) if all_probs else np.zeros(0)
    flat_next = (np.concatenate(next_obs_rows, axis=0) if next_obs_rows
                 else np.zeros((0, 6)))
    terminal = np.zeros(slots, dtype=bool)
    if slots:
        terminal[-1] = True
    flat_terminal = np.repeat(terminal, n_agents)
    for t in range(slots):
        for u in range(n_agents):
            buffer.append(Transition(
                obs=all_obs[t][u], action=int(all_actions[t][u]),
                reward=slot_rewards[t], next_obs=next_obs_rows[t][u],
                old_prob=float(all_probs[t][u]),
            ))
    batch = Batch(obs=flat_obs, actions=flat_actions, old_probs=flat_probs,
                  returns=np.zeros(len(flat_actions)),
                  advantages=np.zeros(len(flat_actions)),
                  rewards=np.zeros(len(flat_actions)), next_obs=flat_next,
                  terminal=flat_terminal)
    mean_reward = float(np.mean(slot_rewards)) if slot_rewards else 0.0
    mean_latency = float(np.mean(latencies)) if latencies else 0.0
    return batch, np.array(slot_rewards), mean_reward, mean_latency


def train(config: ExperimentConfig, seed: int, *, episodes: int | None = None,
          eval_hook=None) -> TrainResult:
    """Run the full training loop; deterministic given ``(config, seed)``.

    ``eval_hook(episode, actor)`` fires every ``ppo.eval_every``
    episodes (and once more at the end) so the harness can score the
    frozen policy on held-out episodes.
    """
    config.validate()
    hyper = config.ppo
    n_episodes = hyper.episodes if episodes is None else episodes
    env = MigrationEnv(config, seed)
    n_actions = env.action_count
    obs_dim = 6
    actor = init_network([obs_dim, *hyper.hidden, n_actions],
                         seeding.derive_seed(seed, "network_init:actor"))
    critic = init_network([obs_dim, *hyper.hidden, n_actions],
                          seeding.derive_seed(seed, "network_init:critic"))
    explore_rng = seeding.generator(seed, "exploration")
    shuffle_rng = seeding.generator(seed, "minibatch")
    buffer = ReplayBuffer(hyper.buffer_capacity)
    actor_opt = OptimizerState()
    critic_opt = OptimizerState()
    metrics: list[dict] = []
    evaluations: list[dict] = []

    reward_baseline: float | None = None
    recent: deque[Batch] = deque(maxlen=hyper.critic_window_episodes)

    def refresh_targets(data: Batch) -> None:
        if hyper.value_target == "td0":
            # One-step bootstrapped targets: the per-action credit lives
            # in the immediate reward, and bootstrapping strips the
            # cross-slot attack noise that drowns it in full-return
            # targets.
            _, v_next = q_and_v(critic, actor, data.next_obs)
            data.returns = data.rewards + hyper.discount * v_next * ~data.terminal

    def critic_pass(data: Batch) -> None:
        nonlocal critic, critic_opt
        order = shuffle_rng.permutation(len(data))
        for start in range(0, len(data), hyper.batch_size):
            mini = data.take(order[start : start + hyper.batch_size])
            probs_now = policy_distribution(forward(actor, mini.obs))
            critic_grads = gradient(
                lambda layers: critic_loss_graph(mini, layers, probs_now),
                critic,
            )
            critic, critic_opt = optimizer_step(
                critic, critic_grads, critic_opt, hyper.optimizer,
                learning_rate=hyper.learning_rate, ascend=False,
            )

    for episode in range(n_episodes):
        batch, slot_rewards, mean_reward, mean_latency = _collect_episode(
            env, actor, episode, explore_rng, hyper, buffer
        )
        if len(batch):
            # Rewards are centered on a slow-moving baseline and scaled
            # before regression: subtracting a constant shifts every
            # value head equally (advantages are unchanged) but keeps
            # the critic's targets near zero, where the small
            # interaction structure is learnable at the pinned rate.
            if reward_baseline is None:
                reward_baseline = float(slot_rewards.mean())
            centered = (slot_rewards - reward_baseline) * hyper.return_scale
            n_agents = len(env.state.vehicles)
            batch.rewards = np.repeat(centered, n_agents)
            reward_baseline = 0.95 * reward_baseline + 0.05 * float(slot_rewards.mean())
            if hyper.value_target == "return":
                batch.returns = np.repeat(
                    discounted_returns(centered, hyper.discount), n_agents
                )
            recent.append(batch)

            # The critic tracks targets over a window of recent episodes
            # before the actor moves: fitting one episode alone chases
            # that episode's attack pattern, and the actor then exploits
            # the transient head gaps it leaves behind.
            window = Batch(
                obs=np.concatenate([b.obs for b in recent]),
                actions=np.concatenate([b.actions for b in recent]),
                old_probs=np.concatenate([b.old_probs for b in recent]),
                returns=np.concatenate([b.returns for b in recent]),
                advantages=np.concatenate([b.advantages for b in recent]),
                rewards=np.concatenate([b.rewards for b in recent]),
                next_obs=np.concatenate([b.next_obs for b in recent]),
                terminal=np.concatenate([b.terminal for b in recent]),
            )
            for _ in range(hyper.critic_warmup_epochs):
                refresh_targets(window)
                critic_pass(window)

            refresh_targets(batch)
            q = forward(critic, batch.obs)
            adv_all = advantage(q)
            adv = adv_all[np.arange(len(batch)), batch.actions]
            if hyper.advantage_norm and len(batch) > 1:
                adv = (adv - adv.mean()) / (adv.std() + 1e-8)
            batch.advantages = adv

            for _ in range(hyper.epochs):
                order = shuffle_rng.permutation(len(batch))
                for start in range(0, len(batch), hyper.batch_size):
                    mini = batch.take(order[start : start + hyper.batch_size])
                    actor_grads = gradient(
                        lambda layers: actor_objective_graph(mini, layers, hyper),
                        actor,
                    )
                    actor, actor_opt = optimizer_step(
                        actor, actor_grads, actor_opt, hyper.optimizer,
                        learning_rate=hyper.learning_rate, ascend=True,
                    )
                refresh_targets(batch)
                critic_pass(batch)

        report = ppo_losses(batch, actor, critic, hyper) if len(batch) else None
        metrics.append({
            "episode": episode,
            "mean_reward": mean_reward,
            "mean_latency": mean_latency,
            "loss_clip": report.clip if report else 0.0,
            "loss_value": report.value if report else 0.0,
            "entropy": report.entropy if report else 0.0,
        })
        if eval_hook is not None and (
            (episode + 1) % hyper.eval_every == 0 or episode == n_episodes - 1
        ):
            result = eval_hook(episode, actor)
            if result is not None:
                evaluations.append({"episode": episode, **result})

    return TrainResult(actor=actor, critic=critic, episode_metrics=metrics,
                       buffer=buffer, evaluations=evaluations)


def evaluate(policy, config: ExperimentConfig, seed: int, episodes: int,
             *, trust_engine=None, keep_records: bool = False) -> EvalResult:
    """Score a policy greedily (no exploration, no updates).

    Deterministic given ``(policy, config, seed)``; episode indices
    0..episodes-1 on an environment seeded independently of training.
    """
    env = MigrationEnv(config, seed, trust_engine=trust_engine)
    per_episode = []
    all_records = []
    for episode in range(episodes):
        obs = env.reset(episode)
        rewards, latencies = [], []
        records = []
        while not env.done:
            actions = policy(obs, env)
            obs, reward, record = env.step(actions)
            rewards.append(reward)
            latencies.extend(v.latency.total for v in record.vehicles)
            records.append(record)
        per_episode.append((
            float(np.mean(rewards)) if rewards else 0.0,
            float(np.mean(latencies)) if latencies else 0.0,
        ))
        if keep_records:
            all_records.append(tuple(records))
    mean_reward = float(np.mean([r for r, _ in per_episode]))
    mean_latency = float(np.mean([l for _, l in per_episode]))
    return EvalResult(mean_reward=mean_reward, mean_latency=mean_latency,
                      per_episode=tuple(per_episode),
                      records=tuple(all_records))
