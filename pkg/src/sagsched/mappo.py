"""Multi-agent PPO: one actor/critic/buffer per access point.

Each AP's actor maps its local observation to one categorical distribution
per channel over {idle, user 1..U}; a centralized critic reads the global
observation. Updates use the clipped surrogate with stored behavior
probabilities, one-step TD advantages, buffer-truncated discounted returns
as critic targets, and an entropy bonus -- full-batch, Q epochs per round.

Two policy-level masks:
  * coverage mask: uncovered users' logits are pinned to -inf (the
    environment rejects transmissions to uncovered users);
  * redundancy mask: if several heads of one AP sample the same user, the
    lowest channel keeps it and the rest execute idle. The stored behavior
    probability is the pre-mask product so the ratio stays well-defined.
"""

import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .env import NetworkEnv, Observation
from .errors import ConfigurationError, TrainingDiverged
from .metrics import EpisodeAccumulator, EpisodeRecord
from .neural import (AdamState, Mlp, OUTPUT_SOFTMAX_HEADS, backward, forward,
                     load_metadata, load_mlp, mlp_init, save_metadata, save_mlp)

RATIO_CAP = 1e6
CHECKPOINT_FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    episodes: int = 300
    episode_len: int = 1000
    buffer_size: int = 256
    update_epochs: int = 50
    gamma: float = 0.95
    clip_ratio: float = 0.2
    entropy_beta: float = 0.01
    learning_rate: float = 1e-3
    hidden_sizes: Tuple[int, ...] = (64, 64)
    seed: int = 0
    observation_mode: str = "delayed"
    divergence_threshold: float = 10.0
    divergence_patience: int = 3

    def __post_init__(self):
        if self.buffer_size > self.episode_len:
            raise ConfigurationError("buffer_size must not exceed episode_len")
        if not 0 <= self.gamma <= 1:
            raise ConfigurationError("gamma must be in [0, 1]")


class ExperienceBuffer:
    """Frame-ordered rollout storage for one PPO instance."""

    def __init__(self):
        self.global_obs: List[np.ndarray] = []
        self.next_global_obs: List[np.ndarray] = []
        self.local_obs: List[np.ndarray] = []
        self.head_actions: List[np.ndarray] = []   # pre-redundancy samples
        self.head_probs: List[np.ndarray] = []     # behavior probabilities
        self.rewards: List[float] = []

    def __len__(self) -> int:
        return len(self.rewards)

    def add(self, global_obs, next_global_obs, local_obs, head_actions,
            head_probs, reward) -> None:
        self.global_obs.append(global_obs)
        self.next_global_obs.append(next_global_obs)
        self.local_obs.append(local_obs)
        self.head_actions.append(head_actions)
        self.head_probs.append(head_probs)
        self.rewards.append(reward)

    def clear(self) -> None:
        self.__init__()


class PpoInstance:
    """Actor + critic + buffer + optimizer state for one AP."""

    def __init__(self, ap: int, obs_dim: int, global_dim: int, n_channels: int,
                 n_users: int, coverage_row: np.ndarray, cfg: TrainConfig,
                 rng: np.random.Generator):
        self.ap = ap
        self.n_channels = n_channels
        self.n_users = n_users
        self.mask = np.zeros(n_users + 1, dtype=bool)
        self.mask[0] = True  # idle always available
        self.mask[1:] = coverage_row.astype(bool)
        head_size = n_users + 1
        self.actor = mlp_init([obs_dim, *cfg.hidden_sizes, n_channels * head_size],
                              rng, output=OUTPUT_SOFTMAX_HEADS,
                              n_heads=n_channels, head_size=head_size, out_gain=0.01)
        self.critic = mlp_init([global_dim, *cfg.hidden_sizes, 1], rng, out_gain=1.0)
        self.actor_opt = AdamState(lr=cfg.learning_rate)
        self.critic_opt = AdamState(lr=cfg.learning_rate)
        self.buffer = ExperienceBuffer()
        self.divergence_streak = 0


def head_probabilities(actor: Mlp, mask: np.ndarray, obs_vec: np.ndarray) -> np.ndarray:
    """(n_channels, U+1) action probabilities for one observation."""
    probs, _ = forward(actor, obs_vec, mask)
    return probs[0]


def apply_redundancy_mask(sampled: np.ndarray) -> np.ndarray:
    """Remap duplicate nonzero users to idle, lowest channel wins."""
    executed = sampled.copy()
    seen = set()
    for p in range(len(executed)):
        u = int(executed[p])
        if u == 0:
            continue
        if u in seen:
            executed[p] = 0
        else:
            seen.add(u)
    return executed


def act(instance: PpoInstance, obs_vec: np.ndarray,
        rng: Optional[np.random.Generator], greedy: bool = False
        ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample (or argmax) one action per channel head.

    Returns (executed_row, sampled_heads, behavior_probs); the executed row
    has the redundancy mask applied, the stored probabilities do not.
    """
    probs = head_probabilities(instance.actor, instance.mask, obs_vec)
    if not np.isfinite(probs).all():
        raise TrainingDiverged(f"ap {instance.ap}: non-finite action probabilities")
    n_heads = probs.shape[0]
    if greedy:
        sampled = probs.argmax(axis=1).astype(np.int64)  # ties -> lower index
    else:
        draws = rng.random(n_heads)
        sampled = np.empty(n_heads, dtype=np.int64)
        for h in range(n_heads):
            c = np.cumsum(probs[h])
            sampled[h] = min(int(np.searchsorted(c, draws[h], side="right")),
                             probs.shape[1] - 1)
    behavior = probs[np.arange(n_heads), sampled]
    return apply_redundancy_mask(sampled), sampled, behavior


def returns_to_go(rewards: Sequence[float], gamma: float) -> np.ndarray:
    """Discounted cumulative reward per entry, truncated at the buffer end."""
    if len(rewards) == 0:
        raise ValueError("empty buffer")
    out = np.empty(len(rewards))
    acc = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


def advantage(critic: Mlp, global_obs: np.ndarray, next_global_obs: np.ndarray,
              rewards: np.ndarray, gamma: float) -> np.ndarray:
    """One-step TD advantage r + gamma*V(o') - V(o), no gradient through V."""
    v = forward(critic, global_obs)[0][:, 0]
    v_next = forward(critic, next_global_obs)[0][:, 0]
    return np.asarray(rewards) + gamma * v_next - v


def ppo_loss_and_grads(instance: PpoInstance, local_obs: np.ndarray,
                       global_obs: np.ndarray, head_actions: np.ndarray,
                       old_head_probs: np.ndarray, advantages: np.ndarray,
                       targets: np.ndarray, cfg: TrainConfig,
                       critic_forward=None) -> Dict:
    """Total loss (clipped surrogate + value error - entropy bonus) and its
    exact parameter gradients, with advantages/targets held constant.

    ``critic_forward`` may supply a precomputed (values, cache) pair for
    ``global_obs`` so callers can share one critic pass per epoch.
    """
    n = local_obs.shape[0]
    n_heads = instance.n_channels

    if critic_forward is None:
        v_out, critic_cache = forward(instance.critic, global_obs)
        v = v_out[:, 0]
        dv = ((v - targets) / n)[:, None]
    else:
        v_full, critic_cache = critic_forward  # rows: global_obs + one extra
        v = v_full[:n, 0]
        dv = np.zeros((v_full.shape[0], 1))
        dv[:n, 0] = (v - targets) / n
    critic_loss = 0.5 * float(np.mean((v - targets) ** 2))
    critic_grads = backward(instance.critic, critic_cache, dv)

    probs, actor_cache = forward(instance.actor, local_obs, instance.mask)
    rows = np.arange(n)[:, None]
    cols = np.arange(n_heads)[None, :]
    p_new = probs[rows, cols, head_actions]
    ratio = np.prod(p_new / old_head_probs, axis=1)
    capped = ratio > RATIO_CAP
    ratio = np.minimum(ratio, RATIO_CAP)

    clipped = np.clip(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio)
    surr1 = ratio * advantages
    surr2 = clipped * advantages
    take_raw = surr1 <= surr2
    surrogate = np.where(take_raw, surr1, surr2)
    actor_loss = -float(np.mean(surrogate))

    log_p = np.where(probs > 0, np.log(np.where(probs > 0, probs, 1.0)), 0.0)
    entropy_per_sample = -(probs * log_p).sum(axis=2).sum(axis=1)
    entropy = float(np.mean(entropy_per_sample))

    inside = (ratio > 1.0 - cfg.clip_ratio) & (ratio < 1.0 + cfg.clip_ratio) & ~capped
    dsurr_dratio = np.where(take_raw & ~capped, advantages,
                            np.where(inside, advantages, 0.0))
    dloss_dratio = -dsurr_dratio / n
    dp_selected = (dloss_dratio * ratio)[:, None] / p_new  # product rule
    # selected (sample, head) indices are unique, so plain fancy assignment
    dprobs = np.full_like(probs, 0.0)
    dprobs[rows, cols, head_actions] = dp_selected
    dprobs += cfg.entropy_beta * (log_p + 1.0) / n  # d(-beta*entropy)/dprobs
    actor_grads = backward(instance.actor, actor_cache, dprobs)

    total = actor_loss + critic_loss - cfg.entropy_beta * entropy
    return {
        "total_loss": total,
        "actor_loss": actor_loss,
        "critic_loss": critic_loss,
        "entropy": entropy,
        "mean_abs_ratio_dev": float(np.mean(np.abs(ratio - 1.0))),
        "clip_fraction": float(np.mean(~take_raw)),
        "ratio_capped": int(capped.sum()),
        "actor_grads": actor_grads,
        "critic_grads": critic_grads,
    }


def ppo_update(instance: PpoInstance, cfg: TrainConfig) -> Dict:
    """Run Q optimization epochs on a full buffer; returns diagnostics."""
    buf = instance.buffer
    if len(buf) == 0:
        raise ValueError("empty buffer")
    local = np.stack(buf.local_obs)
    glob = np.stack(buf.global_obs)
    heads = np.stack(buf.head_actions)
    old_probs = np.stack(buf.head_probs)
    rewards = np.asarray(buf.rewards)
    targets = returns_to_go(rewards, cfg.gamma)
    glob_next = np.stack(buf.next_global_obs)
    # buffers normally hold consecutive frames, so o(t+1) rows are o rows
    # shifted by one plus the observation after the final entry: one critic
    # pass then serves both the advantage and the value loss
    contiguous = len(buf) > 1 and np.array_equal(glob[1:], glob_next[:-1])
    glob_ext = np.vstack([glob, glob_next[-1][None, :]])

    ratio_devs = []
    last: Dict = {}
    n = len(buf)
    for _ in range(cfg.update_epochs):
        if contiguous:
            v_full, ccache = forward(instance.critic, glob_ext)
            adv = rewards + cfg.gamma * v_full[1:, 0] - v_full[:n, 0]
            critic_forward = (v_full, ccache)
        else:
            adv = advantage(instance.critic, glob, glob_next, rewards, cfg.gamma)
            critic_forward = None
        out = ppo_loss_and_grads(instance, local, glob, heads, old_probs,
                                 adv, targets, cfg,
                                 critic_forward=critic_forward)
        instance.actor_opt.step(instance.actor, out["actor_grads"])
        instance.critic_opt.step(instance.critic, out["critic_grads"])
        ratio_devs.append(out["mean_abs_ratio_dev"])
        last = out
    diag = {k: v for k, v in last.items() if not k.endswith("grads")}
    diag["mean_abs_ratio_dev"] = float(np.mean(ratio_devs))
    diag["rejected_steps"] = instance.actor_opt.rejected + instance.critic_opt.rejected
    return diag


@dataclass
class TrainResult:
    instances: List[PpoInstance]
    records: List[EpisodeRecord]
    update_diagnostics: List[Dict] = field(default_factory=list)


def build_instances(env: NetworkEnv, cfg: TrainConfig,
                    rng: np.random.Generator) -> List[PpoInstance]:
    obs = env.reset(seed=cfg.seed)
    return [
        PpoInstance(ap=k, obs_dim=len(obs.per_ap[k].vec),
                    global_dim=len(obs.global_vec),
                    n_channels=env.n_channels, n_users=env.n_users,
                    coverage_row=env.topology.coverage[k], cfg=cfg, rng=rng)
        for k in range(env.n_aps)
    ]


def train(env: NetworkEnv, cfg: TrainConfig,
          progress_every: int = 0) -> TrainResult:
    """Alternate rollout collection (fill buffers over buffer_size frames)
    and Q-epoch updates; buffers are emptied after every update round and any
    partial fill is discarded at episode end."""
    if env.observation_mode != cfg.observation_mode:
        raise ConfigurationError("environment observation mode does not match config")
    rng = np.random.default_rng(cfg.seed)
    instances = build_instances(env, cfg, rng)
    records: List[EpisodeRecord] = []
    diagnostics: List[Dict] = []

    for episode in range(cfg.episodes):
        obs = env.reset(seed=cfg.seed)
        acc = EpisodeAccumulator(env.n_aps, env.n_users)
        for _ in range(cfg.episode_len):
            joint = np.zeros((env.n_aps, env.n_channels), dtype=np.int64)
            sampled_all = []
            probs_all = []
            for k, inst in enumerate(instances):
                row, sampled, behavior = act(inst, obs.per_ap[k].vec, rng)
                joint[k] = row
                sampled_all.append(sampled)
                probs_all.append(behavior)
            outcome = env.step(joint)
            for k, inst in enumerate(instances):
                inst.buffer.add(obs.global_vec, outcome.observation.global_vec,
                                obs.per_ap[k].vec, sampled_all[k], probs_all[k],
                                float(outcome.ap_rewards[k]))
            acc.add(outcome.stats)
            obs = outcome.observation

            if len(instances[0].buffer) == cfg.buffer_size:
                round_diag = {"episode": episode}
                for inst in instances:
                    diag = ppo_update(inst, cfg)
                    inst.buffer.clear()
                    round_diag[f"ap{inst.ap}"] = diag
                    if diag["mean_abs_ratio_dev"] > cfg.divergence_threshold:
                        inst.divergence_streak += 1
                        if inst.divergence_streak >= cfg.divergence_patience:
                            raise TrainingDiverged(
                                f"ap {inst.ap}: |ratio-1| above "
                                f"{cfg.divergence_threshold} for "
                                f"{cfg.divergence_patience} consecutive updates")
                    else:
                        inst.divergence_streak = 0
                diagnostics.append(round_diag)
        for inst in instances:
            inst.buffer.clear()
        records.append(acc.finish(episode))
        if progress_every and (episode + 1) % progress_every == 0:
            r = records[-1]
            print(f"episode {episode + 1}/{cfg.episodes} "
                  f"reward={r.reward_mean:.3f} aoi={r.aoi_sum_mean:.3f} "
                  f"interference={r.interference_total}", flush=True)
    return TrainResult(instances=instances, records=records,
                       update_diagnostics=diagnostics)


class GreedyActorPolicy:
    """Argmax execution of trained actors; used for evaluation rollouts."""

    def __init__(self, actors: List[Mlp], masks: List[np.ndarray]):
        self.actors = actors
        self.masks = masks

    def start_episode(self) -> None:
        pass

    def plan(self, env: NetworkEnv) -> np.ndarray:
        obs = env.observation
        joint = np.zeros((env.n_aps, env.n_channels), dtype=np.int64)
        for k, (actor, mask) in enumerate(zip(self.actors, self.masks)):
            probs = forward(actor, obs.per_ap[k].vec, mask)[0][0]
            joint[k] = apply_redundancy_mask(probs.argmax(axis=1).astype(np.int64))
        return joint


@dataclass
class EvalResult:
    records: List[EpisodeRecord]
    aoi_user_means: np.ndarray
    energy_ap_means: np.ndarray
    objective: float
    interference_total: int
    reward_mean: float


def rollout(env: NetworkEnv, policy, episodes: int, episode_len: int,
            seed: Optional[int] = None) -> List[EpisodeRecord]:
    """Run a plan()-style policy for whole episodes and fold the stats."""
    records = []
    for episode in range(episodes):
        env.reset(seed=seed)
        policy.start_episode()
        acc = EpisodeAccumulator(env.n_aps, env.n_users)
        for _ in range(episode_len):
            outcome = env.step(policy.plan(env))
            acc.add(outcome.stats)
        records.append(acc.finish(episode))
    return records


def evaluate(env: NetworkEnv, actors: List[Mlp], masks: List[np.ndarray],
             episodes: int, episode_len: int, weights=None) -> EvalResult:
    """Greedy benchmark run: no critic, no updates, no sampling."""
    policy = GreedyActorPolicy(actors, masks)
    records = rollout(env, policy, episodes, episode_len)
    aoi_user = np.mean([r.aoi_user_means for r in records], axis=0)
    energy_ap = np.mean([r.energy_ap_means for r in records], axis=0)
    w = weights if weights is not None else env.weights
    objective = w.aoi * float(aoi_user.sum()) + w.energy * float(energy_ap.sum())
    return EvalResult(
        records=records,
        aoi_user_means=aoi_user,
        energy_ap_means=energy_ap,
        objective=objective,
        interference_total=int(sum(r.interference_total for r in records)),
        reward_mean=float(np.mean([r.reward_mean for r in records])),
    )


def save_policy_bundle(path, instances: List[PpoInstance], meta: dict) -> None:
    os.makedirs(path, exist_ok=True)
    meta = dict(meta)
    meta["format_version"] = CHECKPOINT_FORMAT_VERSION
    meta["n_aps"] = len(instances)
    meta["obs_dims"] = [inst.actor.sizes[0] for inst in instances]
    meta["global_dim"] = instances[0].critic.sizes[0]
    meta["n_channels"] = instances[0].n_channels
    meta["n_users"] = instances[0].n_users
    save_metadata(os.path.join(path, "meta.json"), meta)
    for inst in instances:
        save_mlp(os.path.join(path, f"actor_{inst.ap:02d}.bin"), inst.actor)
        save_mlp(os.path.join(path, f"critic_{inst.ap:02d}.bin"), inst.critic)


def load_policy_bundle(path) -> Tuple[List[Mlp], List[Mlp], dict]:
    meta = load_metadata(os.path.join(path, "meta.json"))
    if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ConfigurationError(
            f"unsupported checkpoint format {meta.get('format_version')}")
    actors, critics = [], []
    for k in range(meta["n_aps"]):
        actors.append(load_mlp(os.path.join(path, f"actor_{k:02d}.bin")))
        critics.append(load_mlp(os.path.join(path, f"critic_{k:02d}.bin")))
    return actors, critics, meta


def coverage_masks(env: NetworkEnv) -> List[np.ndarray]:
    masks = []
    for k in range(env.n_aps):
        m = np.zeros(env.n_users + 1, dtype=bool)
        m[0] = True
        m[1:] = env.topology.coverage[k].astype(bool)
        masks.append(m)
    return masks


def check_bundle_compatible(env: NetworkEnv, meta: dict) -> None:
    obs = env.reset()
    dims = [len(obs.per_ap[k].vec) for k in range(env.n_aps)]
    if (meta["n_aps"] != env.n_aps or meta["n_channels"] != env.n_channels
            or meta["n_users"] != env.n_users or meta["obs_dims"] != dims
            or meta["global_dim"] != len(obs.global_vec)):
        raise ConfigurationError("checkpoint does not match the scenario's dimensions")
