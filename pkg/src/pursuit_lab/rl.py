"""PPO machinery and the base trainers: IPPO self-play, PBT, and MAPPO.

Everything trains a shared actor-critic over the learner pursuer slots.
Gradients are computed analytically against the nn primitives; `ppo_update`
also returns the gradient with respect to the actor input so trainers that
feed extra (learned) features into the actor can backpropagate through them.

Rollouts count *learner transitions*: one env step with N learner slots
contributes N transitions, and `PpoConfig.total_steps` / `batch` are
denominated in those units.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn, scripted, sim
from .config import EnvConfig, with_control_split
from .seeding import substream


@dataclass
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    lr: float = 3e-4
    clip_ratio: float = 0.2
    value_coef: float = 1.0
    entropy_coef: float = 0.01
    epochs: int = 20
    batch: int = 1024
    minibatch: int = 256
    total_steps: int = 1_000_000
    hidden: tuple[int, ...] = (128, 128)
    init_std: float = 0.5

    def validate(self) -> None:
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must be in (0, 1]")
        if not (0.0 < self.gae_lambda <= 1.0):
            raise ValueError("gae_lambda must be in (0, 1]")
        if self.batch % self.minibatch != 0:
            raise ValueError("minibatch must divide batch")


# ---------------------------------------------------------------------------
# Actor-critic model
# ---------------------------------------------------------------------------

@dataclass
class ActorCritic:
    actor: nn.Mlp  # obs (+ extras) -> action mean
    log_std: np.ndarray  # (act_dim,), state-independent
    critic: nn.Mlp  # critic input -> value
    obs_dim: int
    act_dim: int
    critic_in_dim: int

    def params(self) -> list[np.ndarray]:
        return self.actor.arrays() + [self.log_std] + self.critic.arrays()

    def copy(self) -> "ActorCritic":
        return ActorCritic(
            actor=self.actor.copy(),
            log_std=self.log_std.copy(),
            critic=self.critic.copy(),
            obs_dim=self.obs_dim,
            act_dim=self.act_dim,
            critic_in_dim=self.critic_in_dim,
        )

    def action_mean(self, obs: np.ndarray) -> np.ndarray:
        mean, _ = nn.mlp_forward(self.actor, obs)
        return mean

    def act(self, obs: np.ndarray, rng: np.random.Generator, deterministic: bool = False):
        """(actions, log_probs) for a batch of observations."""
        mean = self.action_mean(obs)
        if deterministic:
            actions = mean.copy()
        else:
            actions = nn.gaussian_sample(mean, self.log_std, rng)
        logp = nn.gaussian_log_prob(mean, self.log_std, actions)
        return actions, logp

    def values(self, critic_in: np.ndarray) -> np.ndarray:
        v, _ = nn.mlp_forward(self.critic, critic_in)
        return v[:, 0]


def init_actor_critic(
    obs_dim: int,
    critic_in_dim: int,
    cfg: PpoConfig,
    rng: np.random.Generator,
    act_dim: int = 1,
    dtype=np.float32,
) -> ActorCritic:
    actor = nn.mlp_init([obs_dim, *cfg.hidden, act_dim], rng, dtype=dtype, final_scale=0.01)
    critic = nn.mlp_init([critic_in_dim, *cfg.hidden, 1], rng, dtype=dtype)
    log_std = np.full(act_dim, np.log(cfg.init_std), dtype=dtype)
    return ActorCritic(actor, log_std, critic, obs_dim, act_dim, critic_in_dim)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def _named_mlp_arrays(prefix: str, mlp: nn.Mlp) -> list[tuple[str, np.ndarray]]:
    out = []
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        out.append((f"{prefix}.w{i}", w))
        out.append((f"{prefix}.b{i}", b))
    return out


def _mlp_from_arrays(prefix: str, arrays: dict, n_layers: int) -> nn.Mlp:
    return nn.Mlp(
        weights=[arrays[f"{prefix}.w{i}"].copy() for i in range(n_layers)],
        biases=[arrays[f"{prefix}.b{i}"].copy() for i in range(n_layers)],
    )


def save_policy(path, model: ActorCritic, extra: dict | None = None) -> None:
    named = _named_mlp_arrays("actor", model.actor) + [("log_std", model.log_std)]
    named += _named_mlp_arrays("critic", model.critic)
    meta = {
        "obs_dim": model.obs_dim,
        "act_dim": model.act_dim,
        "critic_in_dim": model.critic_in_dim,
        "actor_layers": len(model.actor.weights),
        "critic_layers": len(model.critic.weights),
    }
    meta.update(extra or {})
    nn.save_arrays(path, "actor_critic", named, extra=meta)


def load_policy(path) -> tuple[ActorCritic, dict]:
    manifest, arrays = nn.load_arrays(path)
    if manifest["kind"] != "actor_critic":
        raise ValueError(f"checkpoint kind {manifest['kind']!r} is not actor_critic")
    meta = manifest["extra"]
    model = ActorCritic(
        actor=_mlp_from_arrays("actor", arrays, meta["actor_layers"]),
        log_std=arrays["log_std"].copy(),
        critic=_mlp_from_arrays("critic", arrays, meta["critic_layers"]),
        obs_dim=meta["obs_dim"],
        act_dim=meta["act_dim"],
        critic_in_dim=meta["critic_in_dim"],
    )
    return model, manifest


# ---------------------------------------------------------------------------
# GAE
# ---------------------------------------------------------------------------

def compute_gae(rewards, values, terminals, gamma: float, lam: float, bootstrap_value: float = 0.0):
    """Standard recursive GAE over a (possibly multi-episode) sequence.

    `terminals[t]` marks that transition t ended its episode; the bootstrap
    value is used for the value of the state after the final transition when
    that transition is non-terminal.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    terminals = np.asarray(terminals, dtype=np.float64)
    if not (len(rewards) == len(values) == len(terminals)):
        raise ValueError("rewards/values/terminals length mismatch")
    T = len(rewards)
    advantages = np.zeros(T)
    last = 0.0
    for t in range(T - 1, -1, -1):
        nonterminal = 1.0 - terminals[t]
        next_value = bootstrap_value if t == T - 1 else values[t + 1]
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        last = delta + gamma * lam * nonterminal * last
        advantages[t] = last
    return advantages, advantages + values


# ---------------------------------------------------------------------------
# PPO update
# ---------------------------------------------------------------------------

@dataclass
class PpoBatch:
    actor_in: np.ndarray  # (B, actor input dim)
    critic_in: np.ndarray  # (B, critic input dim)
    actions: np.ndarray  # (B, act_dim)
    old_logp: np.ndarray  # (B,)
    advantages: np.ndarray  # (B,)
    returns: np.ndarray  # (B,)

    def __len__(self) -> int:
        return self.actor_in.shape[0]


def ppo_loss_and_grads(model: ActorCritic, actor_in, critic_in, actions, old_logp, adv, ret, cfg: PpoConfig):
    """Clipped-surrogate loss, parameter gradients, and d(loss)/d(actor input).

    Returns (grads aligned with model.params(), dactor_in, diagnostics).
    """
    B = actor_in.shape[0]
    mean, a_cache = nn.mlp_forward(model.actor, actor_in)
    sigma = np.exp(nn.clamp_log_std(model.log_std))
    logp = nn.gaussian_log_prob(mean, model.log_std, actions)
    ratio = np.exp(logp - old_logp)
    surr1 = ratio * adv
    clipped_ratio = np.clip(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio)
    surr2 = clipped_ratio * adv
    pi_loss = -float(np.mean(np.minimum(surr1, surr2)))

    in_range = (ratio >= 1.0 - cfg.clip_ratio) & (ratio <= 1.0 + cfg.clip_ratio)
    active = (surr1 <= surr2) | in_range
    dlogp = -(adv * ratio * active) / B

    z = (actions - mean) / sigma
    dmean = dlogp[:, None] * z / sigma
    dlog_std_pi = np.sum(dlogp[:, None] * (z * z - 1.0), axis=0)
    entropy = nn.gaussian_entropy(model.log_std)
    dlog_std = (dlog_std_pi - cfg.entropy_coef) * nn.log_std_grad_mask(model.log_std)
    actor_grads, dactor_in = nn.mlp_backward(model.actor, a_cache, dmean)

    v, c_cache = nn.mlp_forward(model.critic, critic_in)
    v = v[:, 0]
    v_err = v - ret
    v_loss = float(np.mean(v_err**2))
    dv = (cfg.value_coef * 2.0 * v_err / B)[:, None]
    critic_grads, _ = nn.mlp_backward(model.critic, c_cache, dv.astype(v.dtype))

    grads = actor_grads + [dlog_std.astype(model.log_std.dtype)] + critic_grads
    diag = {
        "pi_loss": pi_loss,
        "v_loss": v_loss,
        "entropy": float(entropy),
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > cfg.clip_ratio)),
        "approx_kl": float(np.mean(old_logp - logp)),
        "loss": pi_loss + cfg.value_coef * v_loss - cfg.entropy_coef * float(entropy),
        "ratio": ratio,
    }
    return grads, dactor_in, diag


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def ppo_update(model: ActorCritic, opt: nn.AdamState, batch: PpoBatch, cfg: PpoConfig, rng: np.random.Generator):
    """Run cfg.epochs of shuffled minibatch updates over one batch."""
    if len(batch) != cfg.batch:
        raise ValueError(f"batch size {len(batch)} != cfg.batch {cfg.batch}")
    adv = normalize_advantages(batch.advantages)
    idx = np.arange(len(batch))
    diags = []
    for _epoch in range(cfg.epochs):
        rng.shuffle(idx)
        for start in range(0, len(batch), cfg.minibatch):
            mb = idx[start : start + cfg.minibatch]
            grads, _, diag = ppo_loss_and_grads(
                model,
                batch.actor_in[mb],
                batch.critic_in[mb],
                batch.actions[mb],
                batch.old_logp[mb],
                adv[mb],
                batch.returns[mb],
                cfg,
            )
            if not np.isfinite(diag["loss"]):
                raise FloatingPointError("non-finite PPO loss")
            nn.adam_step(opt, model.params(), grads)
            diags.append(diag)
    keys = ("pi_loss", "v_loss", "entropy", "clip_frac", "approx_kl", "loss")
    return {k: float(np.mean([d[k] for d in diags])) for k in keys}


# ---------------------------------------------------------------------------
# Slot policies (runtime behavior of non-learner pursuer slots)
# ---------------------------------------------------------------------------

class ScriptedSlotPolicy:
    """Wraps a scripted pursuer function; acts from the AgentView."""

    needs_view = True

    def __init__(self, policy_id: str):
        self.policy_id = policy_id
        self._fn = scripted.pursuer_policy(policy_id)

    def begin_episode(self, rng: np.random.Generator) -> None:
        pass

    def act(self, obs_row, view) -> float:
        return self._fn(view)


class RandomSlotPolicy:
    """Uniform random steering, reseeded per episode."""

    needs_view = False

    def __init__(self):
        self._rng = np.random.default_rng(0)

    def begin_episode(self, rng: np.random.Generator) -> None:
        self._rng = np.random.default_rng(rng.integers(0, 2**63))

    def act(self, obs_row, view) -> float:
        return float(self._rng.uniform(-1.0, 1.0))


class NetSlotPolicy:
    """Frozen actor-critic policy driving one pursuer slot."""

    needs_view = False

    def __init__(self, model: ActorCritic, deterministic: bool = True):
        self.model = model
        self.deterministic = deterministic
        self._rng = np.random.default_rng(0)

    def begin_episode(self, rng: np.random.Generator) -> None:
        self._rng = np.random.default_rng(rng.integers(0, 2**63))

    def act(self, obs_row, view) -> float:
        action, _ = self.model.act(obs_row[None, :], self._rng, deterministic=self.deterministic)
        return float(action[0, 0])


class FixedTeammates:
    """Same teammate policies every episode."""

    def __init__(self, policies):
        self.policies = list(policies)

    def sample(self, rng: np.random.Generator):
        return list(self.policies)


class UniformTeammates:
    """Each uncontrolled slot draws independently and uniformly from a pool."""

    def __init__(self, pool, n_slots: int):
        if not pool:
            raise ValueError("empty teammate pool")
        self.pool = list(pool)
        self.n_slots = n_slots

    def sample(self, rng: np.random.Generator):
        return [self.pool[int(rng.integers(0, len(self.pool)))] for _ in range(self.n_slots)]


# ---------------------------------------------------------------------------
# Rollout collection
# ---------------------------------------------------------------------------

@dataclass
class RolloutStats:
    episode_returns: list[float] = field(default_factory=list)
    episode_lengths: list[int] = field(default_factory=list)
    episode_terminals: list[str] = field(default_factory=list)

    def suc(self) -> float:
        if not self.episode_terminals:
            return 0.0
        return 100.0 * sum(t == sim.SUCCESS for t in self.episode_terminals) / len(self.episode_terminals)


class RolloutCollector:
    """Streams learner transitions from one env into PPO batches.

    Learner slots are [0, num_ctrl); the remaining slots are filled by the
    teammate sampler each episode. With `central=True` the critic consumes the
    centralized observation (all learner observations plus global evader
    positions unless `central_evaders=False`).
    """

    def __init__(
        self,
        env_cfg: EnvConfig,
        model: ActorCritic,
        cfg: PpoConfig,
        rng: np.random.Generator,
        teammates=None,
        central: bool = False,
        central_evaders: bool = True,
    ):
        self.env_cfg = env_cfg
        self.model = model
        self.cfg = cfg
        self.rng = rng
        self.teammates = teammates
        self.central = central
        self.central_evaders = central_evaders
        self.n_learners = env_cfg.players.num_ctrl
        if self.n_learners < 1:
            raise ValueError("need at least one learner slot")
        if env_cfg.players.num_unctrl > 0 and teammates is None:
            raise ValueError("uncontrolled slots present but no teammate sampler given")
        self.state = None
        self._episode_reward = 0.0
        self._slot_policies = []

    # -- episode plumbing ---------------------------------------------------

    def _central_obs(self, state) -> np.ndarray:
        obs = sim.central_observation(state, range(self.n_learners))
        if not self.central_evaders:
            obs = obs[: self.n_learners * sim.obs_length(self.env_cfg)]
        return obs

    def _begin_episode(self):
        seed = int(self.rng.integers(0, 2**63))
        self.state, obs = sim.reset(self.env_cfg, seed)
        self._episode_reward = 0.0
        self._slot_policies = []
        if self.env_cfg.players.num_unctrl > 0:
            self._slot_policies = self.teammates.sample(self.rng)
            for pol in self._slot_policies:
                pol.begin_episode(self.rng)
        return obs

    def collect(self, n_transitions: int) -> tuple[PpoBatch, RolloutStats]:
        """Gather at least n_transitions learner transitions (multiple of
        n_learners), running whole steps and bootstrapping a cut episode."""
        cfg, model = self.cfg, self.model
        stats = RolloutStats()
        obs_rows, critic_rows, act_rows, logp_rows = [], [], [], []
        value_rows, reward_rows, term_rows = [], [], []
        seg_bounds = []  # (start, end, bootstrap_value) in env-step units
        seg_start = 0
        steps_needed = -(-n_transitions // self.n_learners)

        if self.state is None or self.state.terminal != sim.RUNNING:
            obs = self._begin_episode()
        else:
            obs = sim.observe_all(self.state)

        for step_i in range(steps_needed):
            learner_obs = obs[: self.n_learners]
            actions, logp = model.act(learner_obs, self.rng)
            if self.central:
                critic_in = self._central_obs(self.state)[None, :]
                values = model.values(critic_in)
                critic_step = np.repeat(critic_in, self.n_learners, axis=0)
                value_step = np.repeat(values, self.n_learners)
            else:
                critic_step = learner_obs
                value_step = model.values(learner_obs)

            all_actions = np.zeros(self.env_cfg.players.num_p)
            all_actions[: self.n_learners] = actions[:, 0]
            for k, pol in enumerate(self._slot_policies):
                slot = self.n_learners + k
                view = sim.pursuer_view(self.state, slot) if pol.needs_view else None
                all_actions[slot] = pol.act(obs[slot], view)

            out = sim.step(self.state, all_actions)
            self._episode_reward += out.reward

            obs_rows.append(learner_obs)
            critic_rows.append(critic_step)
            act_rows.append(actions)
            logp_rows.append(logp)
            value_rows.append(value_step)
            reward_rows.append(out.reward)
            term_rows.append(1.0 if out.terminal != sim.RUNNING else 0.0)

            if out.terminal != sim.RUNNING:
                stats.episode_returns.append(self._episode_reward)
                stats.episode_lengths.append(self.state.step)
                stats.episode_terminals.append(out.terminal)
                seg_bounds.append((seg_start, step_i + 1, 0.0))
                seg_start = step_i + 1
                if step_i + 1 < steps_needed:
                    obs = self._begin_episode()
            else:
                obs = out.observations

        if seg_start < steps_needed:
            # cut mid-episode: bootstrap with the value of the current state
            if self.central:
                tail_value = float(model.values(self._central_obs(self.state)[None, :])[0])
            else:
                tail_obs = sim.observe_all(self.state)[: self.n_learners]
                tail_value = float(np.mean(model.values(tail_obs)))
            seg_bounds.append((seg_start, steps_needed, tail_value))

        # GAE per learner slot over each episode segment, then flatten
        rewards = np.asarray(reward_rows)
        terminals = np.asarray(term_rows)
        adv_rows = np.zeros((steps_needed, self.n_learners))
        ret_rows = np.zeros((steps_needed, self.n_learners))
        value_cache = np.stack(value_rows)  # (T, n_learners)
        for slot in range(self.n_learners):
            for start, end, bootstrap in seg_bounds:
                adv, ret = compute_gae(
                    rewards[start:end],
                    value_cache[start:end, slot],
                    terminals[start:end],
                    cfg.gamma,
                    cfg.gae_lambda,
                    bootstrap_value=bootstrap,
                )
                adv_rows[start:end, slot] = adv
                ret_rows[start:end, slot] = ret

        batch = PpoBatch(
            actor_in=np.concatenate(obs_rows, axis=0),
            critic_in=np.concatenate(critic_rows, axis=0),
            actions=np.concatenate(act_rows, axis=0),
            old_logp=np.concatenate(logp_rows, axis=0),
            advantages=adv_rows.reshape(-1),
            returns=ret_rows.reshape(-1),
        )
        return batch, stats


def collect_rollouts(env_cfg, model, cfg, rng, steps, teammates=None, central: bool = False, central_evaders: bool = True):
    """One-shot rollout collection (fresh collector)."""
    collector = RolloutCollector(
        env_cfg, model, cfg, rng, teammates=teammates, central=central, central_evaders=central_evaders
    )
    return collector.collect(steps)


# ---------------------------------------------------------------------------
# Training loops
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    model: ActorCritic
    metrics: list[dict]
    checkpoints: list[str]
    final_path: str | None
    selfplay_suc: float | None = None


METRIC_FIELDS = (
    "step",
    "update",
    "ep_return_mean",
    "suc",
    "pi_loss",
    "v_loss",
    "entropy",
    "clip_frac",
    "approx_kl",
    "recon_loss",
)


def write_metrics_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in METRIC_FIELDS})


def _metrics_row(step, update, window_stats, diag, recon_loss=0.0) -> dict:
    returns = window_stats.episode_returns[-50:]
    terms = window_stats.episode_terminals[-50:]
    return {
        "step": step,
        "update": update,
        "ep_return_mean": float(np.mean(returns)) if returns else 0.0,
        "suc": 100.0 * sum(t == sim.SUCCESS for t in terms) / len(terms) if terms else 0.0,
        "pi_loss": diag["pi_loss"],
        "v_loss": diag["v_loss"],
        "entropy": diag["entropy"],
        "clip_frac": diag["clip_frac"],
        "approx_kl": diag["approx_kl"],
        "recon_loss": recon_loss,
    }


def evaluate_selfplay_suc(model: ActorCritic, env_cfg: EnvConfig, seed: int, episodes: int = 50) -> float:
    """Deterministic self-play success rate; recorded in checkpoint manifests."""
    sp_cfg = with_control_split(env_cfg, env_cfg.players.num_p, 0)
    wins = 0
    rng = substream(seed, "selfplay-eval")
    for i in range(episodes):
        state, obs = sim.reset(sp_cfg, int(rng.integers(0, 2**63)))
        while state.terminal == sim.RUNNING:
            actions, _ = model.act(obs, rng, deterministic=True)
            out = sim.step(state, actions[:, 0])
            obs = out.observations
        wins += state.terminal == sim.SUCCESS
    return 100.0 * wins / episodes


def _maybe_checkpoint(out_dir, name, model, extra) -> str | None:
    if out_dir is None:
        return None
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    save_policy(path, model, extra=extra)
    return path


def train_loop(
    env_cfg: EnvConfig,
    model: ActorCritic,
    cfg: PpoConfig,
    seed: int,
    teammates=None,
    central: bool = False,
    central_evaders: bool = True,
    out_dir=None,
    ckpt_prefix: str = "ckpt",
    total_steps: int | None = None,
) -> TrainResult:
    """Shared PPO outer loop used by the SP/MAPPO/HOLA trainers."""
    cfg.validate()
    total = total_steps if total_steps is not None else cfg.total_steps
    n_updates = max(1, int(np.ceil(total / cfg.batch)))
    opt = nn.adam_init(model.params(), lr=cfg.lr)
    collector = RolloutCollector(
        env_cfg,
        model,
        cfg,
        substream(seed, "rollout"),
        teammates=teammates,
        central=central,
        central_evaders=central_evaders,
    )
    update_rng = substream(seed, "update")
    window = RolloutStats()
    metrics, checkpoints = [], []
    ckpt_every = max(1, n_updates // 5)
    for update in range(n_updates):
        batch, stats = collector.collect(cfg.batch)
        window.episode_returns += stats.episode_returns
        window.episode_lengths += stats.episode_lengths
        window.episode_terminals += stats.episode_terminals
        diag = ppo_update(model, opt, batch, cfg, update_rng)
        step_count = (update + 1) * cfg.batch
        metrics.append(_metrics_row(step_count, update, window, diag))
        if out_dir is not None and (update + 1) % ckpt_every == 0:
            path = _maybe_checkpoint(out_dir, f"{ckpt_prefix}_{step_count:09d}.zip", model, {"step": step_count})
            checkpoints.append(path)
    return TrainResult(model=model, metrics=metrics, checkpoints=checkpoints, final_path=None)


def ippo_selfplay_train(cfg: PpoConfig, env_cfg: EnvConfig, seed: int, out_dir=None) -> TrainResult:
    """Self-play IPPO: one shared actor-critic drives all pursuer slots."""
    sp_cfg = with_control_split(env_cfg, env_cfg.players.num_p, 0)
    model = init_actor_critic(sim.obs_length(sp_cfg), sim.obs_length(sp_cfg), cfg, substream(seed, "init"))
    result = train_loop(sp_cfg, model, cfg, seed, out_dir=out_dir, ckpt_prefix="sp")
    result.selfplay_suc = evaluate_selfplay_suc(model, env_cfg, seed)
    result.final_path = _maybe_checkpoint(
        out_dir, "final.zip", model, {"algo": "sp", "seed": seed, "selfplay_suc": result.selfplay_suc}
    )
    if result.final_path:
        result.checkpoints.append(result.final_path)
    return result


def mappo_train(
    cfg: PpoConfig,
    env_cfg: EnvConfig,
    seed: int,
    teammate_pool=None,
    central_evaders: bool = True,
    out_dir=None,
) -> TrainResult:
    """MAPPO: shared actor, one centralized critic over all learner observations.

    With num_unctrl == 0 this is centralized-critic self-play; otherwise the
    uncontrolled slots draw uniformly from `teammate_pool` each episode.
    """
    n_learners = env_cfg.players.num_ctrl
    teammates = None
    if env_cfg.players.num_unctrl > 0:
        if not teammate_pool:
            raise ValueError("mappo_train with uncontrolled slots needs a teammate pool")
        teammates = UniformTeammates(teammate_pool, env_cfg.players.num_unctrl)
    critic_dim = sim.central_obs_length(env_cfg, n_learners)
    if not central_evaders:
        critic_dim -= 2 * env_cfg.players.num_e
    model = init_actor_critic(sim.obs_length(env_cfg), critic_dim, cfg, substream(seed, "init"))
    result = train_loop(
        env_cfg,
        model,
        cfg,
        seed,
        teammates=teammates,
        central=True,
        central_evaders=central_evaders,
        out_dir=out_dir,
        ckpt_prefix="mappo",
    )
    result.selfplay_suc = evaluate_selfplay_suc(model, env_cfg, seed)
    result.final_path = _maybe_checkpoint(
        out_dir, "final.zip", model, {"algo": "mappo", "seed": seed, "selfplay_suc": result.selfplay_suc}
    )
    if result.final_path:
        result.checkpoints.append(result.final_path)
    return result


# ---------------------------------------------------------------------------
# Population-based training
# ---------------------------------------------------------------------------

@dataclass
class PbtMember:
    model: ActorCritic
    opt: nn.AdamState
    lr: float
    entropy_coef: float
    steps: int = 0
    recent_returns: list[float] = field(default_factory=list)
    collector: RolloutCollector | None = None
    metrics: list[dict] = field(default_factory=list)


@dataclass
class PbtResult:
    members: list[PbtMember]
    exploit_events: list[dict]
    checkpoints: list[str]


def pbt_train(
    pop_size: int,
    cfg: PpoConfig,
    env_cfg: EnvConfig,
    seed: int,
    exploit_interval: int | None = 50_000,
    out_dir=None,
    total_steps: int | None = None,
) -> PbtResult:
    """Population-based training over IPPO learners with cross-member rollouts.

    Members occupy the env's learner slots; uncontrolled slots (if any) are
    filled per episode by uniform draws from the current population. Every
    `exploit_interval` learner steps the bottom quartile copies parameters
    from a uniformly chosen top-quartile member and perturbs lr and
    entropy_coef by x0.8 or x1.25.
    """
    if pop_size < 2:
        raise ValueError("pop_size must be >= 2")
    cfg.validate()
    total = total_steps if total_steps is not None else cfg.total_steps
    obs_dim = sim.obs_length(env_cfg)
    members = []
    for i in range(pop_size):
        model = init_actor_critic(obs_dim, obs_dim, cfg, substream(seed, "init", i))
        members.append(
            PbtMember(model=model, opt=nn.adam_init(model.params(), lr=cfg.lr), lr=cfg.lr, entropy_coef=cfg.entropy_coef)
        )
    exploit_rng = substream(seed, "exploit")
    update_rngs = [substream(seed, "update", i) for i in range(pop_size)]
    exploit_events: list[dict] = []
    next_exploit = exploit_interval if exploit_interval else None

    def member_collector(i: int) -> RolloutCollector:
        teammates = None
        if env_cfg.players.num_unctrl > 0:
            pool = [NetSlotPolicy(m.model, deterministic=False) for m in members]
            teammates = UniformTeammates(pool, env_cfg.players.num_unctrl)
        return RolloutCollector(env_cfg, members[i].model, cfg, substream(seed, "rollout", i), teammates=teammates)

    while min(m.steps for m in members) < total:
        for i, member in enumerate(members):
            # teammate pool references live member models: rebuild each round
            collector = member_collector(i)
            member_cfg = replace(cfg, lr=member.lr, entropy_coef=member.entropy_coef)
            batch, stats = collector.collect(cfg.batch)
            member.opt.lr = member.lr
            diag = ppo_update(member.model, member.opt, batch, member_cfg, update_rngs[i])
            member.steps += cfg.batch
            member.recent_returns += stats.episode_returns
            member.recent_returns = member.recent_returns[-20:]
            member.metrics.append(_metrics_row(member.steps, len(member.metrics), stats, diag))
        if next_exploit is not None and min(m.steps for m in members) >= next_exploit:
            exploit_events += _pbt_exploit(members, exploit_rng)
            next_exploit += exploit_interval

    checkpoints = []
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for i, member in enumerate(members):
            suc = evaluate_selfplay_suc(member.model, env_cfg, seed + i)
            path = os.path.join(out_dir, f"pbt_member{i}.zip")
            save_policy(path, member.model, extra={"algo": "pbt", "member": i, "selfplay_suc": suc})
            checkpoints.append(path)
    return PbtResult(members=members, exploit_events=exploit_events, checkpoints=checkpoints)


def _pbt_exploit(members: list[PbtMember], rng: np.random.Generator) -> list[dict]:
    """Bottom quartile copies parameters from a uniform top-quartile member."""
    k = len(members) // 4
    if k < 1:
        return []
    score = [float(np.mean(m.recent_returns)) if m.recent_returns else -np.inf for m in members]
    order = sorted(range(len(members)), key=lambda i: score[i])
    bottoms, tops = order[:k], order[-k:]
    events = []
    for b in bottoms:
        src = tops[int(rng.integers(0, len(tops)))]
        member, source = members[b], members[src]
        member.model = source.model.copy()
        member.opt = nn.adam_init(member.model.params(), lr=member.lr)
        member.lr = source.lr * float(rng.choice([0.8, 1.25]))
        member.entropy_coef = source.entropy_coef * float(rng.choice([0.8, 1.25]))
        member.recent_returns = list(source.recent_returns)
        events.append({"target": b, "source": src, "lr": member.lr, "entropy_coef": member.entropy_coef})
    return events
