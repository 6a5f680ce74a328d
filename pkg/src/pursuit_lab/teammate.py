"""Teammate modeling for ad-hoc teamwork: history encoder, action-distribution
decoder, and the NAHT-D trainer (centralized-critic PPO + embedding input +
KL reconstruction loss).

The encoder consumes a short history window per learner and emits a fixed
16-dim team embedding that is concatenated onto the actor input. Three branch
networks (evader states, self states + own action, teammate relative
positions) are mixed by learned softmax weights. The relative-position branch
applies one shared network per teammate row and mean-pools, so the embedding
is invariant to teammate slot order; consistently, the decoder predicts one
shared action distribution that is scored against every uncontrolled
teammate's observed action (a permutation-invariant embedding cannot identify
slots, so per-slot distinct predictions would be unidentifiable).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import nn, rl, sim
from .config import EnvConfig
from .seeding import substream

EMBED_DIM = 16
HISTORY_LENGTH = 1
RECON_TARGET_STD = 0.1
RECON_BETA = 0.1


@dataclass(frozen=True)
class WindowLayout:
    """Flat layout of one history step inside the encoder window.

    Per step: [per-evader triples | own pose (x, y, heading) | nearest
    obstacle triple | own previous action | per-teammate triples]. A window
    stacks `k` steps oldest-first and is zero-padded before k steps elapse.
    """

    num_e: int
    num_p: int
    k: int = HISTORY_LENGTH

    @property
    def evader_len(self) -> int:
        return 3 * self.num_e

    @property
    def self_len(self) -> int:
        return 3 + 3 + 1  # pose, obstacle triple, own action

    @property
    def rel_len(self) -> int:
        return 3 * (self.num_p - 1)

    @property
    def n_teammates(self) -> int:
        return self.num_p - 1

    @property
    def step_len(self) -> int:
        return self.evader_len + self.self_len + self.rel_len

    @property
    def window_len(self) -> int:
        return self.k * self.step_len

    def step_record(self, obs_row: np.ndarray, pose_xyh, action: float, boundary) -> np.ndarray:
        """Encode one completed step (observation, own pose, own action)."""
        ev = obs_row[: self.evader_len]
        obstacle = obs_row[self.evader_len : self.evader_len + 3]
        rel = obs_row[self.evader_len + 3 :]
        x, y, heading = pose_xyh
        w, h = boundary
        pose = np.array([2.0 * x / w - 1.0, 2.0 * y / h - 1.0, heading / np.pi])
        return np.concatenate([ev, pose, obstacle, [action], rel])

    def split_branches(self, windows: np.ndarray):
        """(evader input, self input, relpos rows) for a batch of windows.

        Relpos rows have shape (batch * n_teammates, k * 3): each teammate's
        whole history is one row for the shared branch network.
        """
        B = windows.shape[0]
        steps = windows.reshape(B, self.k, self.step_len)
        ev = steps[:, :, : self.evader_len].reshape(B, -1)
        sf = steps[:, :, self.evader_len : self.evader_len + self.self_len].reshape(B, -1)
        rel = steps[:, :, self.evader_len + self.self_len :].reshape(B, self.k, self.n_teammates, 3)
        rel_rows = rel.transpose(0, 2, 1, 3).reshape(B * self.n_teammates, self.k * 3)
        return ev, sf, rel_rows


class HistoryWindow:
    """Per-agent rolling window of the last k step records."""

    def __init__(self, layout: WindowLayout):
        self.layout = layout
        self.records: list[np.ndarray] = []

    def reset(self) -> None:
        self.records = []

    def push(self, record: np.ndarray) -> None:
        self.records.append(record)
        if len(self.records) > self.layout.k:
            self.records.pop(0)

    def vector(self) -> np.ndarray:
        k, step_len = self.layout.k, self.layout.step_len
        out = np.zeros(k * step_len)
        for i, rec in enumerate(self.records[-k:]):
            out[(k - len(self.records) + i) * step_len : (k - len(self.records) + i + 1) * step_len] = rec
        return out


# ---------------------------------------------------------------------------
# Encoder
# ---------------------------------------------------------------------------

@dataclass
class TeamEncoder:
    evader_net: nn.Mlp
    self_net: nn.Mlp
    relpos_net: nn.Mlp  # shared across teammate rows, mean-pooled
    mix_logits: np.ndarray  # (3,), softmax-normalized branch weights
    layout: WindowLayout
    embed_dim: int = EMBED_DIM

    def params(self) -> list[np.ndarray]:
        return (
            self.evader_net.arrays()
            + self.self_net.arrays()
            + self.relpos_net.arrays()
            + [self.mix_logits]
        )

    def copy(self) -> "TeamEncoder":
        return TeamEncoder(
            self.evader_net.copy(),
            self.self_net.copy(),
            self.relpos_net.copy(),
            self.mix_logits.copy(),
            self.layout,
            self.embed_dim,
        )


def init_encoder(layout: WindowLayout, rng, hidden: int = 128, embed_dim: int = EMBED_DIM, dtype=np.float32) -> TeamEncoder:
    return TeamEncoder(
        evader_net=nn.mlp_init([layout.k * layout.evader_len, hidden, embed_dim], rng, dtype=dtype),
        self_net=nn.mlp_init([layout.k * layout.self_len, hidden, embed_dim], rng, dtype=dtype),
        relpos_net=nn.mlp_init([layout.k * 3, hidden, embed_dim], rng, dtype=dtype),
        mix_logits=np.zeros(3, dtype=dtype),
        layout=layout,
        embed_dim=embed_dim,
    )


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z))
    return e / e.sum()


def encode(enc: TeamEncoder, windows: np.ndarray):
    """Team embedding for a batch of history windows. Returns (emb, cache)."""
    if windows.ndim == 1:
        windows = windows[None, :]
    B = windows.shape[0]
    R = enc.layout.n_teammates
    ev_in, sf_in, rel_rows = enc.layout.split_branches(windows)
    o_ev, c_ev = nn.mlp_forward(enc.evader_net, ev_in)
    o_sf, c_sf = nn.mlp_forward(enc.self_net, sf_in)
    o_rel_rows, c_rel = nn.mlp_forward(enc.relpos_net, rel_rows)
    o_rel = o_rel_rows.reshape(B, R, enc.embed_dim).mean(axis=1)
    w = softmax(enc.mix_logits)
    emb = w[0] * o_ev + w[1] * o_sf + w[2] * o_rel
    cache = (c_ev, c_sf, c_rel, o_ev, o_sf, o_rel, w, B, R)
    return emb, cache


def encode_backward(enc: TeamEncoder, cache, demb: np.ndarray) -> list[np.ndarray]:
    """Gradients of a scalar loss wrt encoder params, given d(loss)/d(embedding)."""
    c_ev, c_sf, c_rel, o_ev, o_sf, o_rel, w, B, R = cache
    g_ev, _ = nn.mlp_backward(enc.evader_net, c_ev, w[0] * demb)
    g_sf, _ = nn.mlp_backward(enc.self_net, c_sf, w[1] * demb)
    drel_rows = np.repeat(w[2] * demb / R, R, axis=0)
    g_rel, _ = nn.mlp_backward(enc.relpos_net, c_rel, drel_rows)
    # softmax mixing: dz_b = sum_i w_b * (s_b,i - sum_c w_c s_c,i)
    s = np.stack(
        [np.sum(demb * o_ev, axis=1), np.sum(demb * o_sf, axis=1), np.sum(demb * o_rel, axis=1)]
    )  # (3, B)
    weighted = np.sum(w[:, None] * s, axis=0)  # (B,)
    dz = np.sum(w[:, None] * (s - weighted[None, :]), axis=1).astype(enc.mix_logits.dtype)
    return g_ev + g_sf + g_rel + [dz]


# ---------------------------------------------------------------------------
# Decoder and reconstruction loss
# ---------------------------------------------------------------------------

@dataclass
class TeamDecoder:
    """Predicts the uncontrolled teammates' action distribution from the embedding.

    One shared Gaussian head; its output is broadcast over the teammate slots
    (see the module docstring for why the head is shared).
    """

    net: nn.Mlp  # embed -> hidden -> (mean, log_std)

    def params(self) -> list[np.ndarray]:
        return self.net.arrays()

    def copy(self) -> "TeamDecoder":
        return TeamDecoder(self.net.copy())


def init_decoder(embed_dim: int, rng, hidden: int = 64, dtype=np.float32) -> TeamDecoder:
    return TeamDecoder(net=nn.mlp_init([embed_dim, hidden, 2], rng, dtype=dtype))


def decoder_predict(dec: TeamDecoder, emb: np.ndarray, n_teammates: int):
    """(means, log_stds) with shape (batch, n_teammates): shared head, tiled."""
    out, cache = nn.mlp_forward(dec.net, emb)
    mean = np.repeat(out[:, :1], n_teammates, axis=1)
    log_std = np.repeat(nn.clamp_log_std(out[:, 1:2]), n_teammates, axis=1)
    return mean, log_std, cache


def reconstruction_loss(dec: TeamDecoder, emb: np.ndarray, teammate_actions: np.ndarray, target_std: float = RECON_TARGET_STD):
    """Mean KL(target || predicted) over teammates and batch.

    The target for each teammate is a Gaussian centered on its observed
    action with fixed std `target_std`. Returns (loss, grads wrt decoder
    params, d(loss)/d(embedding)).
    """
    if emb.ndim == 1:
        emb = emb[None, :]
    if teammate_actions.ndim == 1:
        teammate_actions = teammate_actions[None, :]
    B, M = teammate_actions.shape
    out, cache = nn.mlp_forward(dec.net, emb)
    mu = out[:, 0:1]  # (B, 1) shared prediction
    raw_ls = out[:, 1:2]
    ls = nn.clamp_log_std(raw_ls)
    var = np.exp(2.0 * ls)
    diff = teammate_actions - mu  # (B, M) broadcast
    per = ls - np.log(target_std) + (target_std**2 + diff**2) / (2.0 * var) - 0.5
    loss = float(np.mean(per))

    dmu = np.sum(-diff / var, axis=1, keepdims=True) / (B * M)
    dls_raw = np.sum(1.0 - (target_std**2 + diff**2) / var, axis=1, keepdims=True) / (B * M)
    dls = dls_raw * nn.log_std_grad_mask(raw_ls)
    dout = np.concatenate([dmu, dls], axis=1).astype(out.dtype)
    grads, demb = nn.mlp_backward(dec.net, cache, dout)
    return loss, grads, demb


# ---------------------------------------------------------------------------
# NAHT-D model
# ---------------------------------------------------------------------------

@dataclass
class NahtModel:
    ac: rl.ActorCritic  # actor input = obs + embedding; critic is centralized
    encoder: TeamEncoder
    decoder: TeamDecoder | None
    obs_dim: int
    embed_dim: int

    def params(self) -> list[np.ndarray]:
        out = self.ac.params() + self.encoder.params()
        if self.decoder is not None:
            out += self.decoder.params()
        return out

    def copy(self) -> "NahtModel":
        return NahtModel(
            ac=self.ac.copy(),
            encoder=self.encoder.copy(),
            decoder=self.decoder.copy() if self.decoder else None,
            obs_dim=self.obs_dim,
            embed_dim=self.embed_dim,
        )

    def actor_input(self, obs: np.ndarray, emb: np.ndarray) -> np.ndarray:
        return np.concatenate([obs, emb], axis=1)


def init_naht_model(
    env_cfg: EnvConfig,
    cfg: rl.PpoConfig,
    rng,
    k: int = HISTORY_LENGTH,
    embed_dim: int = EMBED_DIM,
    no_decoder: bool = False,
    dtype=np.float32,
) -> NahtModel:
    obs_dim = sim.obs_length(env_cfg)
    layout = WindowLayout(num_e=env_cfg.players.num_e, num_p=env_cfg.players.num_p, k=k)
    critic_dim = sim.central_obs_length(env_cfg, env_cfg.players.num_ctrl)
    ac = rl.init_actor_critic(obs_dim + embed_dim, critic_dim, cfg, rng)
    ac.obs_dim = obs_dim + embed_dim
    encoder = init_encoder(layout, rng, embed_dim=embed_dim, dtype=dtype)
    decoder = None if no_decoder else init_decoder(embed_dim, rng, dtype=dtype)
    return NahtModel(ac=ac, encoder=encoder, decoder=decoder, obs_dim=obs_dim, embed_dim=embed_dim)


# ---------------------------------------------------------------------------
# Joint update
# ---------------------------------------------------------------------------

@dataclass
class NahtBatch:
    base: rl.PpoBatch  # actor_in holds raw observations (no embedding)
    windows: np.ndarray  # (B, window_len)
    teammate_actions: np.ndarray  # (B, M)


def naht_loss_and_grads(model: NahtModel, mb: NahtBatch, idx, cfg: rl.PpoConfig, beta: float, zero_embedding: bool = False):
    """Joint PPO + beta * reconstruction loss over one minibatch of indices."""
    obs = mb.base.actor_in[idx]
    windows = mb.windows[idx]
    if zero_embedding:
        emb = np.zeros((obs.shape[0], model.embed_dim))
        enc_cache = None
    else:
        emb, enc_cache = encode(model.encoder, windows)
    actor_in = model.actor_input(obs, emb)
    ac_grads, dactor_in, diag = rl.ppo_loss_and_grads(
        model.ac,
        actor_in,
        mb.base.critic_in[idx],
        mb.base.actions[idx],
        mb.base.old_logp[idx],
        mb.base.advantages[idx],
        mb.base.returns[idx],
        cfg,
    )
    demb = dactor_in[:, model.obs_dim :]
    recon = 0.0
    dec_grads = None
    if model.decoder is not None:
        recon, dec_grads, demb_rec = reconstruction_loss(model.decoder, emb, mb.teammate_actions[idx])
        demb = demb + beta * demb_rec
    if zero_embedding:
        enc_grads = [np.zeros_like(p) for p in model.encoder.params()]
    else:
        enc_grads = encode_backward(model.encoder, enc_cache, demb)
    grads = ac_grads + enc_grads
    if model.decoder is not None:
        grads += [beta * g for g in dec_grads]
    diag = dict(diag)
    diag["recon_loss"] = float(recon)
    diag["loss"] = diag["loss"] + beta * float(recon)
    return grads, diag


def naht_update(
    model: NahtModel,
    opt: nn.AdamState,
    batch: NahtBatch,
    cfg: rl.PpoConfig,
    rng: np.random.Generator,
    beta: float = RECON_BETA,
    zero_embedding: bool = False,
):
    adv = rl.normalize_advantages(batch.base.advantages)
    normalized = rl.PpoBatch(
        actor_in=batch.base.actor_in,
        critic_in=batch.base.critic_in,
        actions=batch.base.actions,
        old_logp=batch.base.old_logp,
        advantages=adv,
        returns=batch.base.returns,
    )
    nb = NahtBatch(base=normalized, windows=batch.windows, teammate_actions=batch.teammate_actions)
    idx = np.arange(len(batch.base))
    diags = []
    for _epoch in range(cfg.epochs):
        rng.shuffle(idx)
        for start in range(0, len(idx), cfg.minibatch):
            mb_idx = idx[start : start + cfg.minibatch]
            grads, diag = naht_loss_and_grads(model, nb, mb_idx, cfg, beta, zero_embedding)
            if not np.isfinite(diag["loss"]):
                raise FloatingPointError("non-finite NAHT-D loss")
            nn.adam_step(opt, model.params(), grads)
            diags.append(diag)
    keys = ("pi_loss", "v_loss", "entropy", "clip_frac", "approx_kl", "loss", "recon_loss")
    return {k: float(np.mean([d[k] for d in diags])) for k in keys}


# ---------------------------------------------------------------------------
# Rollout collection with histories
# ---------------------------------------------------------------------------

class NahtCollector:
    """Rollout collector for NAHT-D: embedding-conditioned actor, centralized
    critic, per-learner history windows, observed teammate actions."""

    def __init__(self, env_cfg: EnvConfig, model: NahtModel, cfg: rl.PpoConfig, rng, teammates):
        if env_cfg.players.num_unctrl < 1:
            raise ValueError("NAHT-D needs at least one uncontrolled teammate slot")
        self.env_cfg = env_cfg
        self.model = model
        self.cfg = cfg
        self.rng = rng
        self.teammates = teammates
        self.n_learners = env_cfg.players.num_ctrl
        self.layout = model.encoder.layout
        self.state = None
        self._episode_reward = 0.0
        self._windows = [HistoryWindow(self.layout) for _ in range(self.n_learners)]
        self._slot_policies = []

    def _begin_episode(self):
        seed = int(self.rng.integers(0, 2**63))
        self.state, obs = sim.reset(self.env_cfg, seed)
        self._episode_reward = 0.0
        for w in self._windows:
            w.reset()
        self._slot_policies = self.teammates.sample(self.rng)
        for pol in self._slot_policies:
            pol.begin_episode(self.rng)
        return obs

    def collect(self, n_transitions: int):
        cfg, model = self.cfg, self.model
        stats = rl.RolloutStats()
        obs_rows, critic_rows, act_rows, logp_rows = [], [], [], []
        win_rows, mate_rows, value_rows, reward_rows, term_rows = [], [], [], [], []
        seg_bounds = []
        seg_start = 0
        steps_needed = -(-n_transitions // self.n_learners)

        if self.state is None or self.state.terminal != sim.RUNNING:
            obs = self._begin_episode()
        else:
            obs = sim.observe_all(self.state)

        for step_i in range(steps_needed):
            learner_obs = obs[: self.n_learners]
            windows = np.stack([w.vector() for w in self._windows])
            emb, _ = encode(model.encoder, windows)
            actor_in = model.actor_input(learner_obs, emb)
            mean = model.ac.action_mean(actor_in)
            actions = nn.gaussian_sample(mean, model.ac.log_std, self.rng)
            logp = nn.gaussian_log_prob(mean, model.ac.log_std, actions)

            central = sim.central_observation(self.state, range(self.n_learners))[None, :]
            value = float(model.ac.values(central)[0])

            all_actions = np.zeros(self.env_cfg.players.num_p)
            all_actions[: self.n_learners] = actions[:, 0]
            for k, pol in enumerate(self._slot_policies):
                slot = self.n_learners + k
                view = sim.pursuer_view(self.state, slot) if getattr(pol, "needs_view", False) else None
                all_actions[slot] = pol.act(obs[slot], view)
            poses = [tuple(self.state.pursuers[i]) for i in range(self.n_learners)]

            out = sim.step(self.state, all_actions)
            self._episode_reward += out.reward

            boundary = (self.env_cfg.site.boundary_width, self.env_cfg.site.boundary_height)
            for i in range(self.n_learners):
                self._windows[i].push(
                    self.layout.step_record(learner_obs[i], poses[i], float(all_actions[i]), boundary)
                )

            obs_rows.append(learner_obs)
            win_rows.append(windows)
            act_rows.append(actions)
            logp_rows.append(logp)
            critic_rows.append(np.repeat(central, self.n_learners, axis=0))
            value_rows.append(np.full(self.n_learners, value))
            mate_rows.append(np.tile(all_actions[self.n_learners :], (self.n_learners, 1)))
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
            central = sim.central_observation(self.state, range(self.n_learners))[None, :]
            seg_bounds.append((seg_start, steps_needed, float(model.ac.values(central)[0])))

        rewards = np.asarray(reward_rows)
        terminals = np.asarray(term_rows)
        value_cache = np.stack(value_rows)
        adv_rows = np.zeros((steps_needed, self.n_learners))
        ret_rows = np.zeros((steps_needed, self.n_learners))
        for slot in range(self.n_learners):
            for start, end, bootstrap in seg_bounds:
                adv, ret = rl.compute_gae(
                    rewards[start:end],
                    value_cache[start:end, slot],
                    terminals[start:end],
                    cfg.gamma,
                    cfg.gae_lambda,
                    bootstrap_value=bootstrap,
                )
                adv_rows[start:end, slot] = adv
                ret_rows[start:end, slot] = ret

        base = rl.PpoBatch(
            actor_in=np.concatenate(obs_rows, axis=0),
            critic_in=np.concatenate(critic_rows, axis=0),
            actions=np.concatenate(act_rows, axis=0),
            old_logp=np.concatenate(logp_rows, axis=0),
            advantages=adv_rows.reshape(-1),
            returns=ret_rows.reshape(-1),
        )
        batch = NahtBatch(
            base=base,
            windows=np.concatenate(win_rows, axis=0),
            teammate_actions=np.concatenate(mate_rows, axis=0),
        )
        return batch, stats


# ---------------------------------------------------------------------------
# Trainer and checkpointing
# ---------------------------------------------------------------------------

def naht_d_train(
    cfg: rl.PpoConfig,
    env_cfg: EnvConfig,
    teammate_pool,
    seed: int,
    beta: float = RECON_BETA,
    no_decoder: bool = False,
    k: int = HISTORY_LENGTH,
    out_dir=None,
    total_steps: int | None = None,
) -> rl.TrainResult:
    """Train NAHT-D against a pool of teammate policies.

    Each episode fills the uncontrolled slots with independent uniform draws
    from `teammate_pool`. `no_decoder=True` is the published ablation: the
    decoder and its reconstruction term are removed entirely.
    """
    if not teammate_pool:
        raise ValueError("teammate pool must be nonempty")
    cfg.validate()
    total = total_steps if total_steps is not None else cfg.total_steps
    n_updates = max(1, int(np.ceil(total / cfg.batch)))
    model = init_naht_model(env_cfg, cfg, substream(seed, "init"), k=k, no_decoder=no_decoder)
    opt = nn.adam_init(model.params(), lr=cfg.lr)
    teammates = rl.UniformTeammates(teammate_pool, env_cfg.players.num_unctrl)
    collector = NahtCollector(env_cfg, model, cfg, substream(seed, "rollout"), teammates)
    update_rng = substream(seed, "update")
    window = rl.RolloutStats()
    metrics, checkpoints = [], []
    ckpt_every = max(1, n_updates // 5)
    for update in range(n_updates):
        batch, stats = collector.collect(cfg.batch)
        window.episode_returns += stats.episode_returns
        window.episode_lengths += stats.episode_lengths
        window.episode_terminals += stats.episode_terminals
        diag = naht_update(model, opt, batch, cfg, update_rng, beta=beta)
        step_count = (update + 1) * cfg.batch
        row = rl._metrics_row(step_count, update, window, diag, recon_loss=diag["recon_loss"])
        metrics.append(row)
        if out_dir is not None and (update + 1) % ckpt_every == 0:
            os.makedirs(out_dir, exist_ok=True)
            path = os.path.join(out_dir, f"naht_{step_count:09d}.zip")
            save_naht(path, model, extra={"step": step_count})
            checkpoints.append(path)
    final_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        final_path = os.path.join(out_dir, "final.zip")
        algo = "naht-d-nodec" if no_decoder else "naht-d"
        save_naht(final_path, model, extra={"algo": algo, "seed": seed, "beta": beta})
        checkpoints.append(final_path)
    result = rl.TrainResult(model=model, metrics=metrics, checkpoints=checkpoints, final_path=final_path)
    return result


def save_naht(path, model: NahtModel, extra: dict | None = None) -> None:
    named = rl._named_mlp_arrays("actor", model.ac.actor) + [("log_std", model.ac.log_std)]
    named += rl._named_mlp_arrays("critic", model.ac.critic)
    named += rl._named_mlp_arrays("enc_evader", model.encoder.evader_net)
    named += rl._named_mlp_arrays("enc_self", model.encoder.self_net)
    named += rl._named_mlp_arrays("enc_relpos", model.encoder.relpos_net)
    named += [("mix_logits", model.encoder.mix_logits)]
    if model.decoder is not None:
        named += rl._named_mlp_arrays("decoder", model.decoder.net)
    layout = model.encoder.layout
    meta = {
        "obs_dim": model.obs_dim,
        "embed_dim": model.embed_dim,
        "act_dim": model.ac.act_dim,
        "critic_in_dim": model.ac.critic_in_dim,
        "actor_layers": len(model.ac.actor.weights),
        "critic_layers": len(model.ac.critic.weights),
        "encoder_layers": len(model.encoder.evader_net.weights),
        "decoder_layers": len(model.decoder.net.weights) if model.decoder else 0,
        "has_decoder": model.decoder is not None,
        "num_e": layout.num_e,
        "num_p": layout.num_p,
        "history_k": layout.k,
    }
    meta.update(extra or {})
    nn.save_arrays(path, "naht_d", named, extra=meta)


def load_naht(path) -> tuple[NahtModel, dict]:
    manifest, arrays = nn.load_arrays(path)
    if manifest["kind"] != "naht_d":
        raise ValueError(f"checkpoint kind {manifest['kind']!r} is not naht_d")
    meta = manifest["extra"]
    layout = WindowLayout(num_e=meta["num_e"], num_p=meta["num_p"], k=meta["history_k"])
    ac = rl.ActorCritic(
        actor=rl._mlp_from_arrays("actor", arrays, meta["actor_layers"]),
        log_std=arrays["log_std"].copy(),
        critic=rl._mlp_from_arrays("critic", arrays, meta["critic_layers"]),
        obs_dim=meta["obs_dim"] + meta["embed_dim"],
        act_dim=meta["act_dim"],
        critic_in_dim=meta["critic_in_dim"],
    )
    encoder = TeamEncoder(
        evader_net=rl._mlp_from_arrays("enc_evader", arrays, meta["encoder_layers"]),
        self_net=rl._mlp_from_arrays("enc_self", arrays, meta["encoder_layers"]),
        relpos_net=rl._mlp_from_arrays("enc_relpos", arrays, meta["encoder_layers"]),
        mix_logits=arrays["mix_logits"].copy(),
        layout=layout,
        embed_dim=meta["embed_dim"],
    )
    decoder = TeamDecoder(rl._mlp_from_arrays("decoder", arrays, meta["decoder_layers"])) if meta["has_decoder"] else None
    model = NahtModel(ac=ac, encoder=encoder, decoder=decoder, obs_dim=meta["obs_dim"], embed_dim=meta["embed_dim"])
    return model, manifest


class NahtSlotPolicy:
    """Runs a NAHT-D checkpoint in one pursuer slot (history kept internally)."""

    needs_view = True

    def __init__(self, model: NahtModel, boundary: tuple[float, float], deterministic: bool = True):
        self.model = model
        self.boundary = boundary
        self.deterministic = deterministic
        self.window = HistoryWindow(model.encoder.layout)
        self._rng = np.random.default_rng(0)

    def begin_episode(self, rng: np.random.Generator) -> None:
        self.window.reset()
        self._rng = np.random.default_rng(rng.integers(0, 2**63))

    def act(self, obs_row, view) -> float:
        emb, _ = encode(self.model.encoder, self.window.vector()[None, :])
        actor_in = self.model.actor_input(obs_row[None, :], emb)
        actions, _ = self.model.ac.act(actor_in, self._rng, deterministic=self.deterministic)
        action = float(actions[0, 0])
        record = self.model.encoder.layout.step_record(
            obs_row, (view.x, view.y, view.heading), action, self.boundary
        )
        self.window.push(record)
        return action
