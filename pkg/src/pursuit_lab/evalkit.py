"""Unseen-teammate zoos, the evaluation protocol, and metric computation.

An evaluation fills the first N pursuer slots with the policies under test
and the remaining M slots with per-episode uniform draws from a zoo. Episodes
run to terminal under deterministic (mean) actions; metrics aggregate into an
EvalReport with dispersion over seed blocks.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import nn, rl, sim, teammate
from .config import EnvConfig
from .seeding import substream

DEFAULT_EPISODES = 250
DEFAULT_SEED_BLOCKS = 5


@dataclass(frozen=True)
class ZooSpec:
    zoo_id: str  # "zoo1" | "zoo2" | "zoo3"
    members: tuple[str, ...]  # policy refs


@dataclass
class ZooAssets:
    """Everything build_zoo needs: scripted ids are implicit, self-play
    checkpoints carry their measured self-play success rate in the manifest."""

    sp_checkpoints: list[str] = field(default_factory=list)

    def checkpoint_sucs(self) -> list[tuple[str, float]]:
        out = []
        for path in self.sp_checkpoints:
            manifest, _ = nn.load_arrays(path)
            out.append((path, float(manifest["extra"].get("selfplay_suc", 0.0))))
        return out


def build_zoo(zoo_id: str, assets: ZooAssets) -> ZooSpec:
    """zoo1: greedy only; zoo2: the two self-play checkpoints with maximally
    separated recorded skill; zoo3: union of both."""
    if zoo_id == "zoo1":
        return ZooSpec(zoo_id="zoo1", members=("greedy",))
    if zoo_id in ("zoo2", "zoo3"):
        ranked = sorted(assets.checkpoint_sucs(), key=lambda pair: pair[1])
        if len(ranked) < 2:
            raise ValueError("zoo2 needs at least two self-play checkpoints with recorded SUC")
        weak, strong = ranked[0][0], ranked[-1][0]
        members = (f"ckpt:{strong}", f"ckpt:{weak}")
        if zoo_id == "zoo2":
            return ZooSpec(zoo_id="zoo2", members=members)
        return ZooSpec(zoo_id="zoo3", members=("greedy",) + members)
    raise ValueError(f"unknown zoo id {zoo_id!r} (expected zoo1, zoo2, or zoo3)")


# ---------------------------------------------------------------------------
# Policy references
# ---------------------------------------------------------------------------

def resolve_policy(ref: str, env_cfg: EnvConfig, deterministic: bool = True):
    """Turn a policy reference into a slot policy.

    Accepts scripted ids ("greedy", "vicsek", "random") and checkpoint refs
    ("ckpt:<path>" or a bare path to a checkpoint archive).
    """
    if ref == "greedy" or ref == "vicsek":
        return rl.ScriptedSlotPolicy(ref)
    if ref == "random":
        return rl.RandomSlotPolicy()
    path = ref[5:] if ref.startswith("ckpt:") else ref
    if not os.path.exists(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    kind = nn.checkpoint_kind(path)
    if kind == "actor_critic":
        model, manifest = rl.load_policy(path)
        _check_dims(manifest, env_cfg)
        return rl.NetSlotPolicy(model, deterministic=deterministic)
    if kind == "naht_d":
        model, manifest = teammate.load_naht(path)
        if manifest["extra"]["obs_dim"] != sim.obs_length(env_cfg):
            raise ValueError(
                f"checkpoint obs dim {manifest['extra']['obs_dim']} does not match env obs length {sim.obs_length(env_cfg)}"
            )
        boundary = (env_cfg.site.boundary_width, env_cfg.site.boundary_height)
        return teammate.NahtSlotPolicy(model, boundary, deterministic=deterministic)
    raise ValueError(f"unknown checkpoint kind {kind!r}")


def _check_dims(manifest: dict, env_cfg: EnvConfig) -> None:
    obs_dim = manifest["extra"]["obs_dim"]
    if obs_dim != sim.obs_length(env_cfg):
        raise ValueError(
            f"checkpoint obs dim {obs_dim} does not match env obs length {sim.obs_length(env_cfg)}"
        )


# ---------------------------------------------------------------------------
# Episodes and metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpisodeRecord:
    terminal: str
    steps: int
    episode_return: float
    seed_block: int
    index: int


def play_episode(env_cfg: EnvConfig, slot_policies, seed: int, evader_kind: str = "potential", log=None) -> EpisodeRecord:
    """Run one full episode with the given per-slot policies."""
    state, obs = sim.reset(env_cfg, seed, evader_kind=evader_kind)
    ep_rng = substream(seed, "policies")
    for pol in slot_policies:
        pol.begin_episode(ep_rng)
    if log is not None:
        log.record_reset(state)
    episode_return = 0.0
    while state.terminal == sim.RUNNING:
        actions = np.zeros(env_cfg.players.num_p)
        for i, pol in enumerate(slot_policies):
            view = sim.pursuer_view(state, i) if getattr(pol, "needs_view", False) else None
            actions[i] = pol.act(obs[i], view)
        out = sim.step(state, actions)
        if log is not None:
            log.record_step(state, actions, out)
        episode_return += out.reward
        obs = out.observations
    return EpisodeRecord(
        terminal=state.terminal,
        steps=state.step,
        episode_return=episode_return,
        seed_block=0,
        index=0,
    )


@dataclass
class EvalReport:
    suc: float  # % successful episodes
    col: int  # collision-terminated episode count
    ast: float | None  # mean steps over successes (None without a success)
    rew: float  # mean episode return
    col_pct: float
    timeout_pct: float
    suc_std: float | None
    col_std: float | None
    ast_std: float | None
    rew_std: float | None
    n_episodes: int
    seed_blocks: int
    seed: int

    def to_json(self) -> str:
        def r(x, nd=6):
            return None if x is None else round(float(x), nd)

        doc = {
            "suc": r(self.suc),
            "col": self.col,
            "ast": r(self.ast),
            "rew": r(self.rew),
            "col_pct": r(self.col_pct),
            "timeout_pct": r(self.timeout_pct),
            "suc_std": r(self.suc_std),
            "col_std": r(self.col_std),
            "ast_std": r(self.ast_std),
            "rew_std": r(self.rew_std),
            "n_episodes": self.n_episodes,
            "seed_blocks": self.seed_blocks,
            "seed": self.seed,
        }
        return json.dumps(doc, indent=2) + "\n"

    def write_csv(self, path) -> None:
        fields = [
            "suc", "col", "ast", "rew", "col_pct", "timeout_pct",
            "suc_std", "col_std", "ast_std", "rew_std",
            "n_episodes", "seed_blocks", "seed",
        ]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(fields)
            writer.writerow([getattr(self, f) if getattr(self, f) is not None else "" for f in fields])


def compute_metrics(records, seed: int = 0, seed_blocks: int | None = None) -> EvalReport:
    """SUC/COL/AST/REW over episode records, with std over seed blocks."""
    records = list(records)
    if not records:
        raise ValueError("no episode records")
    n = len(records)
    successes = [r for r in records if r.terminal == sim.SUCCESS]
    collisions = [r for r in records if r.terminal == sim.COLLISION]
    timeouts = [r for r in records if r.terminal == sim.TIMEOUT]
    suc = 100.0 * len(successes) / n
    col = len(collisions)
    ast = float(np.mean([r.steps for r in successes])) if successes else None
    rew = float(np.mean([r.episode_return for r in records]))

    blocks = sorted({r.seed_block for r in records})
    suc_b, col_b, ast_b, rew_b = [], [], [], []
    if seed_blocks is None:
        seed_blocks = len(blocks)
    if len(blocks) > 1:
        for b in blocks:
            sub = [r for r in records if r.seed_block == b]
            swins = [r for r in sub if r.terminal == sim.SUCCESS]
            suc_b.append(100.0 * len(swins) / len(sub))
            col_b.append(sum(r.terminal == sim.COLLISION for r in sub))
            rew_b.append(np.mean([r.episode_return for r in sub]))
            if swins:
                ast_b.append(np.mean([r.steps for r in swins]))
    return EvalReport(
        suc=suc,
        col=col,
        ast=ast,
        rew=rew,
        col_pct=100.0 * col / n,
        timeout_pct=100.0 * len(timeouts) / n,
        suc_std=float(np.std(suc_b)) if suc_b else None,
        col_std=float(np.std(col_b)) if col_b else None,
        ast_std=float(np.std(ast_b)) if ast_b else None,
        rew_std=float(np.std(rew_b)) if rew_b else None,
        n_episodes=n,
        seed_blocks=seed_blocks,
        seed=seed,
    )


def _eval_block(args) -> list[EpisodeRecord]:
    """One seed block of evaluation episodes (top-level for multiprocessing)."""
    learner_refs, zoo, env_cfg, block, episodes, seed, deterministic, evader_kind = args
    learners = [resolve_policy(ref, env_cfg, deterministic=deterministic) for ref in learner_refs]
    zoo_policies = (
        {ref: resolve_policy(ref, env_cfg, deterministic=deterministic) for ref in zoo.members}
        if zoo is not None
        else {}
    )
    records = []
    for e in range(episodes):
        ep_seed = int(substream(seed, "eval", block, e).integers(0, 2**63))
        zoo_rng = substream(seed, "zoo", block, e)
        slots = list(learners)
        for _ in range(env_cfg.players.num_unctrl):
            ref = zoo.members[int(zoo_rng.integers(0, len(zoo.members)))]
            slots.append(zoo_policies[ref])
        rec = play_episode(env_cfg, slots, ep_seed, evader_kind=evader_kind)
        records.append(
            EpisodeRecord(
                terminal=rec.terminal,
                steps=rec.steps,
                episode_return=rec.episode_return,
                seed_block=block,
                index=e,
            )
        )
    return records


def run_evaluation(
    learner_refs,
    zoo: ZooSpec | None,
    env_cfg: EnvConfig,
    n_episodes: int,
    seed: int,
    seed_blocks: int = DEFAULT_SEED_BLOCKS,
    deterministic: bool = True,
    evader_kind: str = "potential",
    jobs: int = 1,
) -> tuple[EvalReport, list[EpisodeRecord]]:
    """Evaluate learner policies (slots [0, N)) with zoo partners (slots [N, num_p)).

    `learner_refs` is a single policy ref or a list; a single ref is shared
    across all N learner slots. Zoo members are drawn independently per
    uncontrolled slot each episode. Everything is seeded: episode e of block b
    uses the (seed, "eval", b, e) substream, so results are identical for any
    `jobs` value (blocks just run in parallel processes when jobs > 1).
    """
    p = env_cfg.players
    if isinstance(learner_refs, str):
        learner_refs = [learner_refs] * p.num_ctrl
    if len(learner_refs) == 1 and p.num_ctrl > 1:
        learner_refs = list(learner_refs) * p.num_ctrl
    if len(learner_refs) != p.num_ctrl:
        raise ValueError(f"need {p.num_ctrl} learner slots, got {len(learner_refs)}")
    if p.num_unctrl > 0 and zoo is None:
        raise ValueError("uncontrolled slots present but no zoo given")
    for ref in learner_refs:
        resolve_policy(ref, env_cfg)  # fail fast on bad refs / dim mismatches

    per_block = [n_episodes // seed_blocks] * seed_blocks
    for i in range(n_episodes % seed_blocks):
        per_block[i] += 1
    tasks = [
        (list(learner_refs), zoo, env_cfg, b, per_block[b], seed, deterministic, evader_kind)
        for b in range(seed_blocks)
    ]
    if jobs > 1:
        import multiprocessing

        with multiprocessing.Pool(min(jobs, seed_blocks)) as pool:
            block_records = pool.map(_eval_block, tasks)
    else:
        block_records = [_eval_block(t) for t in tasks]
    records = [rec for block in block_records for rec in block]
    report = compute_metrics(records, seed=seed, seed_blocks=seed_blocks)
    return report, records
