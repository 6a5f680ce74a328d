"""Hypergraph population training: preference centrality and the max-min loop.

A population of pursuer strategies interacts through full teams (hyperedges
of N learner slots plus M partner slots). Each generation: snapshot the
trainee into the population, score every learner-connected hyperedge by mean
episode return, derive the preference hypergraph (each node keeps only its
best incident edge), convert preference centrality into a mixed strategy over
partner subsets that up-weights the least-preferred partners, and train the
learners as an approximate best response against partners sampled from it.
The "no-hypergraph" ablation replaces that mixed strategy with the uniform
distribution over partner subsets.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from . import nn, rl, sim
from .config import EnvConfig, with_control_split
from .seeding import substream

MIN_STEP_EPSILON = 0.01
EDGE_EPISODES_DEFAULT = 20


@dataclass(frozen=True)
class Hypergraph:
    """Weighted hypergraph: nodes are strategy ids, edges are member tuples.

    Edge tuples are canonical (sorted, multiplicity preserved); weights map
    each edge tuple to its mean outcome.
    """

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, ...], ...]
    weights: dict[tuple[str, ...], float]

    def incident(self, node: str) -> list[tuple[str, ...]]:
        return [e for e in self.edges if node in e]

    def degree(self, node: str) -> int:
        return len(self.incident(node))


@dataclass(frozen=True)
class PreferenceHypergraph:
    """Per node, the single maximum-weight incident hyperedge."""

    nodes: tuple[str, ...]
    outgoing: dict[str, tuple[str, ...]]


@dataclass(frozen=True)
class MixedStrategy:
    """Distribution over partner subsets (each a sorted tuple of node ids)."""

    support: tuple[tuple[str, ...], ...]
    probs: np.ndarray

    def sample(self, rng: np.random.Generator) -> tuple[str, ...]:
        return self.support[int(rng.choice(len(self.support), p=self.probs))]


def canonical_edge(members) -> tuple[str, ...]:
    return tuple(sorted(members))


def build_preference_hypergraph(g: Hypergraph) -> PreferenceHypergraph:
    """Keep each node's highest-weight incident edge; lexicographic tie-break."""
    outgoing: dict[str, tuple[str, ...]] = {}
    for node in g.nodes:
        incident = g.incident(node)
        if not incident:
            raise ValueError(f"node {node!r} is isolated (no incident hyperedge)")
        outgoing[node] = min(incident, key=lambda e: (-g.weights[e], e))
    return PreferenceHypergraph(nodes=g.nodes, outgoing=outgoing)


def incoming_degree(pg: PreferenceHypergraph, node: str) -> int:
    """How many *other* nodes' outgoing edges contain this node."""
    return sum(1 for other, edge in pg.outgoing.items() if other != node and node in edge)


def preference_centrality(pg: PreferenceHypergraph, g: Hypergraph, node: str) -> float:
    """Incoming preference degree over plain graph degree."""
    d_g = g.degree(node)
    if d_g == 0:
        raise ValueError(f"node {node!r} has zero degree in the hypergraph")
    return incoming_degree(pg, node) / d_g


def sum_centrality(pg: PreferenceHypergraph, g: Hypergraph, nodes) -> float:
    return sum(preference_centrality(pg, g, n) for n in nodes)


def is_preference_optimal(g: Hypergraph, candidate: tuple[str, ...]) -> bool:
    """Exhaustive check that `candidate` maximizes summed preference centrality
    over all same-size node subsets. Test/analysis helper, not a training path."""
    pg = build_preference_hypergraph(g)
    target = sum_centrality(pg, g, candidate)
    n = len(candidate)
    return all(
        target >= sum_centrality(pg, g, subset) - 1e-12
        for subset in combinations(g.nodes, n)
    )


def min_step_solve(subsets, centralities: dict[str, float], epsilon: float = MIN_STEP_EPSILON) -> MixedStrategy:
    """Mixed strategy over partner subsets: probability proportional to the
    reciprocal of the subset's mean member centrality (worse partners first)."""
    support = tuple(canonical_edge(s) for s in subsets)
    if not support:
        raise ValueError("empty support")
    scores = np.array([np.mean([centralities[m] for m in s]) for s in support])
    raw = 1.0 / (scores + epsilon)
    return MixedStrategy(support=support, probs=raw / raw.sum())


def uniform_strategy(subsets) -> MixedStrategy:
    support = tuple(canonical_edge(s) for s in subsets)
    if not support:
        raise ValueError("empty support")
    return MixedStrategy(support=support, probs=np.full(len(support), 1.0 / len(support)))


# ---------------------------------------------------------------------------
# Population state over executable policies
# ---------------------------------------------------------------------------

@dataclass
class PopulationState:
    """Generation t of the open-ended loop.

    `policies` maps node ids to slot-policy objects (scripted wrappers or
    frozen nets). The trainee occupies all N learner slots; its node id is in
    `learner_set`, everything else is the non-learner pool.
    """

    generation: int
    policies: dict[str, object]
    learner_set: tuple[str, ...]
    learner_model: rl.ActorCritic
    weight_cache: dict = field(default_factory=dict)

    @property
    def non_learners(self) -> tuple[str, ...]:
        learners = set(self.learner_set)
        return tuple(sorted(n for n in self.policies if n not in learners))


def estimate_edge_weight(
    edge_policies,
    env_cfg: EnvConfig,
    episodes: int,
    seed: int,
    cache: dict | None = None,
    cache_key=None,
) -> float:
    """Mean episode return of a full pursuer team over seeded episodes.

    `edge_policies` fills the pursuer slots in order; the result is cached by
    `cache_key` when a cache is supplied.
    """
    if cache is not None and cache_key is not None and cache_key in cache:
        return cache[cache_key]
    if len(edge_policies) != env_cfg.players.num_p:
        raise ValueError("edge policies must fill every pursuer slot")
    rng = substream(seed, "edge-weight")
    total = 0.0
    for _ in range(episodes):
        total += _play_team_episode(edge_policies, env_cfg, int(rng.integers(0, 2**63)))
    weight = total / episodes
    if cache is not None and cache_key is not None:
        cache[cache_key] = weight
    return weight


def _play_team_episode(slot_policies, env_cfg: EnvConfig, seed: int) -> float:
    state, obs = sim.reset(env_cfg, seed)
    ep_rng = substream(seed, "policies")
    for pol in slot_policies:
        pol.begin_episode(ep_rng)
    episode_return = 0.0
    while state.terminal == sim.RUNNING:
        actions = np.zeros(env_cfg.players.num_p)
        for i, pol in enumerate(slot_policies):
            view = sim.pursuer_view(state, i) if getattr(pol, "needs_view", False) else None
            actions[i] = pol.act(obs[i], view)
        out = sim.step(state, actions)
        episode_return += out.reward
        obs = out.observations
    return episode_return


def build_learner_subgraph(
    pop: PopulationState,
    env_cfg: EnvConfig,
    episodes: int = EDGE_EPISODES_DEFAULT,
    seed: int = 0,
) -> Hypergraph:
    """Hyperedges joining the learner set with every M-combination of
    non-learners, weighted by mean episode return."""
    m = env_cfg.players.num_unctrl
    n = env_cfg.players.num_ctrl
    non_learners = pop.non_learners
    if len(non_learners) < m:
        raise ValueError(f"need at least {m} non-learners, have {len(non_learners)}")
    nodes = tuple(sorted(set(pop.learner_set) | set(non_learners)))
    # learner slots cycle through the learner set (a single shared trainee
    # simply repeats, keeping every hyperedge at N + M member slots)
    learner_members = tuple(pop.learner_set[i % len(pop.learner_set)] for i in range(n))
    edges = []
    weights = {}
    learner_policy = rl.NetSlotPolicy(pop.learner_model, deterministic=True)
    for combo in combinations(non_learners, m):
        edge = canonical_edge(learner_members + combo)
        slot_policies = [learner_policy] * n
        slot_policies += [pop.policies[name] for name in combo]
        key = (edge, pop.generation)
        weights[edge] = estimate_edge_weight(
            slot_policies, env_cfg, episodes, seed, cache=pop.weight_cache, cache_key=key
        )
        edges.append(edge)
    return Hypergraph(nodes=nodes, edges=tuple(edges), weights=weights)


def partner_strategy(
    g: Hypergraph,
    pop: PopulationState,
    env_cfg: EnvConfig,
    epsilon: float = MIN_STEP_EPSILON,
    uniform: bool = False,
) -> tuple[MixedStrategy, dict[str, float]]:
    """Min-step output: mixed strategy over M-subsets of the non-learner pool."""
    pg = build_preference_hypergraph(g)
    centralities = {node: preference_centrality(pg, g, node) for node in g.nodes}
    subsets = list(combinations(pop.non_learners, env_cfg.players.num_unctrl))
    if uniform:
        return uniform_strategy(subsets), centralities
    return min_step_solve(subsets, centralities, epsilon), centralities


class MixtureTeammates:
    """Teammate sampler that draws a partner subset from a mixed strategy."""

    def __init__(self, strategy: MixedStrategy, policies: dict[str, object]):
        self.strategy = strategy
        self.policies = policies

    def sample(self, rng: np.random.Generator):
        subset = self.strategy.sample(rng)
        return [self.policies[name] for name in subset]


def max_step_train(
    pop: PopulationState,
    strategy: MixedStrategy,
    ppo_cfg: rl.PpoConfig,
    env_cfg: EnvConfig,
    budget: int,
    seed: int,
) -> list[dict]:
    """Approximate best response: PPO against partners drawn from `strategy`.

    Mutates the trainee in place; returns the training metrics rows. A zero
    budget is a no-op.
    """
    if budget <= 0:
        return []
    teammates = MixtureTeammates(strategy, pop.policies)
    result = rl.train_loop(
        env_cfg,
        pop.learner_model,
        ppo_cfg,
        seed,
        teammates=teammates,
        total_steps=budget,
    )
    return result.metrics


@dataclass
class GenerationReport:
    generation: int
    population: tuple[str, ...]
    edge_weights: dict[tuple[str, ...], float]
    centralities: dict[str, float]
    strategy: MixedStrategy
    metrics: list[dict]

    def to_json(self) -> str:
        doc = {
            "generation": self.generation,
            "population": list(self.population),
            "edge_weights": [
                {"edge": list(edge), "weight": w} for edge, w in sorted(self.edge_weights.items())
            ],
            "preference_centrality": dict(sorted(self.centralities.items())),
            "strategy": {
                "support": [list(s) for s in self.strategy.support],
                "probs": [float(p) for p in self.strategy.probs],
            },
            "n_training_updates": len(self.metrics),
        }
        return json.dumps(doc, indent=2)


def hola_generation(
    pop: PopulationState,
    env_cfg: EnvConfig,
    ppo_cfg: rl.PpoConfig,
    gen_budget: int,
    seed: int,
    episodes_per_edge: int = EDGE_EPISODES_DEFAULT,
    epsilon: float = MIN_STEP_EPSILON,
    uniform_rho: bool = False,
) -> tuple[PopulationState, GenerationReport]:
    """One open-ended generation: snapshot, re-score, min-step, max-step."""
    t = pop.generation
    snapshot_id = f"gen{t}_snapshot"
    snapshot = rl.NetSlotPolicy(pop.learner_model.copy(), deterministic=True)
    policies = dict(pop.policies)
    policies[snapshot_id] = snapshot

    grown = PopulationState(
        generation=t + 1,
        policies=policies,
        learner_set=pop.learner_set,
        learner_model=pop.learner_model,
        weight_cache=pop.weight_cache,
    )
    g = build_learner_subgraph(grown, env_cfg, episodes=episodes_per_edge, seed=seed)
    strategy, centralities = partner_strategy(g, grown, env_cfg, epsilon=epsilon, uniform=uniform_rho)
    metrics = max_step_train(grown, strategy, ppo_cfg, env_cfg, gen_budget, substream_seed_int(seed, "max-step", t))
    report = GenerationReport(
        generation=t + 1,
        population=tuple(sorted(policies)),
        edge_weights=g.weights,
        centralities=centralities,
        strategy=strategy,
        metrics=metrics,
    )
    return grown, report


def substream_seed_int(seed: int, *parts) -> int:
    return int(substream(seed, *parts).integers(0, 2**63))


def init_population(
    env_cfg: EnvConfig,
    ppo_cfg: rl.PpoConfig,
    seed: int,
    sp_budget: int = 50_000,
) -> PopulationState:
    """Seed population: greedy, vicsek, and two short-trained self-play nets."""
    policies: dict[str, object] = {
        "greedy": rl.ScriptedSlotPolicy("greedy"),
        "vicsek": rl.ScriptedSlotPolicy("vicsek"),
    }
    for i in range(2):
        res = rl.ippo_selfplay_train(
            replace(ppo_cfg, total_steps=sp_budget), env_cfg, substream_seed_int(seed, "init-sp", i)
        )
        policies[f"sp_seed{i}"] = rl.NetSlotPolicy(res.model, deterministic=True)
    obs_dim = sim.obs_length(env_cfg)
    learner = rl.init_actor_critic(obs_dim, obs_dim, ppo_cfg, substream(seed, "learner-init"))
    return PopulationState(
        generation=0,
        policies=policies,
        learner_set=("learner",),
        learner_model=learner,
    )


def hola_train(
    ppo_cfg: rl.PpoConfig,
    env_cfg: EnvConfig,
    seed: int,
    generations: int = 5,
    gen_budget: int = 200_000,
    sp_budget: int = 50_000,
    episodes_per_edge: int = EDGE_EPISODES_DEFAULT,
    uniform_rho: bool = False,
    out_dir=None,
) -> tuple[rl.ActorCritic, list[GenerationReport]]:
    """Full HOLA loop; `uniform_rho=True` is the no-hypergraph ablation."""
    if env_cfg.players.num_unctrl < 1:
        raise ValueError("hola_train needs uncontrolled teammate slots (num_unctrl >= 1)")
    pop = init_population(env_cfg, ppo_cfg, seed, sp_budget=sp_budget)
    reports = []
    for _ in range(generations):
        pop, report = hola_generation(
            pop,
            env_cfg,
            ppo_cfg,
            gen_budget,
            seed,
            episodes_per_edge=episodes_per_edge,
            uniform_rho=uniform_rho,
        )
        reports.append(report)
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, f"generation_{report.generation:03d}.json"), "w") as fh:
                fh.write(report.to_json() + "\n")
    if out_dir is not None:
        suc = rl.evaluate_selfplay_suc(pop.learner_model, env_cfg, seed)
        algo = "hola-nog" if uniform_rho else "hola"
        rl.save_policy(
            os.path.join(out_dir, "final.zip"),
            pop.learner_model,
            extra={"algo": algo, "seed": seed, "generations": generations, "selfplay_suc": suc},
        )
    return pop.learner_model, reports
