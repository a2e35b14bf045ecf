"""Population dynamics: propagation, homophily, tribe detection and metrics."""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import networkx as nx
import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .agent import Agent, form_belief, reactance_filter
from .lattice import (
    AnchorKind,
    EvaluationBudget,
    Label,
    RevisionKind,
    TrustLattice,
    demanded_violation,
    evaluate,
    revise,
)
from .moral_games import profile_distance
from .world import EvidenceItem, World, frame_salience, ground_truth


class SimulationError(ValueError):
    pass


_LABEL_CODE = {Label.ACCEPTED: 1, Label.REJECTED: -1, Label.UNDECIDED: 0}


# --------------------------------------------------------------------------
# networks


def make_network(agent_ids: Sequence[str], topology: str = "complete", seed=0, weight: float = 1.0, **params) -> nx.Graph:
    """Build an interaction graph. Node labels are the agent ids."""
    n = len(agent_ids)
    rng = np.random.default_rng(seed)
    if topology == "complete":
        g = nx.complete_graph(n)
    elif topology == "empty":
        g = nx.empty_graph(n)
    elif topology == "ring":
        g = nx.circulant_graph(n, range(1, int(params.get("k", 2)) // 2 + 1)) if n > 2 else nx.path_graph(n)
    elif topology == "erdos_renyi":
        g = nx.gnp_random_graph(n, float(params.get("p", 0.1)), seed=int(rng.integers(2**31)))
    elif topology == "small_world":
        k = min(int(params.get("k", 4)), max(n - 1, 1))
        g = nx.watts_strogatz_graph(n, k, float(params.get("p", 0.1)), seed=int(rng.integers(2**31)))
    else:
        raise SimulationError(f"unknown topology {topology!r}")
    if not 0.0 <= weight <= 1.0:
        raise SimulationError("edge weight must lie in [0, 1]")
    out = nx.Graph()
    out.add_nodes_from(agent_ids)
    out.add_edges_from((agent_ids[a], agent_ids[b], {"weight": weight}) for a, b in g.edges())
    return out


def validate_network(network: nx.Graph, population: Sequence[Agent]):
    ids = {a.id for a in population}
    if set(network.nodes) != ids:
        raise SimulationError("network nodes do not match the population")
    for a, b, w in network.edges(data="weight", default=1.0):
        if a == b:
            raise SimulationError(f"self-loop on {a}")
        if not 0.0 <= w <= 1.0:
            raise SimulationError(f"edge {a}-{b} weight {w} outside [0, 1]")


def profile_matrix(population: Sequence[Agent]) -> np.ndarray:
    n = len(population)
    d = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        d[i, j] = d[j, i] = profile_distance(population[i], population[j])
    return d


def rewire_homophily(network: nx.Graph, population: Sequence[Agent], rate: float, seed, distances: np.ndarray | None = None) -> nx.Graph:
    """Move edges toward more similar partners.

    Each edge (a, b), visited in sorted order, is rewired with probability
    ``rate * d(a, b)``: b is replaced by a uniformly chosen agent closer to a
    that is not already a neighbor. Edge count is preserved.
    """
    if not 0.0 <= rate <= 1.0:
        raise SimulationError("rewiring rate must lie in [0, 1]")
    g = network.copy()
    if rate == 0.0:
        return g
    idx = {a.id: i for i, a in enumerate(population)}
    ids = [a.id for a in population]
    d = profile_matrix(population) if distances is None else distances
    rng = np.random.default_rng(seed)
    for a, b in sorted(tuple(sorted(e, key=idx.__getitem__)) for e in network.edges()):
        if not g.has_edge(a, b):
            continue
        ia, ib = idx[a], idx[b]
        if rng.random() >= rate * d[ia, ib]:
            continue
        closer = [c for c in ids if c != a and not g.has_edge(a, c) and d[ia, idx[c]] < d[ia, ib]]
        if not closer:
            continue
        c = closer[int(rng.integers(len(closer)))]
        w = g.edges[a, b].get("weight", 1.0)
        g.remove_edge(a, b)
        g.add_edge(a, c, weight=w)
    return g


def cross_edge_fraction(network: nx.Graph, groups: Mapping[str, str]) -> float:
    m = network.number_of_edges()
    if m == 0:
        return 0.0
    return sum(groups[a] != groups[b] for a, b in network.edges()) / m


# --------------------------------------------------------------------------
# tribes and metrics


@dataclass(frozen=True)
class TribeAssignment:
    tribes: Mapping[str, int]
    count: int

    def __post_init__(self):
        ids = sorted(set(self.tribes.values()))
        if ids != list(range(self.count)):
            raise SimulationError("tribe ids must be contiguous from 0")

    def members(self, tribe: int) -> list[str]:
        return [a for a, t in self.tribes.items() if t == tribe]

    def blocks(self) -> list[frozenset[str]]:
        return [frozenset(self.members(t)) for t in range(self.count)]


def label_codes(population: Sequence[Agent], claims: Sequence[str]) -> np.ndarray:
    return np.array([[_LABEL_CODE[a.label_of(c)] for c in claims] for a in population], dtype=int).reshape(
        len(population), len(claims)
    )


def disagreement_matrix(population: Sequence[Agent], claims: Sequence[str]) -> np.ndarray:
    codes = label_codes(population, claims)
    if not claims:
        return np.zeros((len(population), len(population)))
    return (codes[:, None, :] != codes[None, :, :]).mean(axis=2)


def combined_distances(
    population: Sequence[Agent],
    claims: Sequence[str],
    lam: float = 0.5,
    profiles: np.ndarray | None = None,
) -> np.ndarray:
    p = profile_matrix(population) if profiles is None else profiles
    return lam * p + (1.0 - lam) * disagreement_matrix(population, claims)


def cluster_at(d: np.ndarray, ids: Sequence[str], tau: float) -> TribeAssignment:
    """Single-linkage clusters: agents chained by distances <= tau share a tribe."""
    n = len(ids)
    if n == 0:
        raise SimulationError("cannot cluster an empty population")
    if n == 1:
        return TribeAssignment({ids[0]: 0}, 1)
    z = linkage(squareform(d, checks=False), method="single")
    raw = fcluster(z, t=tau, criterion="distance")
    relabel: dict[int, int] = {}
    out = {}
    for a, r in zip(ids, raw):
        out[a] = relabel.setdefault(int(r), len(relabel))
    return TribeAssignment(out, len(relabel))


def detect_tribes(
    population: Sequence[Agent],
    claims: Sequence[str],
    lam: float = 0.5,
    tau: float = 0.2,
    profiles: np.ndarray | None = None,
) -> TribeAssignment:
    if not population:
        raise SimulationError("need at least one agent")
    d = combined_distances(population, claims, lam, profiles)
    return cluster_at(d, [a.id for a in population], tau)


@dataclass(frozen=True)
class PolarizationMetrics:
    tribe_count: int
    within_agreement: float
    cross_agreement: float
    polarization_index: float
    rejected_correction_rate: float

    def as_row(self) -> list:
        return [
            self.tribe_count,
            self.within_agreement,
            self.cross_agreement,
            self.polarization_index,
            self.rejected_correction_rate,
        ]


def rejected_correction_rate(population: Sequence[Agent], prefix: str = "") -> float:
    total = sum(a.events[prefix + "corrections"] for a in population)
    rejected = sum(a.events[prefix + "rejected"] for a in population)
    return rejected / total if total else 0.0


def polarization_index(
    population: Sequence[Agent],
    assignment: TribeAssignment,
    claims: Sequence[str],
) -> PolarizationMetrics:
    """Within-tribe minus cross-tribe label agreement, floored at 0.

    Means are over agent pairs. With no within-tribe pairs (all singletons)
    within agreement is taken as 1; with a single tribe the index is 0.
    """
    agree = 1.0 - disagreement_matrix(population, claims)
    tribe = np.array([assignment.tribes[a.id] for a in population])
    iu = np.triu_indices(len(population), k=1)
    same = tribe[iu[0]] == tribe[iu[1]]
    vals = agree[iu]
    within = float(vals[same].mean()) if same.any() else 1.0
    cross = float(vals[~same].mean()) if (~same).any() else 1.0
    index = 0.0 if assignment.count <= 1 else max(0.0, within - cross)
    return PolarizationMetrics(assignment.count, within, cross, index, rejected_correction_rate(population))


def tribe_fitness(members: Sequence[Agent], world: World, w: float = 0.5, claims: Sequence[str] | None = None) -> float:
    """``w * accuracy + (1 - w) * cohesion``.

    A member's label on a claim counts as accurate when the claim is accepted
    exactly if it is true.
    """
    if not members:
        raise SimulationError("tribe_fitness needs a non-empty tribe")
    if not 0.0 <= w <= 1.0:
        raise SimulationError("w must lie in [0, 1]")
    claims = list(world.claim_ids if claims is None else claims)
    if not claims:
        return 1.0
    hits = [(a.label_of(c) is Label.ACCEPTED) == ground_truth(world, c) for a in members for c in claims]
    accuracy = sum(hits) / len(hits)
    if len(members) < 2:
        cohesion = 1.0
    else:
        agree = 1.0 - disagreement_matrix(members, claims)
        cohesion = float(agree[np.triu_indices(len(members), k=1)].mean())
    return w * accuracy + (1.0 - w) * cohesion


def perceived_consensus(agent: Agent, network: nx.Graph, claim: str, population: Sequence[Agent]) -> float:
    if agent.id not in network:
        raise SimulationError(f"agent {agent.id} not in network")
    mine = agent.label_of(claim)
    by_id = {a.id: a for a in population}
    nbrs = sorted(network.neighbors(agent.id))
    if nbrs:
        neighbor = sum(by_id[n].label_of(claim) is mine for n in nbrs) / len(nbrs)
    else:
        neighbor = 1.0
    others = [a for a in population if a.id != agent.id]
    pop = sum(a.label_of(claim) is mine for a in others) / len(others) if others else 1.0
    b = agent.biases.false_consensus
    return b * neighbor + (1.0 - b) * pop


# --------------------------------------------------------------------------
# propagation


@dataclass(frozen=True)
class SimConfig:
    budget: EvaluationBudget = field(default_factory=lambda: EvaluationBudget(max_nodes=12, max_depth=3))
    stream_exposure: float = 1.0
    homophily_rate: float = 0.0
    tribe_lambda: float = 0.5
    tribe_tau: float = 0.2
    fitness_weight: float = 0.5

    def __post_init__(self):
        for name in ("stream_exposure", "homophily_rate", "tribe_lambda", "fitness_weight"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SimulationError(f"{name} must lie in [0, 1]")
        if self.tribe_tau < 0:
            raise SimulationError("tribe_tau must be >= 0")


@dataclass(frozen=True)
class StepRecord:
    step: int
    labels: Mapping[str, tuple[str, ...]]
    assignment: TribeAssignment
    metrics: PolarizationMetrics
    events: Mapping[str, int]


class SimHistory:
    """Append-only list of step records plus the final network."""

    def __init__(self, claims: Sequence[str]):
        self.claims = tuple(claims)
        self._records: list[StepRecord] = []
        self.network: nx.Graph | None = None

    def append(self, record: StepRecord):
        if self._records and record.step <= self._records[-1].step:
            raise SimulationError("history steps must increase")
        self._records.append(record)

    @property
    def records(self) -> tuple[StepRecord, ...]:
        return tuple(self._records)

    @property
    def final(self) -> StepRecord:
        return self._records[-1]

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self._records)


_COUNTED = ("stop_loss", "deference")


def _evict(lat: TrustLattice, steps: Mapping[str, int], keep: str) -> TrustLattice | None:
    """Drop the oldest plain evidence leaf other than ``keep``; None if nothing can go."""
    cands = []
    for n in lat.leaves:
        node = lat.nodes[n]
        if n in (lat.root, keep) or node.kind == "intuition":
            continue
        if node.anchor is not None and node.anchor.kind in (AnchorKind.BELIEF, AnchorKind.PRE_TRUSTED):
            continue
        ok = all(len(lat.children(p)) > 1 or lat.nodes[p].anchor is not None for p in lat.parents(n))
        if ok:
            cands.append((steps.get(n, -1), n))
    if not cands:
        return None
    _, victim = min(cands)
    nodes = {k: v for k, v in lat.nodes.items() if k != victim}
    edges = [e for e in lat.edges if victim not in (e.source, e.target)]
    return TrustLattice(lat.root, nodes, edges)


def _record_correction(agent: Agent, lat: TrustLattice, item: EvidenceItem, rejected: bool):
    tags = ["", "true_" if item.veracity else "false_"]
    target = lat.nodes[item.target]
    if target.anchor is not None and target.anchor.kind is AnchorKind.BELIEF:
        tags.append("belief_")
    elif not lat.children(item.target) and item.target != lat.root:
        tags.append("leaf_")
    for t in tags:
        agent.events[t + "corrections"] += 1
        if rejected:
            agent.events[t + "rejected"] += 1


def _absorb(
    agent: Agent,
    idx: int,
    inbox: list[EvidenceItem],
    world: World,
    config: SimConfig,
    seed: int,
    step: int,
    steps_of: dict[str, int],
) -> list[EvidenceItem]:
    """Process one agent's inbox; returns the items it re-shares."""
    rng = np.random.default_rng([seed, idx, step, 2])
    agent.remember(inbox)
    by_claim: dict[str, list[EvidenceItem]] = {}
    for e in inbox:
        c = world.claim_of(e.target)
        if c is not None:
            by_claim.setdefault(c, []).append(e)
    shares = []
    budget = config.budget
    claim_order = {c: k for k, c in enumerate(world.claim_ids)}
    for claim in sorted(by_claim, key=claim_order.__getitem__):
        items = by_claim[claim]
        domain = world.claim(claim).domain
        if claim not in agent.lattices:
            pool = list(world.evidence) + [e for e in agent.memory if not world.has_statement(e.id)]
            _, lat = form_belief(agent, claim, world, budget, [seed, idx, step, 3, claim_order[claim]], pool=pool)
            labels = evaluate(lat, agent.policy)
            agent.lattices[claim], agent.node_labels[claim] = lat, labels
            shares += [e for e in items if e.id in labels and labels[e.id].label is Label.ACCEPTED]
            continue
        ctx = agent.context(world)
        for e in items:
            lat, labels = agent.lattices[claim], agent.node_labels[claim]
            if e.id in lat or e.target not in lat:
                continue
            e = reactance_filter(agent, e, rng=rng, source=world.source(e.author))
            while len(lat) >= budget.max_nodes:
                smaller = _evict(lat, steps_of, e.target)
                if smaller is None:
                    break
                lat = smaller
            if len(lat) >= budget.max_nodes:
                continue
            if lat is not agent.lattices[claim]:
                labels = evaluate(lat, agent.policy)
            correction = labels[e.target].label is demanded_violation(e.polarity)
            out = revise(ctx, lat, e, agent.policy, anchor=agent.item_anchor(e, world, domain), labels=labels, budget=budget)
            if correction:
                _record_correction(agent, lat, e, out.kind is RevisionKind.REJECTED)
            if out.accepted:
                lat, labels = out.lattice, out.labels
                if labels[e.id].label is Label.ACCEPTED:
                    shares.append(e)
            agent.lattices[claim], agent.node_labels[claim] = lat, labels
    return shares


def propagate(
    population: Sequence[Agent],
    network: nx.Graph,
    stream: Sequence[EvidenceItem],
    steps: int,
    seed: int,
    *,
    world: World,
    config: SimConfig = SimConfig(),
) -> SimHistory:
    """Run the population for ``steps`` rounds.

    Each round every agent reads the stream items of that round (each with
    probability ``stream_exposure``) plus what its neighbors re-shared in the
    previous round, received with probability
    ``weight * (0.5 + 0.5 * salience)``. All agents read the same snapshot of
    last round's shares and draw from their own seeded generator, so the
    order agents are processed in does not matter.
    """
    if steps < 1:
        raise SimulationError("steps must be >= 1")
    validate_network(network, population)
    ids = [a.id for a in population]
    if len(set(ids)) != len(ids):
        raise SimulationError("duplicate agent ids")
    idx = {a: i for i, a in enumerate(ids)}
    by_step: dict[int, list[EvidenceItem]] = {}
    steps_of = {e.id: -1 for e in world.evidence}
    for e in stream:
        by_step.setdefault(e.step, []).append(e)
        steps_of[e.id] = e.step
    claims = world.claim_ids
    profiles = profile_matrix(population)
    history = SimHistory(claims)
    shares: dict[str, list[EvidenceItem]] = {a: [] for a in ids}
    g = network.copy()
    for t in range(steps):
        before = {a.id: Counter({k: a.events[k] for k in _COUNTED}) for a in population}
        new_shares = {}
        for i, agent in enumerate(population):
            rng = np.random.default_rng([seed, i, t, 1])
            inbox, got = [], set(agent.seen)
            for e in by_step.get(t, ()):
                if e.id not in got and (config.stream_exposure >= 1.0 or rng.random() < config.stream_exposure):
                    inbox.append(e)
                    got.add(e.id)
            for nb in sorted(g.neighbors(agent.id), key=idx.__getitem__):
                w = g.edges[agent.id, nb].get("weight", 1.0)
                for e in shares[nb]:
                    if e.id in got:
                        continue
                    p = w * (0.5 + 0.5 * frame_salience(e.framing, agent.emft))
                    if rng.random() < p:
                        inbox.append(e)
                        got.add(e.id)
            agent.seen.update(e.id for e in inbox)
            new_shares[agent.id] = _absorb(agent, i, inbox, world, config, seed, t, steps_of)
        shares = new_shares
        if config.homophily_rate > 0:
            g = rewire_homophily(g, population, config.homophily_rate, [seed, t, 4], profiles)
        assignment = detect_tribes(population, claims, config.tribe_lambda, config.tribe_tau, profiles)
        for a in population:
            a.tribe_id = assignment.tribes[a.id]
        metrics = polarization_index(population, assignment, claims)
        events = Counter()
        for a in population:
            for k in _COUNTED:
                events[k] += a.events[k] - before[a.id][k]
        history.append(
            StepRecord(
                t,
                {a.id: tuple(a.label_of(c).value for c in claims) for a in population},
                assignment,
                metrics,
                dict(events),
            )
        )
    history.network = g
    return history
