"""Agents: the virtue layer, bias operators and the two interventions.

Every bias is a dial in [0, 1] that is the identity at 0, so any single
failure mode can be switched on and A/B tested in isolation.
"""
from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from typing import AbstractSet, Iterable, Mapping, Sequence

import numpy as np

from .lattice import (
    AcceptanceLabel,
    Anchor,
    AnchorKind,
    EvaluationBudget,
    Label,
    LatticeArchive,
    LatticeContext,
    Node,
    Edge,
    TrustLattice,
    TrustPolicy,
    elaborate,
    evaluate,
)
from .moral_games import EmftProfile, MacProfile, moral_alarm
from .world import Claim, EvidenceItem, Polarity, Source, World


class AgentError(ValueError):
    pass


class UnknownDomainError(KeyError, AgentError):
    pass


def _unit_fields(obj):
    for f in fields(obj):
        v = float(getattr(obj, f.name))
        if not 0.0 <= v <= 1.0 or math.isnan(v):
            raise AgentError(f"{type(obj).__name__}.{f.name}={v!r} outside [0, 1]")
        object.__setattr__(obj, f.name, v)


@dataclass(frozen=True)
class VirtueProfile:
    humility: float = 0.5
    courage: float = 0.5
    openness: float = 0.5
    attentiveness: float = 1.0
    perseverance: float = 0.5

    def __post_init__(self):
        _unit_fields(self)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)])


@dataclass(frozen=True)
class BiasConfig:
    overconfidence: float = 0.0
    confirmation: float = 0.0
    availability: float = 0.0
    anchoring: float = 0.0
    bandwagon: float = 0.0
    attribution_asymmetry: float = 0.0
    reactance: float = 0.0
    halo: float = 0.0
    false_consensus: float = 0.0

    def __post_init__(self):
        _unit_fields(self)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)])


@dataclass(frozen=True)
class Interventions:
    stop_loss: bool = False
    adversarial_deference: bool = False


class Path(str, enum.Enum):
    DIRECT = "Direct"
    DEFER = "Defer"


@dataclass(frozen=True)
class PathChoice:
    path: Path
    source: Source | None = None

    def __post_init__(self):
        if self.path is Path.DEFER and self.source is None:
            raise AgentError("Defer needs a source")

    @property
    def direct(self) -> bool:
        return self.path is Path.DIRECT


class Attribution(str, enum.Enum):
    SITUATIONAL = "Situational"
    DISPOSITIONAL = "Dispositional"


INTUITION_PREFIX = "intuition:"


@dataclass(eq=False)
class Agent:
    id: str
    mac: MacProfile
    emft: EmftProfile
    virtues: VirtueProfile = field(default_factory=VirtueProfile)
    biases: BiasConfig = field(default_factory=BiasConfig)
    policy: TrustPolicy = field(default_factory=TrustPolicy)
    beliefs: set[str] = field(default_factory=set)
    pre_trusted: set[str] = field(default_factory=set)
    # None: every source in the world is an accepted authority
    accepted_authorities: set[str] | None = None
    competence: dict[str, float] = field(default_factory=dict)
    group_tag: str = ""
    # None: in-group is {group_tag}, or nobody is out-group when untagged
    in_groups: set[str] | None = None
    reliability_noise: dict[str, float] = field(default_factory=dict)
    interventions: Interventions = field(default_factory=Interventions)
    stickiness_threshold: float = 3
    belief_flip_cost: float = 100
    competence_threshold: float = 0.5
    alarm_threshold: float = 0.7
    sample_size: int = 4
    memory_capacity: int = 32
    recency_scale: float = 5.0
    tribe_id: int | None = None
    # mutable run state
    memory: list[EvidenceItem] = field(default_factory=list)
    archive: LatticeArchive = field(default_factory=LatticeArchive)
    bypass: set[str] = field(default_factory=set)
    events: Counter = field(default_factory=Counter)
    lattices: dict[str, TrustLattice] = field(default_factory=dict)
    node_labels: dict[str, dict[str, AcceptanceLabel]] = field(default_factory=dict)
    seen: set[str] = field(default_factory=set)

    def __post_init__(self):
        for dom, c in self.competence.items():
            if not 0.0 <= c <= 1.0:
                raise AgentError(f"agent {self.id}: competence[{dom}] outside [0, 1]")
        if self.memory_capacity < 1 or self.sample_size < 1:
            raise AgentError("memory_capacity and sample_size must be positive")

    # ------------------------------------------------------------------
    def trait_vector(self) -> np.ndarray:
        return np.concatenate([self.virtues.as_array(), self.biases.as_array()])

    def group_set(self) -> set[str] | None:
        if self.in_groups is not None:
            return set(self.in_groups)
        return {self.group_tag} if self.group_tag else None

    def is_out_group(self, group: str) -> bool:
        g = self.group_set()
        return g is not None and group not in g

    def context(self, world: World | None = None) -> LatticeContext:
        accepted = self.accepted_authorities
        if accepted is None:
            accepted = {s.id for s in world.sources} if world is not None else set()
        return LatticeContext(
            beliefs=frozenset(self.beliefs),
            pre_trusted=frozenset(self.pre_trusted),
            accepted_authorities=frozenset(accepted),
            in_groups=self.group_set(),
            bypass=frozenset(self.bypass),
            reliability_noise=self.reliability_noise,
            stickiness_threshold=self.stickiness_threshold,
            belief_flip_cost=self.belief_flip_cost,
            archive=self.archive,
        )

    def accepts(self, source_id: str) -> bool:
        return self.accepted_authorities is None or source_id in self.accepted_authorities

    def perceived_reliability(self, source: Source, domain: str) -> float:
        r = source.competence_in(domain) + self.reliability_noise.get(source.id, 0.0)
        return min(1.0, max(0.0, r))

    def item_anchor(self, item: EvidenceItem, world: World, domain: str) -> Anchor:
        """Anchor for an incoming item, judged by who said it."""
        if item.id in self.pre_trusted:
            return Anchor(AnchorKind.PRE_TRUSTED)
        if item.id in self.beliefs:
            return Anchor(AnchorKind.BELIEF)
        if not self.accepts(item.author):
            return Anchor(AnchorKind.EVIDENCE_EXHAUSTION)
        src = world.source(item.author)
        return Anchor(
            AnchorKind.ACCEPTED_AUTHORITY,
            src.id,
            reliability=self.perceived_reliability(src, domain),
            out_group=self.is_out_group(src.group_tag),
            hypocrite=src.hypocrisy_flag,
            bypass=src.id in self.bypass,
        )

    def label_of(self, claim_id: str) -> Label:
        labels = self.node_labels.get(claim_id)
        return labels[claim_id].label if labels else Label.UNDECIDED

    def remember(self, items: Iterable[EvidenceItem]):
        """Add items, keeping the most recent and vivid ``memory_capacity``."""
        seen = {e.id for e in self.memory}
        for e in items:
            if e.id not in seen:
                self.memory.append(e)
                seen.add(e.id)
        if len(self.memory) > self.memory_capacity:
            self.memory.sort(key=lambda e: (-e.step, -e.vividness, e.id))
            del self.memory[self.memory_capacity :]
            self.memory.sort(key=lambda e: (e.step, e.id))


# --------------------------------------------------------------------------
# Path 1 / Path 2


def perceived_competence(agent: Agent, domain: str) -> float:
    if domain not in agent.competence:
        raise UnknownDomainError(domain)
    c = agent.competence[domain]
    return c + agent.biases.overconfidence * (1.0 - c)


def competence_bar(agent: Agent) -> float:
    h = agent.virtues.humility
    return agent.competence_threshold * (1.0 + h) / 2.0 + 0.25 * h


def choose_path(
    agent: Agent,
    domain: str,
    candidates: Sequence[Source] = (),
    claim_id: str | None = None,
    stances: Mapping[str, float] | None = None,
    prior: float = 0.0,
) -> PathChoice:
    """Direct evaluation when the agent feels competent enough, else deference.

    With nobody to defer to the agent falls back on its own judgment.
    """
    if perceived_competence(agent, domain) >= competence_bar(agent):
        return PathChoice(Path.DIRECT)
    if not candidates:
        return PathChoice(Path.DIRECT)
    src = select_authority(agent, candidates, claim_id, domain=domain, stances=stances, prior=prior)
    return PathChoice(Path.DEFER, src)


def authority_scores(
    agent: Agent,
    candidates: Sequence[Source],
    domain: str,
    stances: Mapping[str, float] | None = None,
    prior: float = 0.0,
) -> dict[str, float]:
    b = agent.biases
    active = [(w, name) for w, name in ((b.confirmation, "confirmation"), (b.halo, "halo"), (b.bandwagon, "bandwagon")) if w > 0]
    beta = max((w for w, _ in active), default=0.0)
    wsum = math.fsum(w for w, _ in active)
    max_f = max((s.follower_count for s in candidates), default=0)
    stances = stances or {}
    out = {}
    for s in candidates:
        if s.hypocrisy_flag:
            out[s.id] = 0.0
            continue
        if agent.policy.out_group_rejection and agent.is_out_group(s.group_tag) and s.id not in agent.bypass:
            out[s.id] = 0.0
            continue
        base = agent.perceived_reliability(s, domain)
        mix = 0.0
        for w, name in active:
            if name == "confirmation":
                v = 0.5 * (1.0 + prior * stances.get(s.id, 0.0))
            elif name == "halo":
                v = s.prestige
            else:
                v = s.follower_count / max_f if max_f > 0 else 0.0
            mix += w * v
        mix = mix / wsum if wsum > 0 else 0.0
        out[s.id] = (1.0 - beta) * base + beta * mix
    return out


def select_authority(
    agent: Agent,
    candidates: Sequence[Source],
    claim_id: str | None = None,
    *,
    domain: str = "general",
    stances: Mapping[str, float] | None = None,
    prior: float = 0.0,
) -> Source:
    """Highest-scoring candidate; ties go to the lowest source id.

    ``stances`` maps source id to its net position on the claim in [-1, 1]
    and ``prior`` is the agent's own leaning in [-1, 1]; together they give
    the agreement term used by confirmation bias.
    """
    if not candidates:
        raise AgentError("select_authority needs at least one candidate")
    scores = authority_scores(agent, candidates, domain, stances, prior)
    return min(candidates, key=lambda s: (-scores[s.id], s.id))


# --------------------------------------------------------------------------
# evidence intake


def sample_evidence(
    agent: Agent,
    available: Sequence[EvidenceItem],
    k: int,
    seed,
    now: int | None = None,
) -> list[EvidenceItem]:
    """Weighted sample without replacement, returned in presentation order.

    Uses exponential keys (Efraimidis-Spirakis) so a single draw is
    proportional to weight and the whole sample is fixed by ``seed``.
    """
    if k < 1:
        raise AgentError("k must be >= 1")
    if not available:
        return []
    b = agent.biases
    k_eff = math.ceil(k * (0.25 + 0.75 * agent.virtues.attentiveness))
    w = np.empty(len(available))
    for i, e in enumerate(available):
        rec = max(0, now - e.step) if now is not None else e.recency
        decay = math.exp(-rec / agent.recency_scale)
        w[i] = (1.0 - b.availability) + b.availability * e.vividness * decay
    if b.anchoring > 0:
        w[0] *= 1.0 + 9.0 * b.anchoring
    rng = np.random.default_rng(seed)
    u = rng.random(len(available))
    with np.errstate(divide="ignore"):
        keys = np.where(w > 0, np.log(u) / np.where(w > 0, w, 1.0), -np.inf)
    order = sorted(range(len(available)), key=lambda i: (-keys[i], i))
    chosen = sorted(order[: min(k_eff, len(available))])
    return [available[i] for i in chosen]


def reactance_filter(
    agent: Agent,
    item: EvidenceItem,
    coercive: bool | None = None,
    rng=None,
    source: Source | None = None,
) -> EvidenceItem:
    """Flip a coercive item from a distrusted source with probability ``reactance``.

    A source is distrusted when it is not an accepted authority or, if
    ``source`` is given, when it belongs to an out-group.
    """
    coercive = item.coercive if coercive is None else coercive
    r = agent.biases.reactance
    if not coercive or r <= 0:
        return item
    distrusted = not agent.accepts(item.author) or (source is not None and agent.is_out_group(source.group_tag))
    if not distrusted:
        return item
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if rng.random() < r:
        return replace(item, polarity=item.polarity.inverted(), inverted=True)
    return item


def attribute_behavior(agent: Agent, actor_group: str, act_valence: str, rng=None) -> Attribution:
    if act_valence not in ("negative", "positive"):
        raise AgentError(f"act_valence must be 'negative' or 'positive', got {act_valence!r}")
    a = agent.biases.attribution_asymmetry
    if a <= 0:
        return Attribution.SITUATIONAL
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if rng.random() >= a:
        return Attribution.SITUATIONAL
    in_group = not agent.is_out_group(actor_group)
    if act_valence == "negative":
        return Attribution.SITUATIONAL if in_group else Attribution.DISPOSITIONAL
    return Attribution.DISPOSITIONAL if in_group else Attribution.SITUATIONAL


# --------------------------------------------------------------------------
# interventions


def moral_stop_loss(agent: Agent, intuition_weight: float, alarm: float) -> float:
    if not (0.0 <= intuition_weight <= 1.0 and 0.0 <= alarm <= 1.0):
        raise AgentError("intuition weight and alarm must lie in [0, 1]")
    if agent.interventions.stop_loss and alarm >= agent.alarm_threshold:
        agent.events["stop_loss"] += 1
        return 0.0
    return intuition_weight


def adversarial_deference(
    agent: Agent,
    rival_tribe_sources: Iterable[Source],
    consulted: AbstractSet[str],
    domain: str = "general",
) -> frozenset[str]:
    """Add the most competent rival authority to the consulted set.

    The added source is also put on the agent's bypass list, so its
    testimony survives out-group rejection.
    """
    consulted = frozenset(consulted)
    if not agent.interventions.adversarial_deference:
        return consulted
    rivals = list(rival_tribe_sources)
    if not rivals:
        agent.events["deference_noop"] += 1
        return consulted
    if consulted & {s.id for s in rivals}:
        return consulted
    best = min(rivals, key=lambda s: (-s.competence_in(domain), s.id))
    agent.bypass.add(best.id)
    agent.events["deference"] += 1
    return consulted | {best.id}


# --------------------------------------------------------------------------
# belief formation


def claim_prior(agent: Agent, claim: Claim, label: AcceptanceLabel | None = None) -> float:
    """Leaning in [-1, 1]: the current label if there is one, else moral alarm."""
    if label is not None:
        return {Label.ACCEPTED: 1.0, Label.REJECTED: -1.0}.get(label.label, 0.0)
    return -moral_alarm(claim.framing, agent.emft, claim.violation)


def source_stances(items: Iterable[EvidenceItem], claim_id: str) -> dict[str, float]:
    acc: dict[str, list[int]] = {}
    for e in items:
        if e.target == claim_id:
            acc.setdefault(e.author, []).append(e.polarity.sign)
    return {s: sum(v) / len(v) for s, v in acc.items()}


def intuition_id(claim_id: str) -> str:
    return INTUITION_PREFIX + claim_id


def form_belief(
    agent: Agent,
    claim_id: str,
    world: World,
    budget: EvaluationBudget,
    seed,
    pool: Sequence[EvidenceItem] | None = None,
) -> tuple[AcceptanceLabel, TrustLattice]:
    """Run the whole trust process for one claim.

    Moral alarm comes first and may be suspended by the stop-loss. The agent
    then either elaborates a lattice itself or defers to one authority. An
    unsuspended high alarm enters the lattice as a Belief-anchored intuition
    attacking the claim, which is what later makes contrary evidence costly.
    """
    claim = world.claim(claim_id)
    rng = np.random.default_rng(seed)
    ctx = agent.context(world)
    if claim_id in agent.beliefs or claim_id in agent.pre_trusted:
        lat = elaborate(ctx, claim_id, world, budget, pool=())
        return evaluate(lat, agent.policy)[claim_id], lat

    pool = list(world.evidence if pool is None else pool)
    domain = claim.domain
    alarm = moral_alarm(claim.framing, agent.emft, claim.violation)
    intuition = moral_stop_loss(agent, alarm, alarm)

    direct = [e for e in pool if e.target == claim_id]
    authors = sorted({e.author for e in direct})
    rivals = [world.source(a) for a in authors if agent.is_out_group(world.source(a).group_tag)]
    rival_ids = {s.id for s in rivals}
    # under out-group rejection the agent only consults its own side
    shut_out = rival_ids - agent.bypass if agent.policy.out_group_rejection else set()
    consulted = {a for a in authors if agent.accepts(a) and a not in shut_out}
    consulted = adversarial_deference(agent, rivals, consulted, domain)
    ctx = agent.context(world)
    stances = source_stances(pool, claim_id)
    candidates = [world.source(a) for a in sorted(consulted)]
    path = choose_path(agent, domain, candidates, claim_id, stances, claim_prior(agent, claim))

    if path.direct:
        def select(sid, cands):
            picked = sample_evidence(agent, cands, agent.sample_size, rng)
            return [reactance_filter(agent, e, rng=rng, source=world.source(e.author)) for e in picked]

        lat = elaborate(ctx, claim_id, world, budget, pool=pool, select=select)
    else:
        agent.events["defer"] += 1
        src = path.source
        said = [e for e in direct if e.author == src.id]
        stmt = max(said, key=lambda e: (e.step, e.id))
        stmt = reactance_filter(agent, stmt, rng=rng, source=src)
        root = Node(claim_id, 1.0, None, "claim")
        node = Node(stmt.id, 1.0, ctx.authority_anchor(src, domain), stmt.kind)
        lat = TrustLattice(claim_id, [root, node], [Edge(stmt.id, claim_id, stmt.polarity, stmt.strength)])

    if intuition > 0 and alarm >= agent.alarm_threshold:
        nid = intuition_id(claim_id)
        lat = lat.with_node(
            Node(nid, 1.0, Anchor(AnchorKind.BELIEF), "intuition"),
            Edge(nid, claim_id, Polarity.ATTACKS, alarm),
        )
    labels = evaluate(lat, agent.policy)
    root_label = labels[claim_id]
    if root_label.label is Label.ACCEPTED:
        agent.beliefs.add(claim_id)
    return root_label, lat

