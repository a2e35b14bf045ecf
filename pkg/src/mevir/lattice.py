"""Trust lattices: elaboration, anchors, gradual evaluation and belief revision.

A lattice is a DAG whose edges point from a piece of evidence to the
statement it supports or attacks, so the claim under evaluation (the root)
is the only sink. Terminal anchors (pre-trusted statements, beliefs and
accepted authorities) are not re-justified: their score is fixed by the
anchor until the anchor is demoted. Exhaustion anchors only mark where the
search stopped and give way as soon as evidence is attached below them.
"""
from __future__ import annotations

import enum
import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import AbstractSet, Callable, Iterable, Mapping, Sequence

from .world import EvidenceItem, Polarity, Source, World

INFINITE_COST = math.inf


class LatticeError(ValueError):
    pass


class AnchorKind(str, enum.Enum):
    PRE_TRUSTED = "PreTrusted"
    BELIEF = "Belief"
    ACCEPTED_AUTHORITY = "AcceptedAuthority"
    EVIDENCE_EXHAUSTION = "EvidenceExhaustion"
    RESOURCE_EXHAUSTION = "ResourceExhaustion"

    @property
    def terminal(self) -> bool:
        return self in (AnchorKind.PRE_TRUSTED, AnchorKind.BELIEF, AnchorKind.ACCEPTED_AUTHORITY)


@dataclass(frozen=True)
class Anchor:
    kind: AnchorKind
    source_id: str | None = None
    reliability: float = 1.0
    out_group: bool = False
    hypocrite: bool = False
    bypass: bool = False
    demoted: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", AnchorKind(self.kind))
        if self.kind is AnchorKind.ACCEPTED_AUTHORITY and not self.source_id:
            raise LatticeError("AcceptedAuthority anchor needs a source id")
        if not 0.0 <= self.reliability <= 1.0:
            raise LatticeError("anchor reliability must lie in [0, 1]")

    @property
    def holds(self) -> bool:
        return self.kind.terminal and not self.demoted

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value}
        if self.source_id is not None:
            d["source_id"] = self.source_id
        if self.kind is AnchorKind.ACCEPTED_AUTHORITY:
            d["reliability"] = self.reliability
        for flag in ("out_group", "hypocrite", "bypass", "demoted"):
            if getattr(self, flag):
                d[flag] = True
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Anchor":
        return cls(
            AnchorKind(d["kind"]),
            d.get("source_id"),
            float(d.get("reliability", 1.0)),
            bool(d.get("out_group", False)),
            bool(d.get("hypocrite", False)),
            bool(d.get("bypass", False)),
            bool(d.get("demoted", False)),
        )


@dataclass(frozen=True)
class Node:
    id: str
    base_weight: float = 1.0
    anchor: Anchor | None = None
    kind: str = "claim"

    def __post_init__(self):
        if not 0.0 <= self.base_weight <= 1.0:
            raise LatticeError(f"node {self.id}: base_weight outside [0, 1]")


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    polarity: Polarity
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "polarity", Polarity(self.polarity))
        if not 0.0 <= self.weight <= 1.0:
            raise LatticeError(f"edge {self.source}->{self.target}: weight outside [0, 1]")


@dataclass(frozen=True)
class TrustPolicy:
    source_reliability_threshold: float = 0.0
    acceptance_threshold: float = 0.5
    attack_weight_multiplier: float = 1.0
    out_group_rejection: bool = False
    evidence_standard: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.acceptance_threshold <= 1.0:
            raise LatticeError("acceptance_threshold must lie in [0, 1]")
        if not 0.0 <= self.source_reliability_threshold <= 1.0:
            raise LatticeError("source_reliability_threshold must lie in [0, 1]")
        if self.attack_weight_multiplier < 0:
            raise LatticeError("attack_weight_multiplier must be >= 0")
        for k, v in self.evidence_standard.items():
            if v < 0:
                raise LatticeError(f"evidence_standard[{k}] must be >= 0")


@dataclass(frozen=True)
class EvaluationBudget:
    max_nodes: int = 32
    max_depth: int = 4

    def __post_init__(self):
        if self.max_nodes < 1 or self.max_depth < 1:
            raise LatticeError("budget limits must be positive")


class Label(str, enum.Enum):
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class AcceptanceLabel:
    label: Label
    score: float

    @classmethod
    def from_score(cls, score: float, theta: float) -> "AcceptanceLabel":
        if score >= theta:
            return cls(Label.ACCEPTED, score)
        if score <= -theta:
            return cls(Label.REJECTED, score)
        return cls(Label.UNDECIDED, score)


class TrustLattice:
    """Immutable evidence DAG rooted at a claim."""

    __slots__ = ("root", "nodes", "edges", "_children", "_parents", "_topo", "_depth")

    def __init__(self, root: str, nodes: Mapping[str, Node] | Iterable[Node], edges: Iterable[Edge] = ()):
        if not isinstance(nodes, Mapping):
            nodes = {n.id: n for n in nodes}
        self.root = root
        self.nodes: dict[str, Node] = dict(nodes)
        self.edges: tuple[Edge, ...] = tuple(edges)
        self._build()

    def _build(self):
        if self.root not in self.nodes:
            raise LatticeError(f"root {self.root!r} is not a node")
        children: dict[str, list[Edge]] = {n: [] for n in self.nodes}
        parents: dict[str, list[str]] = {n: [] for n in self.nodes}
        seen = set()
        for e in self.edges:
            if e.source not in self.nodes or e.target not in self.nodes:
                raise LatticeError(f"edge {e.source}->{e.target} references a missing node")
            if e.source == e.target:
                raise LatticeError(f"self-loop on {e.source}")
            if (e.source, e.target) in seen:
                raise LatticeError(f"duplicate edge {e.source}->{e.target}")
            seen.add((e.source, e.target))
            children[e.target].append(e)
            parents[e.source].append(e.target)
        if parents[self.root]:
            raise LatticeError("root must not support or attack anything")
        # Kahn on the child->parent direction gives children before parents
        pending = {n: len(children[n]) for n in self.nodes}
        ready = sorted(n for n, k in pending.items() if k == 0)
        topo = []
        while ready:
            n = ready.pop()
            topo.append(n)
            for p in parents[n]:
                pending[p] -= 1
                if pending[p] == 0:
                    ready.append(p)
        if len(topo) != len(self.nodes):
            raise LatticeError("lattice contains a cycle")
        depth = {self.root: 0}
        q = deque([self.root])
        while q:
            n = q.popleft()
            for e in children[n]:
                if e.source not in depth:
                    depth[e.source] = depth[n] + 1
                    q.append(e.source)
        if len(depth) != len(self.nodes):
            stray = sorted(set(self.nodes) - set(depth))
            raise LatticeError(f"nodes not connected to the root: {stray}")
        for n, kids in children.items():
            if not kids and self.nodes[n].anchor is None:
                raise LatticeError(f"leaf {n!r} carries no anchor")
        self._children = {n: tuple(k) for n, k in children.items()}
        self._parents = {n: tuple(p) for n, p in parents.items()}
        self._topo = tuple(topo)
        self._depth = depth

    # structure -------------------------------------------------------
    def children(self, node_id: str) -> tuple[Edge, ...]:
        return self._children[node_id]

    def parents(self, node_id: str) -> tuple[str, ...]:
        return self._parents[node_id]

    def depth(self, node_id: str) -> int:
        return self._depth[node_id]

    @property
    def max_depth(self) -> int:
        return max(self._depth.values())

    @property
    def leaves(self) -> list[str]:
        return sorted(n for n, k in self._children.items() if not k)

    @property
    def topological_order(self) -> tuple[str, ...]:
        return self._topo

    def upstream(self, node_id: str) -> set[str]:
        """``node_id`` plus everything with a path into it."""
        out = {node_id}
        stack = [node_id]
        while stack:
            for e in self._children[stack.pop()]:
                if e.source not in out:
                    out.add(e.source)
                    stack.append(e.source)
        return out

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, node_id):
        return node_id in self.nodes

    def __eq__(self, other):
        if not isinstance(other, TrustLattice):
            return NotImplemented
        return (
            self.root == other.root
            and self.nodes == other.nodes
            and sorted(self.edges, key=_edge_key) == sorted(other.edges, key=_edge_key)
        )

    def __hash__(self):
        return hash((self.root, frozenset(self.nodes), frozenset(self.edges)))

    def __repr__(self):
        return f"TrustLattice(root={self.root!r}, nodes={len(self.nodes)}, edges={len(self.edges)})"

    # functional updates ------------------------------------------------
    def with_node(self, node: Node, edge: Edge | None = None) -> "TrustLattice":
        nodes = dict(self.nodes)
        nodes[node.id] = node
        edges = self.edges + ((edge,) if edge is not None else ())
        return TrustLattice(self.root, nodes, edges)

    def with_anchor(self, node_id: str, anchor: Anchor | None) -> "TrustLattice":
        nodes = dict(self.nodes)
        nodes[node_id] = replace(nodes[node_id], anchor=anchor)
        return TrustLattice(self.root, nodes, self.edges)

    def with_demoted(self, node_ids: Iterable[str]) -> "TrustLattice":
        nodes = dict(self.nodes)
        for n in node_ids:
            a = nodes[n].anchor
            if a is None:
                raise LatticeError(f"cannot demote unanchored node {n!r}")
            nodes[n] = replace(nodes[n], anchor=replace(a, demoted=True))
        return TrustLattice(self.root, nodes, self.edges)

    # serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "nodes": [
                {
                    "id": n.id,
                    "base_weight": n.base_weight,
                    "kind": n.kind,
                    "anchor": n.anchor.to_dict() if n.anchor else None,
                }
                for n in sorted(self.nodes.values(), key=lambda n: n.id)
            ],
            "edges": [
                {"from": e.source, "to": e.target, "polarity": e.polarity.value, "weight": e.weight}
                for e in sorted(self.edges, key=_edge_key)
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrustLattice":
        nodes = [
            Node(
                n["id"],
                float(n.get("base_weight", 1.0)),
                Anchor.from_dict(n["anchor"]) if n.get("anchor") else None,
                n.get("kind", "claim"),
            )
            for n in d["nodes"]
        ]
        edges = [Edge(e["from"], e["to"], Polarity(e["polarity"]), float(e.get("weight", 1.0))) for e in d["edges"]]
        return cls(d["root"], nodes, edges)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @classmethod
    def from_json(cls, text: str) -> "TrustLattice":
        return cls.from_dict(json.loads(text))


def _edge_key(e: Edge):
    return (e.source, e.target, e.polarity.value, e.weight)


def single_node_lattice(root: str, anchor: Anchor, kind: str = "claim") -> TrustLattice:
    return TrustLattice(root, [Node(root, 1.0, anchor, kind)])


# --------------------------------------------------------------------------
# evaluation


def _clamp(x: float, lo: float = -1.0, hi: float = 1.0) -> float:
    return lo if x < lo else hi if x > hi else x


def anchor_trust(anchor: Anchor, policy: TrustPolicy) -> float:
    if not anchor.holds:
        return 0.0
    if anchor.kind is not AnchorKind.ACCEPTED_AUTHORITY:
        return 1.0
    if anchor.reliability < policy.source_reliability_threshold:
        return 0.0
    if policy.out_group_rejection and anchor.out_group and not anchor.bypass:
        return 0.0
    penalty = 1.0 if anchor.hypocrite else 0.0
    return anchor.reliability * (1.0 - penalty)


def anchor_score(node: Node, policy: TrustPolicy) -> float:
    if node.anchor is None:
        return 0.0
    standard = policy.evidence_standard.get(node.kind, 1.0)
    return _clamp(node.base_weight * standard * anchor_trust(node.anchor, policy), 0.0, 1.0)


def node_scores(lattice: TrustLattice, policy: TrustPolicy, demoted: AbstractSet[str] = frozenset()) -> dict[str, float]:
    """Bottom-up gradual scores in [-1, 1].

    Sums use ``math.fsum`` so the result does not depend on edge order.
    """
    m = policy.attack_weight_multiplier
    scores: dict[str, float] = {}
    for n in lattice.topological_order:
        node = lattice.nodes[n]
        a = node.anchor
        if a is not None and a.holds and n not in demoted:
            scores[n] = anchor_score(node, policy)
            continue
        kids = lattice.children(n)
        if not kids:
            scores[n] = 0.0
            continue
        sup = math.fsum(e.weight * scores[e.source] for e in kids if e.polarity is Polarity.SUPPORTS)
        att = math.fsum(e.weight * scores[e.source] for e in kids if e.polarity is Polarity.ATTACKS)
        scores[n] = _clamp(sup - m * att)
    return scores


def evaluate(lattice: TrustLattice, policy: TrustPolicy) -> dict[str, AcceptanceLabel]:
    theta = policy.acceptance_threshold
    return {n: AcceptanceLabel.from_score(s, theta) for n, s in node_scores(lattice, policy).items()}


def label_map(labels: Mapping[str, AcceptanceLabel]) -> dict[str, Label]:
    return {n: l.label for n, l in labels.items()}


# --------------------------------------------------------------------------
# elaboration


@dataclass
class LatticeContext:
    """What the lattice machinery needs to know about the evaluating agent."""

    beliefs: AbstractSet[str] = frozenset()
    pre_trusted: AbstractSet[str] = frozenset()
    accepted_authorities: AbstractSet[str] = frozenset()
    # None means the agent draws no in/out-group line
    in_groups: AbstractSet[str] | None = None
    bypass: AbstractSet[str] = frozenset()
    reliability_noise: Mapping[str, float] = field(default_factory=dict)
    stickiness_threshold: float = 3
    belief_flip_cost: float = 100
    authority_flip_cost: float = 1
    archive: "LatticeArchive | None" = None

    def is_out_group(self, source: Source) -> bool:
        return self.in_groups is not None and source.group_tag not in self.in_groups

    def reliability(self, source: Source, domain: str) -> float:
        r = source.competence_in(domain) + self.reliability_noise.get(source.id, 0.0)
        return _clamp(r, 0.0, 1.0)

    def authority_anchor(self, source: Source, domain: str) -> Anchor:
        return Anchor(
            AnchorKind.ACCEPTED_AUTHORITY,
            source.id,
            reliability=self.reliability(source, domain),
            out_group=self.is_out_group(source),
            hypocrite=source.hypocrisy_flag,
            bypass=source.id in self.bypass,
        )


@dataclass(frozen=True)
class ElaborationState:
    node_count: int
    depth: int
    max_nodes: int
    max_depth: int
    evidence_available: bool = True

    @property
    def exhausted(self) -> bool:
        return self.node_count >= self.max_nodes or self.depth >= self.max_depth


def classify_anchor(
    statement_id: str,
    ctx: LatticeContext,
    state: ElaborationState,
    *,
    author: Source | None = None,
    domain: str = "general",
) -> Anchor | None:
    """First matching anchor kind, or None if elaboration should continue."""
    if statement_id in ctx.pre_trusted:
        return Anchor(AnchorKind.PRE_TRUSTED)
    if statement_id in ctx.beliefs:
        return Anchor(AnchorKind.BELIEF)
    if author is not None and author.id in ctx.accepted_authorities:
        return ctx.authority_anchor(author, domain)
    if not state.evidence_available:
        return Anchor(AnchorKind.EVIDENCE_EXHAUSTION)
    if state.exhausted:
        return Anchor(AnchorKind.RESOURCE_EXHAUSTION)
    return None


Selector = Callable[[str, Sequence[EvidenceItem]], Sequence[EvidenceItem]]


def elaborate(
    ctx: LatticeContext,
    claim_id: str,
    world: World,
    budget: EvaluationBudget,
    pool: Iterable[EvidenceItem] | None = None,
    select: Selector | None = None,
) -> TrustLattice:
    """Breadth-first recursive search for evidence below ``claim_id``.

    ``pool`` defaults to the world's evidence; ``select`` picks which of the
    candidate items for a statement get expanded (all of them by default).
    """
    claim = world.claim(claim_id)
    items: dict[str, EvidenceItem] = {}
    for e in world.evidence if pool is None else pool:
        items.setdefault(e.id, e)
    by_target: dict[str, list[EvidenceItem]] = {}
    for e in items.values():
        by_target.setdefault(e.target, []).append(e)

    nodes: dict[str, Node] = {claim_id: Node(claim_id, 1.0, None, "claim")}
    edges: list[Edge] = []
    parents: dict[str, list[str]] = {claim_id: []}
    queue = deque([(claim_id, 0)])

    def ancestors(n):
        out, stack = {n}, [n]
        while stack:
            for p in parents[stack.pop()]:
                if p not in out:
                    out.add(p)
                    stack.append(p)
        return out

    while queue:
        sid, depth = queue.popleft()
        above = ancestors(sid)
        # a statement already on the path would close a cycle
        cands = [e for e in by_target.get(sid, ()) if e.id not in above]
        item = items.get(sid)
        author = world.source(item.author) if item is not None else None
        state = ElaborationState(len(nodes), depth, budget.max_nodes, budget.max_depth, bool(cands))
        anchor = classify_anchor(sid, ctx, state, author=author, domain=claim.domain)
        if anchor is not None:
            nodes[sid] = replace(nodes[sid], anchor=anchor)
            continue
        chosen = list(select(sid, cands)) if select is not None else cands
        if not chosen:
            nodes[sid] = replace(nodes[sid], anchor=Anchor(AnchorKind.EVIDENCE_EXHAUSTION))
            continue
        added = 0
        for e in chosen:
            if e.id in nodes:
                if e.id in ancestors(sid):
                    continue
                edges.append(Edge(e.id, sid, e.polarity, e.strength))
                parents[e.id].append(sid)
                added += 1
                continue
            if len(nodes) >= budget.max_nodes:
                break
            nodes[e.id] = Node(e.id, 1.0, None, e.kind)
            parents[e.id] = [sid]
            edges.append(Edge(e.id, sid, e.polarity, e.strength))
            queue.append((e.id, depth + 1))
            added += 1
        if added == 0:
            nodes[sid] = replace(nodes[sid], anchor=Anchor(AnchorKind.RESOURCE_EXHAUSTION))
    return TrustLattice(claim_id, nodes, edges)


# --------------------------------------------------------------------------
# revision


class RevisionKind(str, enum.Enum):
    ACCEPTED = "AcceptedRevision"
    REJECTED = "RejectedCorrection"
    ARCHIVED_SWAP = "ArchivedSwap"


@dataclass(frozen=True)
class RevisionOutcome:
    kind: RevisionKind
    item_id: str
    cost: float
    lattice: TrustLattice | None = None
    labels: Mapping[str, AcceptanceLabel] | None = None
    demoted: tuple[str, ...] = ()
    flipped: tuple[str, ...] = ()

    @property
    def accepted(self) -> bool:
        return self.kind is not RevisionKind.REJECTED


@dataclass(frozen=True)
class ArchiveEntry:
    lattice: TrustLattice
    labels: Mapping[str, AcceptanceLabel]
    defeating_item: str


class LatticeArchive:
    """Stack of retired lattices, newest on top."""

    def __init__(self, entries: Iterable[ArchiveEntry] = ()):
        self._entries = list(entries)

    def push(self, lattice: TrustLattice, labels: Mapping[str, AcceptanceLabel], defeating_item: str):
        self._entries.append(ArchiveEntry(lattice, dict(labels), defeating_item))

    def peek(self) -> ArchiveEntry | None:
        return self._entries[-1] if self._entries else None

    def pop(self) -> ArchiveEntry:
        return self._entries.pop()

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)


def demanded_violation(polarity: Polarity) -> Label:
    """Label the target may not keep once the new item is accommodated."""
    return Label.REJECTED if polarity is Polarity.SUPPORTS else Label.ACCEPTED


def attach_item(lattice: TrustLattice, item: EvidenceItem, anchor: Anchor) -> TrustLattice:
    if item.id in lattice:
        raise LatticeError(f"item {item.id!r} is already in the lattice")
    if item.target not in lattice:
        raise LatticeError(f"item {item.id!r} targets {item.target!r}, which is not in the lattice")
    return lattice.with_node(Node(item.id, 1.0, anchor, item.kind), Edge(item.id, item.target, item.polarity, item.strength))


@dataclass(frozen=True)
class _Plan:
    cost: float
    key: tuple
    demoted: tuple[str, ...]
    flipped: tuple[str, ...]
    lattice: TrustLattice
    labels: dict


def _demotion_cost(anchor: Anchor, ctx: LatticeContext) -> float:
    if anchor.kind is AnchorKind.PRE_TRUSTED:
        return INFINITE_COST
    if anchor.kind is AnchorKind.BELIEF:
        return ctx.belief_flip_cost
    return ctx.authority_flip_cost


class _Scorer:
    """``node_scores`` specialised to one lattice, for repeated evaluation."""

    def __init__(self, lattice: TrustLattice, policy: TrustPolicy):
        self.order = lattice.topological_order
        pos = {n: i for i, n in enumerate(self.order)}
        self.pos = pos
        self.m = policy.attack_weight_multiplier
        self.fixed = []
        self.sup = []
        self.att = []
        for n in self.order:
            node = lattice.nodes[n]
            a = node.anchor
            self.fixed.append(anchor_score(node, policy) if a is not None and a.holds else None)
            kids = lattice.children(n)
            self.sup.append(tuple((pos[e.source], e.weight) for e in kids if e.polarity is Polarity.SUPPORTS))
            self.att.append(tuple((pos[e.source], e.weight) for e in kids if e.polarity is Polarity.ATTACKS))

    def scores(self, demoted: AbstractSet[int]) -> list[float]:
        out = [0.0] * len(self.order)
        m = self.m
        fsum = math.fsum
        for i in range(len(self.order)):
            f = self.fixed[i]
            if f is not None and i not in demoted:
                out[i] = f
                continue
            sup, att = self.sup[i], self.att[i]
            if not sup and not att:
                continue
            x = fsum(w * out[j] for j, w in sup) - m * fsum(w * out[j] for j, w in att)
            out[i] = -1.0 if x < -1.0 else 1.0 if x > 1.0 else x
        return out


def _label_of(score: float, theta: float) -> Label:
    if score >= theta:
        return Label.ACCEPTED
    if score <= -theta:
        return Label.REJECTED
    return Label.UNDECIDED


def _plan_revision(
    lattice: TrustLattice,
    labels: Mapping[str, AcceptanceLabel],
    item: EvidenceItem,
    anchor: Anchor,
    policy: TrustPolicy,
    ctx: LatticeContext,
    limit: float | None,
) -> _Plan | None:
    """Cheapest set of anchor demotions that accommodates ``item``.

    Cost of a demotion set D is the sum of the demotion costs in D plus the
    number of other original nodes whose label changes. Sets are explored by
    increasing size; a set of size k costs at least k times the cheapest
    demotion (plus one if the target has to flip without being demoted),
    which bounds the search by the best cost so far and by ``limit``.
    """
    base = attach_item(lattice, item, anchor)
    theta = policy.acceptance_threshold
    target = item.target
    forbidden = demanded_violation(item.polarity)
    scorer = _Scorer(base, policy)
    pos = scorer.pos
    orig_nodes = [n for n in base.topological_order if n in lattice.nodes]
    orig_idx = [pos[n] for n in orig_nodes]
    orig = [labels[n].label for n in orig_nodes]
    t_idx = pos[target]
    must_flip = labels[target].label is forbidden

    # any anchor may be worth demoting: one far from the target can still
    # block a flip elsewhere more cheaply than letting it happen
    cands = []
    for n in sorted(lattice.nodes):
        node = base.nodes[n]
        if n == item.id or node.anchor is None or not node.anchor.holds:
            continue
        # demoting a childless zero-score anchor changes nothing but the cost
        if not base.children(n) and anchor_score(node, policy) == 0.0:
            continue
        c = _demotion_cost(node.anchor, ctx)
        if math.isinf(c):
            continue
        cands.append((c, (-base.depth(n), n), pos[n]))
    cands.sort(key=lambda t: t[1])
    cheapest = min((c for c, _, _ in cands), default=0.0)

    best = None
    bound = INFINITE_COST if limit is None else float(limit)
    for k in range(len(cands) + 1):
        cap = bound if best is None else min(bound, best[0])
        if k * cheapest + (1 if must_flip and k == 0 else 0) > cap:
            break
        for combo in itertools.combinations(cands, k):
            dcost = sum(c for c, _, _ in combo)
            dset = {i for _, _, i in combo}
            lower = dcost + (1 if must_flip and t_idx not in dset else 0)
            if lower > cap:
                continue
            scores = scorer.scores(dset)
            if _label_of(scores[t_idx], theta) is forbidden:
                continue
            flips = 0
            for i, was in zip(orig_idx, orig):
                if i not in dset and _label_of(scores[i], theta) is not was:
                    flips += 1
            cost = dcost + flips
            key = (cost, sorted(key for _, key, _ in combo))
            if cost > cap or (best is not None and key >= best[1]):
                continue
            best = (cost, key, combo)
            cap = min(bound, cost)
    if best is None:
        return None
    cost, _, combo = best
    demoted = tuple(sorted(key[1] for _, key, _ in combo))
    result = base.with_demoted(demoted) if demoted else base
    new_labels = evaluate(result, policy)
    flipped = tuple(sorted(n for n in lattice.nodes if new_labels[n].label is not labels[n].label))
    return _Plan(cost, (), demoted, flipped, result, new_labels)


def revision_cost(
    lattice: TrustLattice,
    labels: Mapping[str, AcceptanceLabel],
    new_item: EvidenceItem,
    policy: TrustPolicy,
    ctx: LatticeContext | None = None,
    *,
    anchor: Anchor | None = None,
    limit: float | None = None,
) -> float:
    """Minimum number of label flips and anchor demotions to take in ``new_item``.

    Returns ``math.inf`` when only demoting a pre-trusted anchor (or nothing
    at all) would do. With ``limit`` set the search stops early and any
    value above ``limit`` only means "more than limit".
    """
    ctx = ctx or LatticeContext()
    anchor = anchor or Anchor(AnchorKind.PRE_TRUSTED)
    plan = _plan_revision(lattice, labels, new_item, anchor, policy, ctx, limit)
    if plan is None:
        return INFINITE_COST
    c = plan.cost
    return int(c) if float(c).is_integer() else c


def revise(
    ctx: LatticeContext,
    lattice: TrustLattice,
    new_item: EvidenceItem,
    policy: TrustPolicy,
    *,
    anchor: Anchor | None = None,
    labels: Mapping[str, AcceptanceLabel] | None = None,
    budget: EvaluationBudget | None = None,
) -> RevisionOutcome:
    """Accommodate ``new_item`` with minimal change, or reject it if too costly.

    ``anchor`` is how the agent anchors the incoming item itself; by default
    it is treated as pre-trusted (a correction the agent has already
    admitted). If the cheapest revision knocks the root out of acceptance
    and the context carries an archive, the old lattice is archived.
    """
    labels = labels if labels is not None else evaluate(lattice, policy)
    anchor = anchor or Anchor(AnchorKind.PRE_TRUSTED)
    plan = _plan_revision(lattice, labels, new_item, anchor, policy, ctx, ctx.stickiness_threshold)
    if plan is None or plan.cost > ctx.stickiness_threshold:
        cost = INFINITE_COST if plan is None else plan.cost
        return RevisionOutcome(RevisionKind.REJECTED, new_item.id, cost)
    root = lattice.root
    defeated = labels[root].label is Label.ACCEPTED and plan.labels[root].label is not Label.ACCEPTED
    fits = budget is None or len(plan.lattice) <= budget.max_nodes
    kind = RevisionKind.ACCEPTED
    if defeated and ctx.archive is not None and fits:
        ctx.archive.push(lattice, labels, new_item.id)
        kind = RevisionKind.ARCHIVED_SWAP
    return RevisionOutcome(kind, new_item.id, plan.cost, plan.lattice, plan.labels, plan.demoted, plan.flipped)


def reinstate(ctx: LatticeContext | None, archive: LatticeArchive, retracted_item_id: str) -> TrustLattice | None:
    top = archive.peek()
    if top is None or top.defeating_item != retracted_item_id:
        return None
    return archive.pop().lattice
