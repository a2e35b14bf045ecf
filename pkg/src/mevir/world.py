"""Ground-truth world: claims, facts, sources and evidence items.

The world is built once (usually from a scenario file) and never mutated
during a run, so it can be shared freely between simulation replicas.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

FOUNDATIONS = (
    "Care",
    "FairnessEquity",
    "FairnessProportionality",
    "Liberty",
    "Loyalty",
    "Authority",
    "Purity",
)
N_FOUNDATIONS = len(FOUNDATIONS)

_NORM_TOL = 1e-9


class WorldError(ValueError):
    """Malformed world definition or broken referential integrity."""


class UnknownClaimError(KeyError, WorldError):
    pass


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise WorldError(f"{name}={value!r} outside [0, 1]")
    return value


@dataclass(frozen=True)
class FramingVector:
    """Per-foundation weight of a piece of content, each in [0, 1]."""

    values: tuple[float, ...] = (0.0,) * N_FOUNDATIONS

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) != N_FOUNDATIONS:
            raise WorldError(f"framing needs {N_FOUNDATIONS} components, got {len(vals)}")
        for name, v in zip(FOUNDATIONS, vals):
            _check_unit(f"framing.{name}", v)
        object.__setattr__(self, "values", vals)

    @classmethod
    def of(cls, **weights: float) -> "FramingVector":
        unknown = set(weights) - set(FOUNDATIONS)
        if unknown:
            raise WorldError(f"unknown foundation(s): {sorted(unknown)}")
        return cls(tuple(weights.get(f, 0.0) for f in FOUNDATIONS))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def __getitem__(self, foundation: str) -> float:
        return self.values[FOUNDATIONS.index(foundation)]


class Polarity(str, enum.Enum):
    SUPPORTS = "supports"
    ATTACKS = "attacks"

    @property
    def sign(self) -> int:
        return 1 if self is Polarity.SUPPORTS else -1

    def inverted(self) -> "Polarity":
        return Polarity.ATTACKS if self is Polarity.SUPPORTS else Polarity.SUPPORTS


@dataclass(frozen=True)
class Claim:
    id: str
    text_tag: str = ""
    domain: str = "general"
    framing: FramingVector = field(default_factory=FramingVector)
    # how strongly accepting the claim offends the foundations it is framed in
    violation: float = 0.0

    def __post_init__(self):
        _check_unit(f"claim {self.id} violation", self.violation)


@dataclass(frozen=True)
class TruthMakerFact:
    claim_id: str
    truth_value: bool
    proxy_fidelity: float = 1.0

    def __post_init__(self):
        _check_unit(f"fact {self.claim_id} proxy_fidelity", self.proxy_fidelity)


@dataclass(frozen=True)
class Source:
    id: str
    competence: Mapping[str, float] = field(default_factory=dict)
    group_tag: str = ""
    prestige: float = 0.5
    follower_count: int = 0
    honesty: float = 1.0
    hypocrisy_flag: bool = False

    def __post_init__(self):
        for dom, c in self.competence.items():
            _check_unit(f"source {self.id} competence[{dom}]", c)
        _check_unit(f"source {self.id} prestige", self.prestige)
        _check_unit(f"source {self.id} honesty", self.honesty)
        if int(self.follower_count) < 0:
            raise WorldError(f"source {self.id} follower_count must be >= 0")

    def competence_in(self, domain: str) -> float:
        return float(self.competence.get(domain, 0.0))

    def mean_competence(self) -> float:
        if not self.competence:
            return 0.0
        return float(np.mean(list(self.competence.values())))


@dataclass(frozen=True)
class EvidenceItem:
    id: str
    author: str
    target: str
    polarity: Polarity
    strength: float = 1.0
    vividness: float = 0.5
    recency: int = 0
    framing: FramingVector = field(default_factory=FramingVector)
    veracity: bool = True
    kind: str = "report"
    coercive: bool = False
    step: int = 0
    inverted: bool = False

    def __post_init__(self):
        object.__setattr__(self, "polarity", Polarity(self.polarity))
        _check_unit(f"evidence {self.id} strength", self.strength)
        _check_unit(f"evidence {self.id} vividness", self.vividness)
        if self.recency < 0:
            raise WorldError(f"evidence {self.id} recency must be >= 0")

    def aged(self, now: int) -> "EvidenceItem":
        return replace(self, recency=max(0, now - self.step))


@dataclass(frozen=True)
class World:
    claims: tuple[Claim, ...]
    facts: tuple[TruthMakerFact, ...]
    sources: tuple[Source, ...]
    evidence: tuple[EvidenceItem, ...] = ()
    domains: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "claims", tuple(self.claims))
        object.__setattr__(self, "facts", tuple(self.facts))
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "evidence", tuple(self.evidence))
        domains = tuple(self.domains) or tuple(sorted({c.domain for c in self.claims}))
        object.__setattr__(self, "domains", domains)
        self._index()

    def _index(self):
        claims = _unique("claim", self.claims)
        sources = _unique("source", self.sources)
        evidence = _unique("evidence", self.evidence)
        overlap = set(claims) & set(evidence)
        if overlap:
            raise WorldError(f"ids used for both claims and evidence: {sorted(overlap)}")
        facts: dict[str, TruthMakerFact] = {}
        for f in self.facts:
            if f.claim_id not in claims:
                raise WorldError(f"fact refers to unknown claim {f.claim_id!r}")
            if f.claim_id in facts:
                raise WorldError(f"duplicate fact for claim {f.claim_id!r}")
            facts[f.claim_id] = f
        missing = set(claims) - set(facts)
        if missing:
            raise WorldError(f"claims without a fact: {sorted(missing)}")
        for c in self.claims:
            if c.domain not in self.domains:
                raise WorldError(f"claim {c.id} has undeclared domain {c.domain!r}")
        for e in self.evidence:
            if e.author not in sources:
                raise WorldError(f"evidence {e.id} has unknown author {e.author!r}")
            if e.target not in claims and e.target not in evidence:
                raise WorldError(f"evidence {e.id} targets unknown statement {e.target!r}")
        object.__setattr__(self, "_claims", claims)
        object.__setattr__(self, "_sources", sources)
        object.__setattr__(self, "_evidence", evidence)
        object.__setattr__(self, "_facts", facts)
        roots = {}
        for e in self.evidence:
            roots[e.id] = _resolve_root(e.id, evidence, claims)
        object.__setattr__(self, "_roots", roots)

    # lookups ------------------------------------------------------------
    def claim(self, claim_id: str) -> Claim:
        try:
            return self._claims[claim_id]
        except KeyError:
            raise UnknownClaimError(claim_id) from None

    def source(self, source_id: str) -> Source:
        try:
            return self._sources[source_id]
        except KeyError:
            raise WorldError(f"unknown source {source_id!r}") from None

    def item(self, item_id: str) -> EvidenceItem:
        return self._evidence[item_id]

    def has_statement(self, statement_id: str) -> bool:
        return statement_id in self._claims or statement_id in self._evidence

    @property
    def claim_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.claims)

    def claim_of(self, statement_id: str) -> str | None:
        """Claim a statement ultimately bears on (itself for claims)."""
        if statement_id in self._claims:
            return statement_id
        return self._roots.get(statement_id)

    def evidence_for(self, statement_id: str) -> list[EvidenceItem]:
        return [e for e in self.evidence if e.target == statement_id]


def _unique(kind, items) -> dict:
    out = {}
    for it in items:
        if it.id in out:
            raise WorldError(f"duplicate {kind} id {it.id!r}")
        out[it.id] = it
    return out


def _resolve_root(item_id, evidence, claims):
    seen = set()
    cur = item_id
    while cur in evidence:
        if cur in seen:
            raise WorldError(f"evidence cycle through {cur!r}")
        seen.add(cur)
        cur = evidence[cur].target
    return cur if cur in claims else None


def ground_truth(world: World, claim_id: str) -> bool:
    if claim_id not in world._facts:
        raise UnknownClaimError(claim_id)
    return world._facts[claim_id].truth_value


def statement_truth(world: World, statement_id: str, extra: Mapping[str, EvidenceItem] | None = None) -> bool:
    """Truth of a claim, or the veracity of an evidence item."""
    if statement_id in world._claims:
        return ground_truth(world, statement_id)
    if extra and statement_id in extra:
        return extra[statement_id].veracity
    return world.item(statement_id).veracity


def frame_salience(framing: FramingVector, profile) -> float:
    """Dot product of a framing vector with a normalized foundation profile."""
    w = np.asarray(profile.weights, dtype=float)
    if w.shape != (N_FOUNDATIONS,) or np.any(w < 0) or abs(w.sum() - 1.0) > _NORM_TOL:
        raise WorldError("profile must be a non-negative 7-vector summing to 1")
    s = math.fsum(f * p for f, p in zip(framing.values, w))
    return min(1.0, max(0.0, s))


# --------------------------------------------------------------------------
# evidence streams


@dataclass(frozen=True)
class StreamConfig:
    steps: int = 50
    items_per_step: int = 4
    misinformation_rate: float = 0.0
    evidence_target_rate: float = 0.0
    coercive_rate: float = 0.0
    strength: tuple[float, float] = (0.5, 1.0)
    vividness: tuple[float, float] = (0.2, 0.8)
    misinfo_vividness_boost: float = 0.0
    kind_weights: Mapping[str, float] = field(default_factory=lambda: {"report": 1.0})
    claim_weights: Mapping[str, float] | None = None

    def __post_init__(self):
        for name in ("misinformation_rate", "evidence_target_rate", "coercive_rate", "misinfo_vividness_boost"):
            _check_unit(f"stream.{name}", getattr(self, name))
        if self.steps < 0 or self.items_per_step < 0:
            raise WorldError("stream steps and items_per_step must be >= 0")
        for lo, hi in (self.strength, self.vividness):
            _check_unit("stream range", lo)
            _check_unit("stream range", hi)
            if lo > hi:
                raise WorldError("stream range must satisfy lo <= hi")


def _pick(rng: np.random.Generator, ids: Sequence[str], weights: Iterable[float]) -> str:
    w = np.asarray(list(weights), dtype=float)
    if w.sum() <= 0:
        w = np.ones(len(ids))
    return ids[int(rng.choice(len(ids), p=w / w.sum()))]


def generate_evidence_stream(world: World, config: StreamConfig, seed: int) -> list[EvidenceItem]:
    """Emit ``steps * items_per_step`` evidence items, each tagged with its step.

    An item is misinformation (``veracity=False``) with probability
    ``misinformation_rate``. True items are authored preferentially by honest
    sources and false ones by dishonest sources. The polarity is whatever
    makes the item's veracity come out right against the truth makers.
    """
    if not world.claims or not world.sources:
        raise WorldError("cannot stream evidence from a world without claims and sources")
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0x5743])
    claim_ids = list(world.claim_ids)
    cw = [1.0] * len(claim_ids)
    if config.claim_weights:
        cw = [float(config.claim_weights.get(c, 0.0)) for c in claim_ids]
    source_ids = [s.id for s in world.sources]
    kinds = sorted(config.kind_weights)
    out = []
    for step in range(config.steps):
        for i in range(config.items_per_step):
            claim_id = _pick(rng, claim_ids, cw)
            target = claim_id
            if config.evidence_target_rate > 0 and rng.random() < config.evidence_target_rate:
                pool = [e.id for e in world.evidence if world.claim_of(e.id) == claim_id]
                if pool:
                    target = pool[int(rng.integers(len(pool)))]
            veracity = not (rng.random() < config.misinformation_rate)
            author = _pick(
                rng,
                source_ids,
                (s.honesty if veracity else 1.0 - s.honesty for s in world.sources),
            )
            target_true = statement_truth(world, target)
            polarity = Polarity.SUPPORTS if target_true == veracity else Polarity.ATTACKS
            strength = float(rng.uniform(*config.strength))
            vivid = float(rng.uniform(*config.vividness))
            if not veracity:
                vivid = min(1.0, vivid + config.misinfo_vividness_boost)
            kind = _pick(rng, kinds, (config.kind_weights[k] for k in kinds))
            coercive = bool(rng.random() < config.coercive_rate)
            out.append(
                EvidenceItem(
                    id=f"s{step}_{i}",
                    author=author,
                    target=target,
                    polarity=polarity,
                    strength=strength,
                    vividness=vivid,
                    recency=0,
                    framing=world.claim(claim_id).framing,
                    veracity=veracity,
                    kind=kind,
                    coercive=coercive,
                    step=step,
                )
            )
    return out


# --------------------------------------------------------------------------
# JSON scenario loading


def _framing(raw, where) -> FramingVector:
    if raw is None:
        return FramingVector()
    if isinstance(raw, Mapping):
        return FramingVector.of(**raw)
    if len(raw) != N_FOUNDATIONS:
        raise WorldError(f"{where}: framing must have {N_FOUNDATIONS} elements")
    return FramingVector(tuple(raw))


def world_from_dict(data: Mapping) -> World:
    allowed = {"claims", "facts", "sources", "evidence", "domains"}
    extra = set(data) - allowed
    if extra:
        raise WorldError(f"unknown world key(s): {sorted(extra)}")
    try:
        claims = [
            Claim(
                id=c["id"],
                text_tag=c.get("text_tag", ""),
                domain=c.get("domain", "general"),
                framing=_framing(c.get("framing"), f"claim {c['id']}"),
                violation=c.get("violation", 0.0),
            )
            for c in data.get("claims", [])
        ]
        facts = [
            TruthMakerFact(f["claim_id"], bool(f["truth_value"]), f.get("proxy_fidelity", 1.0))
            for f in data.get("facts", [])
        ]
        sources = [
            Source(
                id=s["id"],
                competence=dict(s.get("competence", {})),
                group_tag=s.get("group_tag", ""),
                prestige=s.get("prestige", 0.5),
                follower_count=int(s.get("follower_count", 0)),
                honesty=s.get("honesty", 1.0),
                hypocrisy_flag=bool(s.get("hypocrisy_flag", False)),
            )
            for s in data.get("sources", [])
        ]
        evidence = [
            EvidenceItem(
                id=e["id"],
                author=e["author"],
                target=e["target"],
                polarity=Polarity(e["polarity"]),
                strength=e.get("strength", 1.0),
                vividness=e.get("vividness", 0.5),
                recency=e.get("recency", 0),
                framing=_framing(e.get("framing"), f"evidence {e['id']}"),
                veracity=bool(e.get("veracity", True)),
                kind=e.get("kind", "report"),
                coercive=bool(e.get("coercive", False)),
            )
            for e in data.get("evidence", [])
        ]
    except KeyError as exc:
        raise WorldError(f"missing required field {exc}") from None
    return World(claims, facts, sources, evidence, tuple(data.get("domains", ())))


def framing_to_list(f: FramingVector) -> list[float]:
    return list(f.values)
