"""Offline narrative profiling: lexicon scoring, tribe matching, cue-rule reports.

Levels 1 to 3 of the report are cue-term heuristics and are labelled as
such. Level 4 is the lexicon score plus a ranked match against the tribe
templates, with every lexicon hit listed so each score can be audited.
"""
from __future__ import annotations

import csv
import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .lattice import AnchorKind
from .moral_games import EmftProfile, MacProfile
from .world import FOUNDATIONS

LEXICON_ENV = "MEVIR_LEXICON"
_TOKEN = re.compile(r"[a-z0-9]+(?:'[a-z]+)?")


class ProfilerError(ValueError):
    pass


_DATA = Path(__file__).resolve().parent / "data"


def data_path(*parts: str) -> Path:
    return _DATA.joinpath(*parts)


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def _stem(tok: str) -> str:
    # deliberately tiny: strip the commonest English inflections
    for suf in ("ing", "ed", "es", "s"):
        if tok.endswith(suf) and len(tok) - len(suf) >= 3:
            return tok[: -len(suf)]
    return tok


# --------------------------------------------------------------------------
# lexicon


@dataclass(frozen=True)
class Lexicon:
    """term (a token or space-separated phrase) -> foundation -> weight."""

    entries: Mapping[str, Mapping[str, float]]

    def __post_init__(self):
        clean = {}
        for term, contrib in self.entries.items():
            key = " ".join(tokenize(term))
            if not key:
                raise ProfilerError(f"lexicon term {term!r} has no tokens")
            for f, w in contrib.items():
                if f not in FOUNDATIONS:
                    raise ProfilerError(f"lexicon term {term!r}: unknown foundation {f!r}")
                if w < 0 or math.isnan(w):
                    raise ProfilerError(f"lexicon term {term!r}: negative weight")
            merged = dict(clean.get(key, {}))
            for f, w in contrib.items():
                merged[f] = merged.get(f, 0.0) + float(w)
            clean[key] = merged
        object.__setattr__(self, "entries", clean)
        object.__setattr__(self, "_max_len", max((len(k.split()) for k in clean), default=0))

    def __len__(self):
        return len(self.entries)

    def __contains__(self, term):
        return term in self.entries

    @classmethod
    def from_tsv(cls, path: str | os.PathLike) -> "Lexicon":
        path = Path(path)
        if not path.is_file():
            raise ProfilerError(f"lexicon file not found: {path}")
        entries: dict[str, dict[str, float]] = {}
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh, delimiter="\t")
            if reader.fieldnames is None or not {"term", "foundation", "weight"} <= set(reader.fieldnames):
                raise ProfilerError(f"{path}: expected columns term, foundation, weight")
            for row in reader:
                try:
                    w = float(row["weight"])
                except (TypeError, ValueError):
                    raise ProfilerError(f"{path}: bad weight for {row['term']!r}") from None
                d = entries.setdefault(row["term"], {})
                d[row["foundation"]] = d.get(row["foundation"], 0.0) + w
        return cls(entries)

    def stemmed(self) -> "Lexicon":
        out: dict[str, dict[str, float]] = {}
        for term, contrib in self.entries.items():
            key = " ".join(_stem(t) for t in term.split())
            d = out.setdefault(key, {})
            for f, w in contrib.items():
                d[f] = max(d.get(f, 0.0), w)
        return Lexicon(out)


def load_lexicon(path: str | os.PathLike | None = None) -> Lexicon:
    if path is None:
        path = os.environ.get(LEXICON_ENV) or data_path("lexicon.tsv")
    return Lexicon.from_tsv(path)


@dataclass(frozen=True)
class Hit:
    term: str
    count: int
    contributions: Mapping[str, float]


@dataclass(frozen=True)
class FoundationScores:
    totals: Mapping[str, float]
    hits: tuple[Hit, ...]

    @property
    def total(self) -> float:
        return math.fsum(self.totals.values())

    @property
    def profile(self) -> EmftProfile | None:
        if self.total <= 0:
            return None
        return EmftProfile.from_weights([self.totals[f] for f in FOUNDATIONS])

    def ranked(self) -> list[tuple[str, float]]:
        return sorted(((f, v) for f, v in self.totals.items() if v > 0), key=lambda t: (-t[1], t[0]))

    def as_array(self) -> np.ndarray:
        return np.array([self.totals[f] for f in FOUNDATIONS])


def match_terms(tokens: Sequence[str], lexicon: Lexicon) -> dict[str, int]:
    """Count lexicon terms, longest phrase first at each position."""
    counts: dict[str, int] = {}
    i, n = 0, len(tokens)
    longest = lexicon._max_len
    while i < n:
        for size in range(min(longest, n - i), 0, -1):
            cand = " ".join(tokens[i : i + size])
            if cand in lexicon.entries:
                counts[cand] = counts.get(cand, 0) + 1
                i += size
                break
        else:
            i += 1
    return counts


def score_foundations(tokens: Iterable[str], lexicon: Lexicon, stem: bool = False) -> FoundationScores:
    """Sum lexicon contributions of the matched terms.

    Tokens are lowercased; phrases win over their component tokens. The
    totals are raw sums; ``.profile`` normalizes them when anything matched.
    """
    if len(lexicon) == 0:
        raise ProfilerError("empty lexicon")
    toks = [t.lower() for t in tokens]
    if stem:
        toks = [_stem(t) for t in toks]
        lexicon = lexicon.stemmed()
    counts = match_terms(toks, lexicon)
    totals = {f: 0.0 for f in FOUNDATIONS}
    hits = []
    for term in sorted(counts):
        contrib = {f: w * counts[term] for f, w in sorted(lexicon.entries[term].items()) if w > 0}
        for f, v in contrib.items():
            totals[f] += v
        if contrib:
            hits.append(Hit(term, counts[term], contrib))
    return FoundationScores(totals, tuple(hits))


# --------------------------------------------------------------------------
# tribe templates


@dataclass(frozen=True)
class TribeTemplate:
    name: str
    emft: EmftProfile
    mac: MacProfile
    anchor_kinds: tuple[AnchorKind, ...] = ()
    authorities: tuple[str, ...] = ()
    emotions: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, name: str, d: Mapping) -> "TribeTemplate":
        return cls(
            name,
            EmftProfile.of(**d["emft"]),
            MacProfile.of(**d["mac"]),
            tuple(AnchorKind(k) for k in d.get("anchor_kinds", ())),
            tuple(d.get("authorities", ())),
            tuple(d.get("emotions", ())),
        )


def load_templates(path: str | os.PathLike | None = None) -> list[TribeTemplate]:
    path = Path(path) if path is not None else data_path("templates.json")
    if not path.is_file():
        raise ProfilerError(f"templates file not found: {path}")
    raw = json.loads(path.read_text(encoding="utf-8"))
    return [TribeTemplate.from_dict(name, raw[name]) for name in sorted(raw)]


def template(name: str) -> TribeTemplate:
    for t in load_templates():
        if t.name == name:
            return t
    raise ProfilerError(f"no bundled template named {name!r}")


def emft_l1(a: EmftProfile, b: EmftProfile) -> float:
    return float(np.abs(a.as_array() - b.as_array()).sum())


def match_tribe(profile: EmftProfile, templates: Sequence[TribeTemplate]) -> list[tuple[TribeTemplate, float]]:
    if not templates:
        raise ProfilerError("need at least one template")
    ranked = [(t, emft_l1(profile, t.emft)) for t in templates]
    return sorted(ranked, key=lambda p: (p[1], p[0].name))


# --------------------------------------------------------------------------
# cue rules and reports


@dataclass(frozen=True)
class CueRule:
    id: str
    level: int
    flag: str
    terms: tuple[str, ...]

    def __post_init__(self):
        if self.level not in (1, 2, 3):
            raise ProfilerError(f"cue rule {self.id}: level must be 1, 2 or 3")


def load_cue_rules(path: str | os.PathLike | None = None) -> list[CueRule]:
    path = Path(path) if path is not None else data_path("cue_rules.json")
    if not path.is_file():
        raise ProfilerError(f"cue rules file not found: {path}")
    return [CueRule(r["id"], int(r["level"]), r["flag"], tuple(r["terms"])) for r in json.loads(path.read_text(encoding="utf-8"))]


def _find_phrase(tokens: Sequence[str], phrase: Sequence[str]) -> int:
    k = len(phrase)
    return sum(1 for i in range(len(tokens) - k + 1) if list(tokens[i : i + k]) == list(phrase))


@dataclass(frozen=True)
class RuleFiring:
    rule: str
    level: int
    flag: str
    matched: tuple[str, ...]


@dataclass
class ProfileReport:
    level1: dict = field(default_factory=dict)
    level2: dict = field(default_factory=dict)
    level3: dict = field(default_factory=dict)
    level4: dict = field(default_factory=dict)
    rules_fired: list[RuleFiring] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "level1_truth_makers": self.level1,
            "level2_anchors": self.level2,
            "level3_biases": self.level3,
            "level4_moral_mapping": self.level4,
            "rules_fired": [
                {"rule": r.rule, "level": r.level, "flag": r.flag, "matched": list(r.matched)} for r in self.rules_fired
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        d = self.to_dict()
        lines = []
        for key in ("level1_truth_makers", "level2_anchors", "level3_biases", "level4_moral_mapping"):
            lines.append(key.replace("_", " ").title() + ":")
            lines += _indent(d[key], 1)
        lines.append("Rules Fired:")
        for r in d["rules_fired"]:
            lines.append(f"  [{r['level']}] {r['rule']} -> {r['flag']} ({', '.join(r['matched'])})")
        return "\n".join(lines) + "\n"


def _indent(obj, depth: int) -> list[str]:
    pad = "  " * depth
    out = []
    if isinstance(obj, dict):
        for k in sorted(obj):
            v = obj[k]
            if isinstance(v, (dict, list)) and v:
                out.append(f"{pad}{k}:")
                out += _indent(v, depth + 1)
            else:
                out.append(f"{pad}{k}: {v}")
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, (dict, list)):
                out.append(f"{pad}-")
                out += _indent(v, depth + 1)
            else:
                out.append(f"{pad}- {v}")
    return out


def _r(x: float) -> float:
    return round(float(x), 6)


def analyze(
    document: str,
    lexicon: Lexicon,
    templates: Sequence[TribeTemplate],
    cue_rules: Sequence[CueRule],
    top: int = 3,
) -> ProfileReport:
    if not document.strip():
        raise ProfilerError("empty document")
    tokens = tokenize(document)
    fired = []
    for rule in cue_rules:
        matched = tuple(t for t in rule.terms if _find_phrase(tokens, tokenize(t)) > 0)
        if matched:
            fired.append(RuleFiring(rule.id, rule.level, rule.flag, matched))
    by_level = {lvl: [f for f in fired if f.level == lvl] for lvl in (1, 2, 3)}

    scores = score_foundations(tokens, lexicon)
    profile = scores.profile
    ranked = scores.ranked()
    report = ProfileReport(rules_fired=fired)
    report.level1 = {
        "heuristic": True,
        "dominant_framing": [f for f, _ in ranked[:2]],
        "evidence_style": sorted({f.flag for f in by_level[1]}),
    }
    report.level2 = {
        "heuristic": True,
        "anchor_guesses": sorted({f.flag for f in by_level[2]}),
    }
    report.level3 = {
        "heuristic": True,
        "bias_flags": sorted({f.flag for f in by_level[3]}),
    }
    if profile is None:
        report.level4 = {"no_signal": True, "scores": {}, "profile": {}, "hits": [], "matches": []}
    else:
        matches = match_tribe(profile, templates)
        report.level4 = {
            "no_signal": False,
            "scores": {f: _r(v) for f, v in scores.totals.items() if v > 0},
            "profile": {f: _r(v) for f, v in profile.as_dict().items() if v > 0},
            "hits": [{"term": h.term, "count": h.count, "adds": {f: _r(v) for f, v in h.contributions.items()}} for h in scores.hits],
            "matches": [{"tribe": t.name, "distance": _r(d)} for t, d in matches[:top]],
        }
        best = matches[0][0]
        mac = sorted(((v, k) for k, v in best.mac.as_dict().items() if v > 0), key=lambda p: (-p[0], p[1]))
        report.level4["mac_frame_of_best_match"] = [k for _, k in mac]
    return report


def fixture_names() -> list[str]:
    return sorted(p.stem for p in data_path("fixtures").iterdir() if p.suffix == ".txt")


def read_fixture(name: str) -> str:
    return data_path("fixtures", name + ".txt").read_text(encoding="utf-8")
