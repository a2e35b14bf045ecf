"""Scenario files: validation, population building, runs and their outputs."""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .agent import Agent, BiasConfig, Interventions, VirtueProfile
from .lattice import EvaluationBudget, TrustPolicy
from .moral_games import EmftProfile, MacProfile
from .profiler import data_path, template
from .tribes import SimConfig, SimHistory, make_network, propagate, rejected_correction_rate, tribe_fitness
from .world import StreamConfig, World, WorldError, generate_evidence_stream, ground_truth, world_from_dict


class ConfigError(ValueError):
    """Invalid scenario; the message names the offending key."""


_TOP = {"name", "description", "seed", "steps", "world", "stream", "cohorts", "agents", "network", "sim", "overrides", "outputs"}
_AGENT_COMMON = {
    "template",
    "mac",
    "emft",
    "group_tag",
    "in_groups",
    "biases",
    "virtues",
    "policy",
    "competence",
    "beliefs",
    "pre_trusted",
    "accepted_authorities",
    "interventions",
    "stickiness_threshold",
    "belief_flip_cost",
    "competence_threshold",
    "alarm_threshold",
    "sample_size",
    "memory_capacity",
    "observation_noise",
}
_COHORT = _AGENT_COMMON | {"name", "count", "noise"}
_AGENT = _AGENT_COMMON | {"id"}
_NETWORK = {"topology", "weight", "k", "p"}
_SIM = {"stream_exposure", "homophily_rate", "tribe_lambda", "tribe_tau", "fitness_weight", "max_nodes", "max_depth"}
_OVERRIDES = {"biases", "policy", "interventions"}
_OUTPUTS = {"csv", "summary", "lattices"}
_STREAM = {f.name for f in fields(StreamConfig)} - {"steps"}

CSV_HEADER = [
    "step",
    "tribe_count",
    "within_agreement",
    "cross_agreement",
    "polarization_index",
    "rejected_correction_rate",
    "stop_loss_events",
    "deference_events",
]

INTERVENTIONS = ("stop_loss", "adversarial_deference")


def _check_keys(d, allowed, where):
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where}: expected an object")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown key {where}.{k}" if where else f"unknown key {k}")


def _field_names(cls):
    return {f.name for f in fields(cls)}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(raw: Mapping) -> str:
    return hashlib.sha256(canonical_json(raw).encode("ascii")).hexdigest()


@dataclass
class ScenarioConfig:
    raw: dict
    name: str
    world: World
    stream: StreamConfig
    steps: int
    seed: int
    sim: SimConfig
    network: dict

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def validate(raw: Mapping) -> ScenarioConfig:
    """Check the whole scenario before anything runs."""
    _check_keys(raw, _TOP, "")
    for req in ("world", "steps"):
        if req not in raw:
            raise ConfigError(f"missing key {req}")
    if not raw.get("cohorts") and not raw.get("agents"):
        raise ConfigError("missing key cohorts (or agents)")
    try:
        world = world_from_dict(raw["world"])
    except (WorldError, TypeError, ValueError) as exc:
        raise ConfigError(f"world: {exc}") from None
    steps = raw["steps"]
    if not isinstance(steps, int) or steps < 1:
        raise ConfigError("steps must be a positive integer")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")

    stream_raw = raw.get("stream", {})
    _check_keys(stream_raw, _STREAM, "stream")
    try:
        stream = StreamConfig(steps=steps, **stream_raw)
    except (WorldError, TypeError, ValueError) as exc:
        raise ConfigError(f"stream: {exc}") from None
    for c in (stream.claim_weights or {}):
        if c not in world.claim_ids:
            raise ConfigError(f"stream.claim_weights.{c}: unknown claim")

    sim_raw = dict(raw.get("sim", {}))
    _check_keys(sim_raw, _SIM, "sim")
    budget = EvaluationBudget(int(sim_raw.pop("max_nodes", 12)), int(sim_raw.pop("max_depth", 3)))
    try:
        sim = SimConfig(budget=budget, **sim_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sim: {exc}") from None

    net = dict(raw.get("network", {"topology": "complete"}))
    _check_keys(net, _NETWORK, "network")
    if net.get("topology", "complete") not in ("complete", "empty", "ring", "erdos_renyi", "small_world"):
        raise ConfigError(f"network.topology: unknown topology {net.get('topology')!r}")

    ov = raw.get("overrides", {})
    _check_keys(ov, _OVERRIDES, "overrides")
    _check_agent_parts(ov, "overrides")
    _check_keys(raw.get("outputs", {}), _OUTPUTS, "outputs")

    source_ids = {s.id for s in world.sources}
    domains = set(world.domains)
    statements = set(world.claim_ids) | {e.id for e in world.evidence}
    for i, c in enumerate(raw.get("cohorts", [])):
        where = f"cohorts[{i}]"
        _check_keys(c, _COHORT, where)
        if int(c.get("count", 0)) < 1:
            raise ConfigError(f"{where}.count must be >= 1")
        _check_agent(c, where, source_ids, domains, statements)
    ids = set()
    for i, a in enumerate(raw.get("agents", [])):
        where = f"agents[{i}]"
        _check_keys(a, _AGENT, where)
        if "id" not in a:
            raise ConfigError(f"{where}.id missing")
        if a["id"] in ids:
            raise ConfigError(f"{where}.id duplicate {a['id']!r}")
        ids.add(a["id"])
        _check_agent(a, where, source_ids, domains, statements)
    return ScenarioConfig(dict(raw), raw.get("name", "scenario"), world, stream, steps, seed, sim, net)


def _check_agent_parts(d, where):
    for key, cls in (("biases", BiasConfig), ("virtues", VirtueProfile), ("interventions", Interventions), ("policy", TrustPolicy)):
        if key in d:
            _check_keys(d[key], _field_names(cls), f"{where}.{key}")
            try:
                cls(**d[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{where}.{key}: {exc}") from None


def _check_agent(a, where, source_ids, domains, statements):
    _check_agent_parts(a, where)
    if "template" in a:
        try:
            template(a["template"])
        except ValueError:
            raise ConfigError(f"{where}.template: unknown template {a['template']!r}") from None
    elif "mac" not in a or "emft" not in a:
        raise ConfigError(f"{where}: needs a template or both mac and emft")
    for key, cls in (("mac", MacProfile), ("emft", EmftProfile)):
        if key in a:
            try:
                cls.of(**a[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{where}.{key}: {exc}") from None
    for dom in a.get("competence", {}):
        if dom not in domains:
            raise ConfigError(f"{where}.competence.{dom}: unknown domain")
    for s in a.get("accepted_authorities") or ():
        if s not in source_ids:
            raise ConfigError(f"{where}.accepted_authorities: unknown source {s!r}")
    for key in ("beliefs", "pre_trusted"):
        for s in a.get(key, ()):
            if s not in statements:
                raise ConfigError(f"{where}.{key}: unknown statement {s!r}")


# --------------------------------------------------------------------------
# population


def _jitter(weights: np.ndarray, noise: float, rng: np.random.Generator) -> np.ndarray:
    if noise <= 0:
        return weights
    w = np.clip(weights + rng.normal(0.0, noise, size=weights.shape), 0.0, None)
    return w if w.sum() > 0 else weights


def _make_agent(spec: Mapping, agent_id: str, world: World, overrides: Mapping, rng: np.random.Generator, noise: float) -> Agent:
    tmpl = template(spec["template"]) if "template" in spec else None
    mac = MacProfile.of(**spec["mac"]).as_array() if "mac" in spec else tmpl.mac.as_array()
    emft = EmftProfile.of(**spec["emft"]).as_array() if "emft" in spec else tmpl.emft.as_array()
    mac = MacProfile.from_weights(_jitter(mac, noise, rng))
    emft = EmftProfile.from_weights(_jitter(emft, noise, rng))
    obs = float(spec.get("observation_noise", 0.0))
    reliability_noise = {s.id: float(rng.normal(0.0, obs)) for s in world.sources} if obs > 0 else {}

    def merged(key):
        return {**spec.get(key, {}), **overrides.get(key, {})}

    competence = {d: 0.5 for d in world.domains}
    competence.update(spec.get("competence", {}))
    accepted = spec.get("accepted_authorities")
    in_groups = spec.get("in_groups")
    optional = {
        k: spec[k]
        for k in ("stickiness_threshold", "belief_flip_cost", "competence_threshold", "alarm_threshold", "sample_size", "memory_capacity")
        if k in spec
    }
    return Agent(
        id=agent_id,
        mac=mac,
        emft=emft,
        virtues=VirtueProfile(**spec.get("virtues", {})),
        biases=BiasConfig(**merged("biases")),
        policy=TrustPolicy(**merged("policy")),
        beliefs=set(spec.get("beliefs", ())),
        pre_trusted=set(spec.get("pre_trusted", ())),
        accepted_authorities=set(accepted) if accepted is not None else None,
        competence=competence,
        group_tag=spec.get("group_tag", ""),
        in_groups=set(in_groups) if in_groups is not None else None,
        reliability_noise=reliability_noise,
        interventions=Interventions(**merged("interventions")),
        **optional,
    )


def build_population(cfg: ScenarioConfig, seed: int) -> list[Agent]:
    overrides = cfg.raw.get("overrides", {})
    pop = []
    for ci, c in enumerate(cfg.raw.get("cohorts", [])):
        rng = np.random.default_rng([seed, 101, ci])
        name = c.get("name", c.get("template", f"cohort{ci}"))
        for j in range(int(c["count"])):
            pop.append(_make_agent(c, f"{name}_{j:03d}", cfg.world, overrides, rng, float(c.get("noise", 0.0))))
    for ai, a in enumerate(cfg.raw.get("agents", [])):
        rng = np.random.default_rng([seed, 202, ai])
        pop.append(_make_agent(a, a["id"], cfg.world, overrides, rng, 0.0))
    return pop


# --------------------------------------------------------------------------
# running


def _f(x: float) -> float:
    return round(float(x), 12)


@dataclass
class RunResult:
    config: ScenarioConfig
    seed: int
    population: list[Agent]
    history: SimHistory
    summary: dict

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.history:
            m = r.metrics
            w.writerow(
                [r.step, m.tribe_count]
                + [f"{_f(x):.12g}" for x in (m.within_agreement, m.cross_agreement, m.polarization_index, m.rejected_correction_rate)]
                + [r.events.get("stop_loss", 0), r.events.get("deference", 0)]
            )
        return buf.getvalue()

    def summary_text(self) -> str:
        return json.dumps(self.summary, indent=2, sort_keys=True) + "\n"

    def lattices_text(self) -> str:
        dump = {a.id: {c: lat.to_dict() for c, lat in sorted(a.lattices.items())} for a in self.population}
        return json.dumps(dump, indent=1, sort_keys=True) + "\n"


def _rate(pop, prefix):
    return _f(rejected_correction_rate(pop, prefix))


def accuracy(population: Sequence[Agent], world: World) -> float:
    hits = [(a.label_of(c).value == "Accepted") == ground_truth(world, c) for a in population for c in world.claim_ids]
    return sum(hits) / len(hits) if hits else 1.0


def run(cfg: ScenarioConfig, seed: int | None = None) -> RunResult:
    seed = cfg.seed if seed is None else int(seed)
    population = build_population(cfg, seed)
    ids = [a.id for a in population]
    net = dict(cfg.network)
    topology = net.pop("topology", "complete")
    weight = float(net.pop("weight", 1.0))
    network = make_network(ids, topology, seed=[seed, 303], weight=weight, **net)
    stream = generate_evidence_stream(cfg.world, cfg.stream, seed)
    history = propagate(population, network, stream, cfg.steps, seed, world=cfg.world, config=cfg.sim)
    final = history.final
    m = final.metrics
    tribes = final.assignment
    events = {}
    for key in (
        "stop_loss",
        "deference",
        "defer",
        "corrections",
        "rejected",
        "true_corrections",
        "true_rejected",
        "belief_corrections",
        "belief_rejected",
        "leaf_corrections",
        "leaf_rejected",
    ):
        events[key] = int(sum(a.events[key] for a in population))
    summary = {
        "scenario": cfg.name,
        "seed": seed,
        "config_hash": cfg.hash,
        "steps": cfg.steps,
        "agents": len(population),
        "final_metrics": {
            "tribe_count": m.tribe_count,
            "within_agreement": _f(m.within_agreement),
            "cross_agreement": _f(m.cross_agreement),
            "polarization_index": _f(m.polarization_index),
            "rejected_correction_rate": _f(m.rejected_correction_rate),
        },
        "tribe_assignment": dict(sorted(tribes.tribes.items())),
        "tribe_fitness": {
            str(t): _f(tribe_fitness([a for a in population if tribes.tribes[a.id] == t], cfg.world, cfg.sim.fitness_weight))
            for t in range(tribes.count)
        },
        "events": events,
        "true_correction_rejection_rate": _rate(population, "true_"),
        "belief_correction_rejection_rate": _rate(population, "belief_"),
        "leaf_correction_rejection_rate": _rate(population, "leaf_"),
        "accuracy": _f(accuracy(population, cfg.world)),
    }
    return RunResult(cfg, seed, population, history, summary)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(result: RunResult, out_dir: str | os.PathLike, dump_lattices: bool = False) -> dict[str, Path]:
    outs = result.config.raw.get("outputs", {})
    out_dir = Path(out_dir)
    paths = {
        "csv": out_dir / outs.get("csv", "metrics.csv"),
        "summary": out_dir / outs.get("summary", "summary.json"),
    }
    _atomic_write(paths["csv"], result.csv_text())
    _atomic_write(paths["summary"], result.summary_text())
    if dump_lattices or "lattices" in outs:
        paths["lattices"] = out_dir / outs.get("lattices", "lattices.json")
        _atomic_write(paths["lattices"], result.lattices_text())
    return paths


# --------------------------------------------------------------------------
# variants


def load_raw(path: str | os.PathLike) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"scenario file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario is not valid JSON: {exc}") from None


def load(path: str | os.PathLike) -> ScenarioConfig:
    return validate(load_raw(path))


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in data_path("scenarios").iterdir() if p.suffix == ".json")


def bundled(name: str) -> dict:
    return load_raw(data_path("scenarios", name + ".json"))


def _agent_specs(raw):
    yield from raw.get("cohorts", [])
    yield from raw.get("agents", [])


def without_biases(raw: Mapping) -> dict:
    """Same scenario with every bias dial at 0, no out-group rejection and no homophily."""
    out = copy.deepcopy(dict(raw))
    for spec in _agent_specs(out):
        spec.pop("biases", None)
        if "policy" in spec:
            spec["policy"]["out_group_rejection"] = False
    ov = out.get("overrides", {})
    ov.pop("biases", None)
    if "policy" in ov:
        ov["policy"]["out_group_rejection"] = False
    if "sim" in out:
        out["sim"]["homophily_rate"] = 0.0
    return out


def with_interventions(raw: Mapping, on: bool, which: Sequence[str] = INTERVENTIONS) -> dict:
    out = copy.deepcopy(dict(raw))
    for w in which:
        if w not in INTERVENTIONS:
            raise ConfigError(f"unknown intervention {w!r}")
    if which:
        ov = out.setdefault("overrides", {})
        iv = dict(ov.get("interventions", {}))
        iv.update({w: bool(on) for w in which})
        ov["interventions"] = iv
    return out


AB_HEADER = [
    "seed",
    "polarization_off",
    "polarization_on",
    "polarization_delta",
    "accuracy_off",
    "accuracy_on",
    "accuracy_delta",
    "true_rejection_off",
    "true_rejection_on",
    "true_rejection_delta",
    "sign",
]


def run_ab(raw: Mapping, seeds: Sequence[int], which: Sequence[str] = INTERVENTIONS) -> list[dict]:
    """Paired runs per seed: the listed interventions forced off, then on."""
    if not seeds:
        raise ConfigError("need at least one seed")
    off_cfg = validate(with_interventions(raw, False, which))
    on_cfg = validate(with_interventions(raw, True, which))
    rows = []
    for s in seeds:
        off = run(off_cfg, s).summary
        on = run(on_cfg, s).summary
        p0, p1 = off["final_metrics"]["polarization_index"], on["final_metrics"]["polarization_index"]
        a0, a1 = off["accuracy"], on["accuracy"]
        r0, r1 = off["true_correction_rejection_rate"], on["true_correction_rejection_rate"]
        d = _f(p1 - p0)
        rows.append(
            {
                "seed": s,
                "polarization_off": p0,
                "polarization_on": p1,
                "polarization_delta": d,
                "accuracy_off": a0,
                "accuracy_on": a1,
                "accuracy_delta": _f(a1 - a0),
                "true_rejection_off": r0,
                "true_rejection_on": r1,
                "true_rejection_delta": _f(r1 - r0),
                "sign": "-" if d < 0 else "+" if d > 0 else "0",
            }
        )
    return rows


def ab_csv(rows: Sequence[Mapping]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, AB_HEADER, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()
