from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mevir.agent import (
    Agent,
    AgentError,
    Attribution,
    BiasConfig,
    Interventions,
    Path,
    UnknownDomainError,
    VirtueProfile,
    adversarial_deference,
    attribute_behavior,
    authority_scores,
    choose_path,
    form_belief,
    intuition_id,
    moral_stop_loss,
    reactance_filter,
    sample_evidence,
    select_authority,
)
from mevir.lattice import AnchorKind, EvaluationBudget, Label, TrustPolicy
from mevir.moral_games import EmftProfile, MacProfile
from mevir.world import (
    Claim,
    EvidenceItem,
    FramingVector,
    Polarity,
    Source,
    TruthMakerFact,
    World,
    ground_truth,
)

unit = st.floats(0.0, 1.0, allow_nan=False)


def make_agent(name="a", **kw):
    kw.setdefault("competence", {"health": 0.5, "general": 0.5})
    return Agent(name, MacProfile.of(Kin=1), kw.pop("emft", EmftProfile.of(Care=1)), **kw)


EXPERT = Source("expert", {"health": 0.95}, group_tag="x", prestige=0.1, follower_count=5)
CELEB = Source("celeb", {"health": 0.1, "film": 0.9}, group_tag="y", prestige=1.0, follower_count=10)
GURU = Source("guru", {"health": 0.3}, group_tag="z", prestige=0.4, follower_count=1000)


# -- path choice ---------------------------------------------------------------


def test_competent_agent_goes_direct():
    a = make_agent(competence={"health": 0.9}, virtues=VirtueProfile(humility=0.5))
    assert choose_path(a, "health", [EXPERT]).path is Path.DIRECT


def test_humble_novice_defers():
    a = make_agent(competence={"health": 0.1}, virtues=VirtueProfile(humility=0.8))
    got = choose_path(a, "health", [EXPERT, GURU])
    assert got.path is Path.DEFER and got.source is EXPERT


def test_overconfidence_keeps_novice_direct():
    a = make_agent(competence={"health": 0.1}, biases=BiasConfig(overconfidence=1.0))
    assert choose_path(a, "health", [EXPERT]).path is Path.DIRECT


def test_unknown_domain_raises():
    with pytest.raises(UnknownDomainError):
        choose_path(make_agent(), "astrology", [EXPERT])


# -- authority selection ---------------------------------------------------------


def test_unbiased_picks_most_competent():
    assert select_authority(make_agent(), [GURU, CELEB, EXPERT], domain="health") is EXPERT


def test_confirmation_picks_agreeing_source():
    a = make_agent(biases=BiasConfig(confirmation=1.0))
    stances = {"expert": -1.0, "guru": 1.0, "celeb": 0.0}
    assert select_authority(a, [EXPERT, GURU, CELEB], domain="health", stances=stances, prior=1.0) is GURU


def test_halo_picks_prestige_out_of_domain():
    a = make_agent(biases=BiasConfig(halo=1.0))
    assert select_authority(a, [EXPERT, CELEB], domain="health") is CELEB


def test_bandwagon_picks_most_followed():
    a = make_agent(biases=BiasConfig(bandwagon=1.0))
    assert select_authority(a, [EXPERT, CELEB, GURU], domain="health") is GURU


def test_hypocrite_scores_zero():
    liar = Source("liar", {"health": 1.0}, hypocrisy_flag=True)
    assert authority_scores(make_agent(), [liar], "health")["liar"] == 0.0


@given(unit, unit, unit, st.floats(-1, 1), st.floats(-1, 1))
def test_authority_scores_bounded(c, h, b, stance, prior):
    a = make_agent(biases=BiasConfig(confirmation=c, halo=h, bandwagon=b))
    scores = authority_scores(a, [EXPERT, CELEB, GURU], "health", {"expert": stance}, prior)
    assert all(0.0 <= v <= 1.0 for v in scores.values())


def test_select_authority_empty():
    with pytest.raises(AgentError):
        select_authority(make_agent(), [])


# -- sampling ---------------------------------------------------------------------


def _items(n, vivid=None, steps=None):
    return [
        EvidenceItem(f"i{i}", "expert", "c", Polarity.SUPPORTS, 1.0, vividness=(vivid or [0.5] * n)[i], step=(steps or [0] * n)[i])
        for i in range(n)
    ]


def _single_draw_freq(agent, items, trials=20000, now=None):
    counts = Counter()
    for s in range(trials):
        counts[sample_evidence(agent, items, 1, [7, s], now=now)[0].id] += 1
    return np.array([counts[e.id] / trials for e in items])


def test_flat_weights_sample_uniformly():
    items = _items(5)
    freq = _single_draw_freq(make_agent(), items)
    assert np.allclose(freq, 0.2, atol=0.015)


def test_availability_draws_in_proportion():
    vivid = [0.1, 0.3, 0.6, 0.9]
    steps = [0, 5, 8, 10]
    items = _items(4, vivid, steps)
    agent = make_agent(biases=BiasConfig(availability=1.0))
    w = np.array([v * np.exp(-(10 - s) / agent.recency_scale) for v, s in zip(vivid, steps)])
    freq = _single_draw_freq(agent, items, now=10)
    assert np.allclose(freq, w / w.sum(), atol=0.015)


def test_anchoring_favors_first_item():
    items = _items(6)
    agent = make_agent(biases=BiasConfig(anchoring=1.0))
    hits = Counter()
    for s in range(3000):
        for e in sample_evidence(agent, items, 2, s):
            hits[e.id] += 1
    assert all(hits["i0"] > hits[f"i{i}"] for i in range(1, 6))


@settings(max_examples=50)
@given(st.integers(1, 10), st.integers(0, 12), st.integers(0, 2**31 - 1), unit, unit)
def test_sample_is_subset_in_order_and_seeded(k, n, seed, avail, attn):
    items = _items(n)
    agent = make_agent(biases=BiasConfig(availability=avail), virtues=VirtueProfile(attentiveness=attn))
    got = sample_evidence(agent, items, k, seed)
    assert len(got) <= min(k, n)
    assert len(got) == len({e.id for e in got})
    idx = [items.index(e) for e in got]
    assert idx == sorted(idx)
    assert got == sample_evidence(agent, items, k, seed)


# -- reactance and attribution ----------------------------------------------------


MANDATE = EvidenceItem("m", "expert", "c", Polarity.SUPPORTS, 1.0, coercive=True)


def test_reactance_zero_is_identity():
    assert reactance_filter(make_agent(accepted_authorities=set()), MANDATE, rng=0) is MANDATE


def test_reactance_inverts_distrusted_mandate():
    a = make_agent(biases=BiasConfig(reactance=1.0), accepted_authorities=set())
    out = reactance_filter(a, MANDATE, rng=0)
    assert out.polarity is Polarity.ATTACKS and out.inverted


@pytest.mark.parametrize("coercive", [True, False])
@pytest.mark.parametrize("trusted", [True, False])
def test_reactance_decision_table(coercive, trusted):
    a = make_agent(biases=BiasConfig(reactance=1.0), accepted_authorities={"expert"} if trusted else set())
    item = EvidenceItem("p", "expert", "c", Polarity.SUPPORTS, 1.0, coercive=coercive)
    flipped = reactance_filter(a, item, rng=0).polarity is Polarity.ATTACKS
    assert flipped == (coercive and not trusted)


def test_attribution_asymmetry():
    a = make_agent(group_tag="us", biases=BiasConfig(attribution_asymmetry=1.0))
    assert attribute_behavior(a, "us", "negative", rng=0) is Attribution.SITUATIONAL
    assert attribute_behavior(a, "them", "negative", rng=0) is Attribution.DISPOSITIONAL


@given(st.sampled_from(["negative", "positive"]), st.integers(0, 1000))
def test_no_asymmetry_ignores_group(valence, seed):
    a = make_agent(group_tag="us")
    assert attribute_behavior(a, "us", valence, rng=seed) is attribute_behavior(a, "them", valence, rng=seed)


# -- interventions -----------------------------------------------------------------


def test_stop_loss_table():
    on = make_agent(interventions=Interventions(stop_loss=True))
    off = make_agent()
    assert moral_stop_loss(on, 0.9, 0.9) == 0.0
    assert moral_stop_loss(on, 0.3, 0.3) == 0.3
    assert moral_stop_loss(off, 0.9, 0.9) == 0.9
    assert on.events["stop_loss"] == 1


def test_adversarial_deference_adds_one_rival():
    a = make_agent(interventions=Interventions(adversarial_deference=True))
    got = adversarial_deference(a, [CELEB, EXPERT], {"guru"}, "health")
    assert got == {"guru", "expert"} and a.bypass == {"expert"}


def test_adversarial_deference_disabled_or_empty():
    off = make_agent()
    assert adversarial_deference(off, [EXPERT], {"guru"}) == {"guru"}
    on = make_agent(interventions=Interventions(adversarial_deference=True))
    assert adversarial_deference(on, [], {"guru"}) == {"guru"}
    assert on.events["deference_noop"] == 1 and not on.bypass


# -- belief formation ----------------------------------------------------------------


def fixture_world(support_strength=1.0):
    doc = Source("doc", {"health": 0.9})
    claims = (
        Claim("c1", domain="health"),
        Claim("c2", domain="health"),
        Claim("c3", domain="health", framing=FramingVector.of(Purity=1.0), violation=0.9),
    )
    facts = (TruthMakerFact("c1", True), TruthMakerFact("c2", False), TruthMakerFact("c3", True))
    ev = (
        EvidenceItem("e1", "doc", "c1", Polarity.SUPPORTS, 1.0),
        EvidenceItem("e2", "doc", "c2", Polarity.ATTACKS, 1.0),
        EvidenceItem("e3", "doc", "c3", Polarity.SUPPORTS, support_strength),
    )
    return World(claims, facts, (doc,), ev)


def test_competent_agent_tracks_truth():
    w = fixture_world()
    a = make_agent(competence={"health": 0.9})
    for cid, score in (("c1", 0.9), ("c2", -0.9)):
        label, lat = form_belief(a, cid, w, EvaluationBudget(), seed=1)
        assert (label.label is Label.ACCEPTED) == ground_truth(w, cid)
        assert label.score == pytest.approx(score)
        assert len(lat) == 2


def test_believed_claim_short_circuits():
    w = fixture_world()
    a = make_agent(beliefs={"c2"})
    label, lat = form_belief(a, "c2", w, EvaluationBudget(), seed=1)
    assert label.label is Label.ACCEPTED and len(lat) == 1
    assert lat.nodes["c2"].anchor.kind is AnchorKind.BELIEF


def test_alarm_overrides_evidence_unless_stopped():
    # support alone scores 0.9 * 0.55 = 0.495, enough at theta 0.3
    w = fixture_world(0.55)
    pol = TrustPolicy(acceptance_threshold=0.3)
    base = dict(competence={"health": 0.9}, emft=EmftProfile.of(Purity=1), policy=pol)
    alarmed = make_agent(**base)
    label, lat = form_belief(alarmed, "c3", w, EvaluationBudget(), seed=1)
    assert label.label is Label.REJECTED
    assert lat.nodes[intuition_id("c3")].anchor.kind is AnchorKind.BELIEF
    calm = make_agent(interventions=Interventions(stop_loss=True), **base)
    label, lat = form_belief(calm, "c3", w, EvaluationBudget(), seed=1)
    assert label.label is Label.ACCEPTED and intuition_id("c3") not in lat


def test_novice_defers_to_single_authority():
    w = fixture_world()
    a = make_agent(competence={"health": 0.1}, virtues=VirtueProfile(humility=0.8))
    label, lat = form_belief(a, "c1", w, EvaluationBudget(), seed=1)
    assert a.events["defer"] == 1
    assert lat.nodes["e1"].anchor.kind is AnchorKind.ACCEPTED_AUTHORITY
    assert label.label is Label.ACCEPTED
