import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mevir.moral_games import EmftProfile
from mevir.profiler import (
    Lexicon,
    ProfilerError,
    analyze,
    emft_l1,
    fixture_names,
    load_cue_rules,
    load_lexicon,
    load_templates,
    match_terms,
    match_tribe,
    read_fixture,
    score_foundations,
    template,
    tokenize,
)
from mevir.world import FOUNDATIONS


@pytest.fixture(scope="module")
def lexicon():
    return load_lexicon()


@pytest.fixture(scope="module")
def templates():
    return load_templates()


def test_liberty_and_purity_lead(lexicon):
    top = [f for f, _ in score_foundations(["poison", "veins", "mandate", "tyranny"], lexicon).ranked()[:2]]
    assert set(top) == {"Liberty", "Purity"}


def test_care_leads_solidarity(lexicon):
    assert score_foundations(["solidarity", "protect", "vulnerable"], lexicon).ranked()[0][0] == "Care"


def test_empty_document(lexicon):
    s = score_foundations([], lexicon)
    assert s.total == 0 and s.profile is None and not s.hits


def test_phrase_beats_parts():
    lex = Lexicon({"big pharma": {"Liberty": 1.0}, "pharma": {"Care": 1.0}})
    assert match_terms(tokenize("Big Pharma and pharma"), lex) == {"big pharma": 1, "pharma": 1}


def test_tokenize_lowercases():
    assert tokenize("Don't TREAD on me!") == ["don't", "tread", "on", "me"]


def test_bad_lexicon_rows():
    with pytest.raises(ProfilerError):
        Lexicon({"x": {"Ownership": 1.0}})
    with pytest.raises(ProfilerError):
        Lexicon({"x": {"Care": -1.0}})


def test_missing_lexicon_file(tmp_path):
    with pytest.raises(ProfilerError):
        load_lexicon(tmp_path / "nope.tsv")


def test_lexicon_env_override(tmp_path, monkeypatch):
    p = tmp_path / "lex.tsv"
    p.write_text("term\tfoundation\tweight\nzorp\tAuthority\t1\n", encoding="utf-8")
    monkeypatch.setenv("MEVIR_LEXICON", str(p))
    lex = load_lexicon()
    assert len(lex) == 1 and score_foundations(["zorp"], lex).ranked() == [("Authority", 1.0)]


@given(st.lists(st.sampled_from(["poison", "mandate", "care", "family", "nation", "fair", "xyzzy", "the"]), max_size=30))
def test_scores_additive_and_nonnegative(tokens):
    lex = load_lexicon()
    s = score_foundations(tokens, lex)
    assert all(v >= 0 for v in s.totals.values())
    assert math.isclose(s.total, sum(h_v for h in s.hits for h_v in h.contributions.values()), abs_tol=1e-9)
    if s.profile is not None:
        assert math.isclose(sum(s.profile.weights), 1.0)


def test_template_self_match(templates):
    for t in templates:
        best, d = match_tribe(t.emft, templates)[0]
        assert best.name == t.name and d == 0.0


def test_sovereignty_profile_matches(templates):
    prof = EmftProfile.of(Liberty=0.5, Purity=0.35, Care=0.15)
    assert match_tribe(prof, templates)[0][0].name == "sovereignty_purity"


@given(st.lists(st.floats(0, 1), min_size=7, max_size=7).filter(lambda w: sum(w) > 0))
def test_l1_matching_is_sorted(w):
    ranked = match_tribe(EmftProfile.from_weights(w), load_templates())
    ds = [d for _, d in ranked]
    assert ds == sorted(ds) and all(0 <= d <= 2 + 1e-12 for d in ds)


def test_six_templates_bundled(templates):
    names = {t.name for t in templates}
    assert names == {
        "sovereignty_purity",
        "community_health",
        "economic_liberty",
        "global_responsibility",
        "doomer",
        "accelerationist",
    }
    assert set(fixture_names()) == names


@pytest.mark.parametrize("name", ["sovereignty_purity", "doomer", "economic_liberty", "accelerationist"])
def test_fixture_top_match(name, lexicon, templates):
    rep = analyze(read_fixture(name), lexicon, templates, load_cue_rules())
    assert rep.level4["matches"][0]["tribe"] == name


def test_accelerationist_mac_frame(lexicon, templates):
    rep = analyze(read_fixture("accelerationist"), lexicon, templates, load_cue_rules())
    assert "Heroism" in rep.level4["mac_frame_of_best_match"]


def test_no_signal_document(lexicon, templates):
    rep = analyze("zzz qqq 12345", lexicon, templates, load_cue_rules())
    assert rep.level4["no_signal"] is True and rep.level4["profile"] == {}


def test_empty_document_rejected(lexicon, templates):
    with pytest.raises(ProfilerError):
        analyze("   ", lexicon, templates, load_cue_rules())


def test_report_renderings_carry_same_content(lexicon, templates):
    rep = analyze(read_fixture("doomer"), lexicon, templates, load_cue_rules())
    text = rep.to_text()
    d = rep.to_dict()
    for m in d["level4_moral_mapping"]["matches"]:
        assert m["tribe"] in text
    for r in d["rules_fired"]:
        assert r["rule"] in text
    assert set(d) == {"level1_truth_makers", "level2_anchors", "level3_biases", "level4_moral_mapping", "rules_fired"}


def test_levels_marked_heuristic(lexicon, templates):
    rep = analyze(read_fixture("community_health"), lexicon, templates, load_cue_rules())
    assert rep.level1["heuristic"] and rep.level2["heuristic"] and rep.level3["heuristic"]


def test_template_lookup():
    assert template("doomer").name == "doomer"
    with pytest.raises(ProfilerError):
        template("nihilist")


def test_template_profiles_are_normalized(templates):
    for t in templates:
        assert math.isclose(sum(t.emft.weights), 1.0) and set(t.emft.as_dict()) == set(FOUNDATIONS)
        assert emft_l1(t.emft, t.emft) == 0.0
