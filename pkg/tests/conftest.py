import pytest

from mevir.world import Claim, EvidenceItem, FramingVector, Polarity, Source, TruthMakerFact, World


def small_world(evidence=()):
    claims = (
        Claim("c1", domain="health"),
        Claim("c2", domain="health"),
        Claim("c3", domain="economy", framing=FramingVector.of(Liberty=1.0), violation=0.5),
    )
    facts = (TruthMakerFact("c1", True), TruthMakerFact("c2", False), TruthMakerFact("c3", True))
    sources = (
        Source("doc", {"health": 0.9}, group_tag="clinic", prestige=0.8, follower_count=10),
        Source("pundit", {"economy": 0.6}, group_tag="media", prestige=0.9, follower_count=500, honesty=0.3),
        Source("peer", {}, group_tag="town", prestige=0.2, follower_count=3),
    )
    return World(claims, facts, sources, tuple(evidence))


@pytest.fixture
def world():
    return small_world()


@pytest.fixture
def layered_world():
    ev = [
        EvidenceItem("e1", "doc", "c1", Polarity.SUPPORTS, 0.9),
        EvidenceItem("e2", "peer", "c1", Polarity.ATTACKS, 0.4),
        EvidenceItem("e3", "doc", "e1", Polarity.SUPPORTS, 0.8),
        EvidenceItem("e4", "pundit", "e2", Polarity.ATTACKS, 0.7),
        EvidenceItem("e5", "peer", "c2", Polarity.ATTACKS, 1.0),
    ]
    return small_world(ev)


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
