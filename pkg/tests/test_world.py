import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mevir.moral_games import EmftProfile
from mevir.world import (
    FOUNDATIONS,
    FramingVector,
    StreamConfig,
    UnknownClaimError,
    WorldError,
    frame_salience,
    generate_evidence_stream,
    ground_truth,
)

unit = st.floats(0.0, 1.0, allow_nan=False)


def test_ground_truth_lookup(world):
    assert ground_truth(world, "c1") is True
    assert ground_truth(world, "c2") is False
    with pytest.raises(UnknownClaimError):
        ground_truth(world, "c9")


def test_stream_rate_extremes(world):
    honest = generate_evidence_stream(world, StreamConfig(steps=10, misinformation_rate=0.0), 1)
    assert honest and all(e.veracity for e in honest)
    lies = generate_evidence_stream(world, StreamConfig(steps=10, misinformation_rate=1.0), 1)
    assert lies and not any(e.veracity for e in lies)


def test_stream_is_seed_deterministic(world):
    cfg = StreamConfig(steps=20, misinformation_rate=0.3, evidence_target_rate=0.4, coercive_rate=0.2)
    assert generate_evidence_stream(world, cfg, 42) == generate_evidence_stream(world, cfg, 42)
    assert generate_evidence_stream(world, cfg, 42) != generate_evidence_stream(world, cfg, 43)


def test_stream_size_and_steps(world):
    s = generate_evidence_stream(world, StreamConfig(steps=7, items_per_step=3), 0)
    assert len(s) == 21
    assert sorted({e.step for e in s}) == list(range(7))
    assert len({e.id for e in s}) == 21


def test_salience_zero_framing():
    assert frame_salience(FramingVector(), EmftProfile.of(Care=1)) == 0.0


def test_salience_uniform_profile():
    assert math.isclose(frame_salience(FramingVector.of(Liberty=1.0), EmftProfile.uniform()), 1 / 7)


def test_salience_worked_case():
    prof = EmftProfile.of(Liberty=0.5, Purity=0.3, Care=0.2)
    fr = FramingVector.of(Liberty=1.0, Purity=0.8)
    expected = sum(fr[f] * prof[f] for f in FOUNDATIONS)
    assert math.isclose(expected, 0.74)
    assert math.isclose(frame_salience(fr, prof), 0.74)


def test_framing_rejects_out_of_range():
    with pytest.raises(WorldError):
        FramingVector.of(Care=1.5)


@given(st.lists(unit, min_size=7, max_size=7), st.lists(unit, min_size=7, max_size=7))
def test_salience_in_unit_interval(framing, weights):
    if sum(weights) == 0:
        weights[0] = 1.0
    s = frame_salience(FramingVector(tuple(framing)), EmftProfile.from_weights(weights))
    assert 0.0 <= s <= 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), unit, unit)
def test_stream_items_target_known_statements(seed, misinfo, target_rate):
    from tests.conftest import small_world

    w = small_world()
    stream = generate_evidence_stream(w, StreamConfig(steps=5, misinformation_rate=misinfo, evidence_target_rate=target_rate), seed)
    known = set(w.claim_ids)
    for e in stream:
        assert e.target in known or e.target in {x.id for x in stream}
        assert 0.0 <= e.strength <= 1.0
