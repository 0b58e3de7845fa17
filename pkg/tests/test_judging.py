from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pipescale.judging import (
    JUDGE_LEVELS,
    JudgeScore,
    JudgementError,
    ReportScore,
    parse_judgement,
    scalar_of,
    trait_names,
    validate_judgement,
)


def fenced(doc: dict) -> str:
    return "```json\n" + json.dumps(doc) + "\n```"


def harsh_doc(values=(80, 70, 60, 90)) -> dict:
    names = trait_names("harsh")
    return {
        "insight": "x",
        "scores": dict(zip(names, values)),
        "evidence": "because",
        "conclusion": "fine",
    }


def test_trait_schemas():
    assert trait_names("easy") == ("Readability", "OnTopic", "TrendAlignment")
    assert trait_names("moderate") == ("Correctness", "Specificity", "InterpretiveValue")
    assert len(trait_names("harsh")) == 4
    with pytest.raises(JudgementError):
        trait_names("brutal")


def test_parse_judgement_harsh_four_traits():
    score = parse_judgement(fenced(harsh_doc()), "harsh")
    assert list(score.traits.values()) == [80, 70, 60, 90]
    assert scalar_of(score) == pytest.approx(75.0)


def test_parse_judgement_missing_trait_rejected():
    doc = harsh_doc()
    del doc["scores"]["So-what quality"]
    with pytest.raises(JudgementError):
        parse_judgement(fenced(doc), "harsh")


def test_parse_judgement_extra_trait_rejected():
    doc = harsh_doc()
    doc["scores"]["Bonus"] = 50
    with pytest.raises(JudgementError):
        parse_judgement(fenced(doc), "harsh")


def test_parse_judgement_wrong_level_schema_rejected():
    easy_doc = {
        "scores": {"Readability": 10, "OnTopic": 20, "TrendAlignment": 30},
        "evidence": "",
        "conclusion": "",
    }
    assert validate_judgement(easy_doc, "easy").traits["OnTopic"] == 20
    with pytest.raises(JudgementError):
        validate_judgement(easy_doc, "moderate")


def test_parse_judgement_range_and_integrality():
    doc = harsh_doc((105, 70, 60, 90))
    with pytest.raises(JudgementError):
        parse_judgement(fenced(doc), "harsh")
    doc = harsh_doc((80.5, 70, 60, 90))
    with pytest.raises(JudgementError):
        parse_judgement(fenced(doc), "harsh")
    doc = harsh_doc((True, 70, 60, 90))
    with pytest.raises(JudgementError):
        parse_judgement(fenced(doc), "harsh")


def test_scalar_of_endpoints():
    names = trait_names("easy")
    zero = JudgeScore(level="easy", traits={n: 0 for n in names})
    full = JudgeScore(level="easy", traits={n: 100 for n in names})
    assert scalar_of(zero) == 0.0
    assert scalar_of(full) == 100.0


@given(st.lists(st.integers(min_value=0, max_value=100), min_size=4, max_size=4))
@settings(max_examples=200, deadline=None)
def test_scalar_permutation_invariant_and_bounded(values):
    names = trait_names("harsh")
    forward = JudgeScore(level="harsh", traits=dict(zip(names, values)))
    backward = JudgeScore(level="harsh", traits=dict(zip(names, reversed(values))))
    assert scalar_of(forward) == pytest.approx(scalar_of(backward))
    assert 0.0 <= scalar_of(forward) <= 100.0


def test_report_score_aggregation():
    score = ReportScore(level="harsh", per_repeat=[75.0, 73.0, 77.0])
    assert score.final == pytest.approx(75.0)
    assert not score.degraded and not score.missing


def test_report_score_single_repeat():
    score = ReportScore(level="harsh", per_repeat=[64.25])
    assert score.final == 64.25


def test_report_score_degraded_and_missing():
    degraded = ReportScore(level="harsh", per_repeat=[70.0, 74.0], failed_repeats=1)
    assert degraded.final == pytest.approx(72.0)
    assert degraded.degraded
    missing = ReportScore(level="harsh", failed_repeats=3)
    assert missing.missing and missing.final is None


def test_report_score_order_invariant():
    a = ReportScore(level="easy", per_repeat=[60.0, 70.0, 80.0])
    b = ReportScore(level="easy", per_repeat=[80.0, 60.0, 70.0])
    assert a.final == pytest.approx(b.final)


def test_all_levels_round_trip_via_simulator_texts():
    from pipescale.gateway import GenerationRequest, SimulatedBackend

    backend = SimulatedBackend()
    for level in JUDGE_LEVELS:
        request = GenerationRequest(
            template_id=f"judge_{level}",
            sim={"run_seed": 5, "kind": "judge", "i": 0, "j": 1, "k": 2,
                 "repeat": 0, "level": level},
        )
        score = parse_judgement(backend.complete(request).text, level)
        assert set(score.traits) == set(trait_names(level))
