from __future__ import annotations

import pytest

from pipescale.artifacts import ConfigError, DecodingParams, RunConfig


def test_decoding_defaults():
    decoding = DecodingParams()
    assert decoding.temperature == 1.0
    assert decoding.top_p == 0.9
    assert decoding.max_tokens == 1500


def test_decoding_validation():
    with pytest.raises(ConfigError):
        DecodingParams(temperature=-0.1)
    with pytest.raises(ConfigError):
        DecodingParams(top_p=0.0)
    with pytest.raises(ConfigError):
        DecodingParams(max_tokens=0)


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(pruning_ratio=1.5)
    with pytest.raises(ConfigError):
        RunConfig(branching_factor=0)
    with pytest.raises(ConfigError):
        RunConfig(judge_repeats=0)
    with pytest.raises(ConfigError):
        RunConfig(judger_level="brutal")
    with pytest.raises(ConfigError):
        RunConfig(budget_unit="dollars")
    with pytest.raises(ConfigError):
        RunConfig(stage_pruning={"nonsense": 0.5})


def test_stage_plans_follow_schedule():
    config = RunConfig(pruning_ratio=0.6, branching_factor=5)
    for stage in ("profiling", "visualization", "insight"):
        plan = config.plan_for(stage)
        assert plan.branching == 5
        assert plan.retained == 2


def test_per_stage_pruning_override():
    config = RunConfig(pruning_ratio=0.6, branching_factor=5,
                       stage_pruning={"insight": 0.0})
    assert config.plan_for("profiling").retained == 2
    assert config.plan_for("insight").retained == 5


def test_config_round_trips_to_dict():
    config = RunConfig(pruning_ratio=0.4, seed=9, extra_judge_levels=("easy",))
    d = config.to_dict()
    assert d["pruning_ratio"] == 0.4
    assert d["decoding"]["max_tokens"] == 1500
    assert d["extra_judge_levels"] == ["easy"]
