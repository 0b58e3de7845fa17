"""Pipeline-engine contracts on the simulated backend.

Call-count examples are frozen from hand-expanding the per-stage
accounting list: per run, b profile calls (+1 prune when pruning), one
direction call per retained profile (+1 prune), two calls per retained
direction, and per verified chart one insight call (+1 prune) plus one
judge call per retained insight.
"""

from __future__ import annotations

import pytest

from pipescale.artifacts import RunConfig
from pipescale.budget import BudgetLedger, exact_run_budget
from pipescale.engine import PipelineAborted, run_pipeline
from pipescale.gateway import GenerationBackend, SimFaults, SimulatedBackend
from pipescale.gateway.requests import BackendError
from pipescale.sandbox import VirtualExecutor
from pipescale.simkernel.protocol import SimulatorModel


def run_once(config, model=None, faults=None, executor=None, run_index=0, leg=0, dataset=None):
    ledger = BudgetLedger()
    backend = SimulatedBackend(model or SimulatorModel(), faults=faults)
    result = run_pipeline(config, dataset, backend, ledger,
                          executor=executor, run_index=run_index, leg=leg)
    return result, ledger


@pytest.fixture()
def dataset(toy_dataset):
    return toy_dataset


def test_best_of_n_run_yields_one_report(dataset):
    # rho=0.8, b=5, pass prob 1: every surviving run yields exactly 1 report
    config = RunConfig(pruning_ratio=0.8, branching_factor=5, seed=3)
    result, ledger = run_once(config, dataset=dataset)
    assert len(result.reports) == 1
    assert ledger.formula_totals() == (10, 3)


def test_minimal_run_costs_six_generation_calls(dataset):
    # rho=0, b=1: profile + direction + code + verify + insight + judge
    config = RunConfig(pruning_ratio=0.0, branching_factor=1, seed=3)
    result, ledger = run_once(config, dataset=dataset)
    assert len(result.reports) == 1
    assert ledger.formula_totals() == (6, 0)


def test_full_branching_yields_cubic_reports(dataset):
    config = RunConfig(pruning_ratio=0.0, branching_factor=5, seed=3)
    result, ledger = run_once(config, dataset=dataset)
    assert len(result.reports) == 125
    assert ledger.formula_totals() == (210, 0)
    assert result.verified_counts == [5, 5, 5, 5, 5]


def test_report_count_identity_under_partial_verification(dataset):
    config = RunConfig(pruning_ratio=0.4, branching_factor=5, seed=17)
    model = SimulatorModel(pass_prob=0.6)
    result, ledger = run_once(config, model, dataset=dataset)
    n_prime = 3
    assert len(result.reports) == sum(result.verified_counts) * n_prime
    breakdown = exact_run_budget(5, n_prime, result.verified_counts, 0.4)
    assert ledger.formula_totals() == (breakdown.gen_calls, breakdown.prune_calls)


def test_event_log_matches_exact_decomposition_across_configs(dataset):
    import random

    rng = random.Random(5)
    from pipescale.pruning import retained_count

    for _ in range(25):
        rho = rng.choice([0.0, 0.2, 0.4, 0.6, 0.8])
        b = rng.randint(1, 6)
        p = rng.choice([0.5, 0.75, 1.0])
        config = RunConfig(pruning_ratio=rho, branching_factor=b, seed=rng.randint(0, 10**6))
        result, ledger = run_once(config, SimulatorModel(pass_prob=p), dataset=dataset)
        breakdown = exact_run_budget(b, retained_count(b, rho), result.verified_counts, rho)
        assert ledger.formula_totals() == (breakdown.gen_calls, breakdown.prune_calls)


def test_judge_repeats_multiply_judging_events(dataset):
    config = RunConfig(pruning_ratio=0.8, branching_factor=5, seed=3, judge_repeats=3)
    result, ledger = run_once(config, dataset=dataset)
    assert ledger.stage_calls()["judge"] == 3
    assert len(result.reports[0].score.per_repeat) == 3


def test_lineage_is_a_dag_path(dataset):
    config = RunConfig(pruning_ratio=0.6, branching_factor=5, seed=23)
    result, _ = run_once(config, dataset=dataset)
    for report in result.reports:
        profile_id, direction_id, chart_id, insight_id = report.lineage
        assert direction_id.startswith(profile_id)
        assert chart_id == f"{direction_id}-c"
        assert insight_id.startswith(direction_id)
        assert report.id == insight_id
        assert report.chart.verified


def test_no_insight_call_precedes_chart_verification(dataset):
    config = RunConfig(pruning_ratio=0.2, branching_factor=4, seed=9)
    _, ledger = run_once(config, dataset=dataset)
    verify_events = insight_events = 0
    for event in ledger.events:
        if event.stage == "verify":
            verify_events += 1
        if event.stage == "insight" and event.category == "generation":
            # each drafting call belongs to a chart verified strictly earlier
            assert insight_events < verify_events
            insight_events += 1


def test_determinism_same_seed_identical_logs_and_reports(dataset):
    config = RunConfig(pruning_ratio=0.6, branching_factor=5, seed=77, judge_repeats=2)
    first_result, first_ledger = run_once(config, dataset=dataset)
    second_result, second_ledger = run_once(config, dataset=dataset)
    assert [e.to_json() for e in first_ledger.events] == [e.to_json() for e in second_ledger.events]
    assert [r.to_dict() for r in first_result.reports] == [r.to_dict() for r in second_result.reports]


def test_different_run_index_changes_outcome(dataset):
    config = RunConfig(pruning_ratio=0.6, branching_factor=5, seed=77)
    a, _ = run_once(config, SimulatorModel(pass_prob=0.7), run_index=0, dataset=dataset)
    b, _ = run_once(config, SimulatorModel(pass_prob=0.7), run_index=1, dataset=dataset)
    assert a.scores != b.scores


def test_empty_profile_completion_narrows_branch(dataset):
    faults = SimFaults(rules={"profiling": {2: "empty"}})
    config = RunConfig(pruning_ratio=0.0, branching_factor=5, seed=3)
    result, ledger = run_once(config, faults=faults, dataset=dataset)
    assert result.dropped_candidates == 1
    # 5 profile calls still made; downstream runs on 4 branches
    assert ledger.stage_calls()["profiling"] == 5
    assert result.verified_counts == [5, 5, 5, 5]
    assert len(result.reports) == 100


def test_malformed_evaluator_ranking_repaired_not_requeried(dataset):
    faults = SimFaults(rules={"eval_meta": {0: "bad_ranking"}})
    config = RunConfig(pruning_ratio=0.8, branching_factor=5, seed=3)
    result, ledger = run_once(config, faults=faults, dataset=dataset)
    # still exactly one profiling prune call, run completes
    assert ledger.formula_totals() == (10, 3)
    assert len(result.reports) == 1


def test_execution_failure_drives_rectification(dataset):
    config = RunConfig(pruning_ratio=0.8, branching_factor=5, seed=3, rectify_attempts=2)
    result, ledger = run_once(config, dataset=dataset, executor=None)
    chart_id = result.reports[0].lineage[2]
    executor = VirtualExecutor(fail_plan={chart_id: 1})
    result2, ledger2 = run_once(config, dataset=dataset, executor=executor)
    rectifications = [e for e in ledger2.events if e.category == "rectification"]
    assert len(rectifications) == 1
    # code gen + rectify + verify reached the backend for that chart
    assert ledger2.stage_calls()["code"] == ledger.stage_calls()["code"] + 1
    assert result2.reports[0].chart.rectify_count == 1
    assert result2.reports[0].chart.verified
    # formula totals exclude rectification, so they are unchanged
    assert ledger2.formula_totals() == ledger.formula_totals()


def test_all_rectifications_fail_keeps_unverified_artifact(dataset):
    config = RunConfig(pruning_ratio=0.8, branching_factor=5, seed=3, rectify_attempts=2)
    base, _ = run_once(config, dataset=dataset)
    chart_id = base.reports[0].lineage[2]
    executor = VirtualExecutor(fail_plan={chart_id: 10})
    result, ledger = run_once(config, dataset=dataset, executor=executor)
    assert result.reports == []
    assert result.verified_counts == [0]
    assert len([e for e in ledger.events if e.category == "rectification"]) == 2
    # no verification call was spent on the dead chart
    assert "verify" not in ledger.stage_calls()


def test_failed_judge_repeat_degrades_score(dataset):
    # both attempts of the first repeat fail to parse -> repeat missing,
    # final score averages the surviving repeats and is flagged degraded
    faults = SimFaults(rules={"judge_harsh": {0: "malformed", 1: "malformed"}})
    config = RunConfig(pruning_ratio=0.8, branching_factor=5, seed=3, judge_repeats=3)
    result, ledger = run_once(config, faults=faults, dataset=dataset)
    score = result.reports[0].score
    assert score.failed_repeats == 1
    assert len(score.per_repeat) == 2
    assert score.degraded and not score.missing
    assert score.final == sum(score.per_repeat) / 2
    retries = [e for e in ledger.events if e.category == "judge_retry"]
    assert len(retries) == 1


def test_all_judge_repeats_failing_marks_report_missing(dataset):
    faults = SimFaults(rules={"judge_harsh": {i: "malformed" for i in range(6)}})
    config = RunConfig(pruning_ratio=0.8, branching_factor=5, seed=3, judge_repeats=3)
    result, _ = run_once(config, faults=faults, dataset=dataset)
    assert result.reports[0].score.missing
    assert result.missing_scores == 1
    assert result.scores == []


def test_backend_failure_aborts_with_partial_log(dataset):
    class FlakyBackend(GenerationBackend):
        def __init__(self):
            self.inner = SimulatedBackend()
            self.calls = 0

        def complete(self, request):
            self.calls += 1
            if self.calls > 3:
                raise BackendError("provider down", status=503, retryable=True)
            return self.inner.complete(request)

    config = RunConfig(pruning_ratio=0.0, branching_factor=5, seed=3)
    ledger = BudgetLedger()
    with pytest.raises(PipelineAborted):
        run_pipeline(config, dataset, FlakyBackend(), ledger)
    assert len(ledger.events) == 3  # partial log preserved


def test_unreadable_dataset_is_config_error(tmp_path):
    from pipescale.artifacts import ConfigError
    from pipescale.datasets import load_dataset

    with pytest.raises(ConfigError):
        load_dataset(tmp_path / "missing.csv")
    bad = tmp_path / "empty.csv"
    bad.write_text("")
    with pytest.raises(ConfigError):
        load_dataset(bad)


def test_perfect_evaluator_prunes_to_stage_local_quality_maxima(dataset):
    # evaluator_judge_correlation = 1: each prune keeps exactly the
    # candidates with the highest latent quality at that stage
    from pipescale.simkernel import protocol as proto

    model = SimulatorModel(judge_noise=0.0, evaluator_judge_correlation=1.0)
    config = RunConfig(pruning_ratio=0.8, branching_factor=5, seed=123)
    result, _ = run_once(config, model, dataset=dataset)
    (report,) = result.reports
    rs = proto.run_seed(config.seed, 0, 0)

    profile_qualities = [proto.profile_quality(rs, i, model) for i in range(5)]
    best_profile = max(range(5), key=lambda i: profile_qualities[i])
    assert report.lineage[0].endswith(f"p{best_profile:02d}")

    parent_q = profile_qualities[best_profile]
    direction_qualities = [
        proto.direction_quality(rs, best_profile, j, parent_q, model) for j in range(5)
    ]
    best_direction = max(range(5), key=lambda j: direction_qualities[j])
    assert report.lineage[1].endswith(f"d{best_direction:02d}")

    insight_qualities = [
        proto.insight_quality(rs, best_profile, best_direction, k,
                              direction_qualities[best_direction], model)
        for k in range(5)
    ]
    best_insight = max(range(5), key=lambda k: insight_qualities[k])
    assert report.lineage[3].endswith(f"k{best_insight:02d}")
    # with zero judge noise the final score is the latent quality, up to
    # integer trait rounding (4 traits -> quarter-point grid)
    assert report.score.final == pytest.approx(insight_qualities[best_insight], abs=0.125)
