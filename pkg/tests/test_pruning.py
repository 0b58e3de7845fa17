from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pipescale.pruning import PruningError, prune, repair_ranking, retained_count


@pytest.mark.parametrize(
    "rho,expected",
    [(0.0, 5), (0.2, 4), (0.4, 3), (0.6, 2), (0.8, 1), (1.0, 1)],
)
def test_retained_count_schedule_b5(rho, expected):
    assert retained_count(5, rho) == expected


def test_retained_count_floor_is_one():
    for b in range(1, 13):
        assert retained_count(b, 1.0) == 1
        assert retained_count(b, 0.999) == 1


def test_retained_count_keeps_all_at_zero():
    for b in range(1, 13):
        assert retained_count(b, 0.0) == b


def test_retained_count_domain_errors():
    with pytest.raises(PruningError):
        retained_count(5, -0.1)
    with pytest.raises(PruningError):
        retained_count(5, 1.5)
    with pytest.raises(PruningError):
        retained_count(0, 0.5)


def test_retained_count_monotone_on_grid():
    # rho1 <= rho2 implies retained(b, rho1) >= retained(b, rho2)
    grid = [round(0.01 * i, 2) for i in range(101)]
    for b in range(1, 13):
        counts = [retained_count(b, rho) for rho in grid]
        assert all(a >= b_ for a, b_ in zip(counts, counts[1:]))
        assert all(1 <= c <= b for c in counts)


@given(st.integers(min_value=1, max_value=40), st.floats(min_value=0.0, max_value=1.0))
@settings(max_examples=300, deadline=None)
def test_retained_count_bounds_property(b, rho):
    n = retained_count(b, rho)
    assert 1 <= n <= b


def test_repair_ranking_cases():
    assert repair_ranking([2, 1, 3], 3) == ([2, 1, 3], False)
    assert repair_ranking([2, 2, 3], 3) == ([2, 3, 1], True)
    assert repair_ranking([], 3) == ([1, 2, 3], True)
    assert repair_ranking([5, 1], 3) == ([1, 2, 3], True)
    assert repair_ranking([3, 1, 2, 2], 3) == ([3, 1, 2], True)


def test_prune_top_slice():
    ids = ["c1", "c2", "c3", "c4", "c5"]
    decision = prune(ids, "profiling", 0.6, [2, 1, 3, 5, 4])
    assert decision.retained_ids == ("c2", "c1")
    assert not decision.repaired
    assert decision.evaluator_ranking == (2, 1, 3, 5, 4)


def test_prune_retain_all_when_schedule_allows():
    ids = ["a", "b", "c"]
    decision = prune(ids, "insight", 0.1, [3, 2, 1])
    # ceil(0.9*3) = 3: ranking recorded, nothing dropped
    assert decision.retained_ids == ("c", "b", "a")


def test_prune_repairs_duplicates():
    decision = prune(["a", "b", "c"], "direction", 0.4, [2, 2, 3])
    assert decision.repaired
    assert decision.evaluator_ranking == (2, 3, 1)
    assert decision.retained_ids == ("b", "c")


def test_prune_with_branch_shortfall():
    # nominal branching 5 but only 2 candidates survived parsing
    decision = prune(["a", "b"], "direction", 0.6, [2, 1], branching=5)
    assert decision.retained_ids == ("b", "a")
    decision = prune(["a", "b"], "direction", 0.8, [2, 1], branching=5)
    assert decision.retained_ids == ("b",)


def test_prune_empty_rejected():
    with pytest.raises(PruningError):
        prune([], "profiling", 0.5, [])


@given(
    st.integers(min_value=1, max_value=12),
    st.floats(min_value=0.01, max_value=1.0),
    st.randoms(use_true_random=False),
)
@settings(max_examples=200, deadline=None)
def test_prune_retained_is_ranking_prefix(n_candidates, rho, rng):
    ids = [f"c{i}" for i in range(n_candidates)]
    ranking = list(range(1, n_candidates + 1))
    rng.shuffle(ranking)
    decision = prune(ids, "profiling", rho, ranking)
    expected_prefix = [ids[r - 1] for r in ranking][: len(decision.retained_ids)]
    assert list(decision.retained_ids) == expected_prefix
    assert len(decision.retained_ids) == min(retained_count(n_candidates, rho), n_candidates)
