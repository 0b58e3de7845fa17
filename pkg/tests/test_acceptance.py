"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Criteria cover exact accounting identities, closed-form versus
Monte-Carlo agreement, brute-force metric oracles, budget-matching
optimality, directional scaling under the simulator, determinism, and
sampling counts.  The annotation-flow criterion is exercised end to end by
the frontend's integration suite (frontend/tests), which drives the live
service through the browser client.
"""

from __future__ import annotations

import itertools
import json
import math
import random
import time
from pathlib import Path

import numpy as np
import pytest

from pipescale.analytics import Ranking, kendall_tau, kendall_w, quantile_indices, select_judger, spearman_rho
from pipescale.artifacts import RunConfig
from pipescale.budget import BudgetLedger, exact_run_budget, expected_run_budget, match_budget
from pipescale.cli import main as cli_main
from pipescale.engine import run_pipeline
from pipescale.gateway.simulator import SimulatedBackend
from pipescale.pruning import retained_count
from pipescale.simkernel.protocol import SimulatorModel
from pipescale.simkernel.runner import simulate_runs
from pipescale.sweep import SweepSpec, run_sweep

DATA = str(Path(__file__).parent / "data" / "toy.csv")


def report(criterion: int, name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {criterion:>2} {name}: {status}{suffix}")
    assert ok, f"criterion {criterion} failed: {name} {detail}"


# -- 1: budget identity against the published per-run arithmetic ---------------


def test_criterion_1_budget_identity(toy_dataset):
    started = time.time()
    config = RunConfig(pruning_ratio=0.8, branching_factor=5, seed=197, judge_repeats=1)
    model = SimulatorModel(pass_prob=1.0)
    total_gen = total_prune = 0
    per_run_ok = True
    for run_idx in range(197):
        ledger = BudgetLedger()
        run_pipeline(config, toy_dataset, SimulatedBackend(model), ledger, run_index=run_idx)
        gen, prune = ledger.formula_totals()
        per_run_ok &= (gen, prune) == (10, 3)
        total_gen += gen
        total_prune += prune
    elapsed = time.time() - started
    ok = per_run_ok and (total_gen, total_prune) == (1970, 591) and elapsed < 5.0
    report(1, "budget identity rho=0.8 (10/3 per run, 1970/591 over 197 runs)", ok,
           f"totals {total_gen}/{total_prune}, {elapsed:.2f}s")


# -- 2: event logs equal the exact decomposition, always -----------------------


def test_criterion_2_exact_decomposition(toy_dataset):
    started = time.time()
    rng = random.Random(2)
    mismatches = 0
    for _ in range(1000):
        rho = rng.choice([0.0, 0.2, 0.4, 0.6, 0.8])
        b = rng.randint(1, 6)
        p_v = rng.choice([0.3, 0.5, 0.75, 0.9, 1.0])
        config = RunConfig(pruning_ratio=rho, branching_factor=b,
                           seed=rng.randrange(2**32), judge_repeats=1)
        ledger = BudgetLedger()
        result = run_pipeline(config, toy_dataset, SimulatedBackend(SimulatorModel(pass_prob=p_v)),
                              ledger, run_index=rng.randrange(1000))
        breakdown = exact_run_budget(b, retained_count(b, rho), result.verified_counts, rho)
        if ledger.formula_totals() != (breakdown.gen_calls, breakdown.prune_calls):
            mismatches += 1
    elapsed = time.time() - started
    ok = mismatches == 0 and elapsed < 30.0
    report(2, "exact decomposition over 1000 random runs", ok,
           f"{mismatches} mismatches, {elapsed:.1f}s")


# -- 3: Monte-Carlo mean within 3 standard errors of the closed form -----------


def test_criterion_3_expectation_agreement():
    started = time.time()
    spots = {
        (0.0, 1.0): 210.0,
        (0.0, 0.75): 172.5,
        (0.8, 1.0): 13.0,
    }
    spot_ok = all(
        expected_run_budget(rho, 5, p).exact_expected == pytest.approx(expected, abs=1e-12)
        for (rho, p), expected in spots.items()
    )
    trials = 10_000
    all_within = True
    details = []
    for rho in (0.0, 0.2, 0.4, 0.6, 0.8):
        for p_v in (0.5, 0.75, 1.0):
            config = RunConfig(pruning_ratio=rho, branching_factor=5,
                               seed=hash((rho, p_v)) & 0xFFFF, judge_repeats=1)
            stats = simulate_runs(config, SimulatorModel(pass_prob=p_v), trials, leg=0)
            costs = stats.per_run_cost.astype(float)
            expected = expected_run_budget(rho, 5, p_v).exact_expected
            se = costs.std(ddof=1) / math.sqrt(trials) if costs.std() > 0 else 0.0
            gap = abs(costs.mean() - expected)
            if gap > 3 * se:
                all_within = False
                details.append(f"rho={rho} p={p_v}: gap {gap:.3f} > 3SE {3 * se:.3f}")
    elapsed = time.time() - started
    ok = spot_ok and all_within and elapsed < 60.0
    report(3, "expectation agreement on the (rho, pass-prob) grid", ok,
           "; ".join(details) or f"{elapsed:.1f}s")


# -- 4: pruning schedule values and monotonicity --------------------------------


def test_criterion_4_pruning_schedule():
    values = [retained_count(5, rho) for rho in (0.0, 0.2, 0.4, 0.6, 0.8)]
    schedule_ok = values == [5, 4, 3, 2, 1]
    monotone_ok = True
    for b in range(1, 13):
        grid = [retained_count(b, round(0.01 * i, 2)) for i in range(101)]
        monotone_ok &= all(x >= y for x, y in zip(grid, grid[1:]))
        monotone_ok &= all(1 <= c <= b for c in grid)
    report(4, "retained-count schedule and monotonicity", schedule_ok and monotone_ok,
           f"schedule {values}")


# -- 5: rank metrics equal brute force -------------------------------------------


def _oracle_tau_rho(pa: tuple[int, ...], pb: tuple[int, ...]) -> tuple[float, float]:
    n = len(pa)
    concordant = discordant = d_sq = 0
    for i in range(n):
        d_sq += (pa[i] - pb[i]) ** 2
        for j in range(i + 1, n):
            s = (pa[i] - pa[j]) * (pb[i] - pb[j])
            if s > 0:
                concordant += 1
            else:
                discordant += 1
    tau = (concordant - discordant) / (n * (n - 1) / 2)
    rho = 1 - 6 * d_sq / (n * (n * n - 1))
    return tau, rho


def test_criterion_5_rank_metric_oracles():
    started = time.time()
    worst = 0.0
    for n in range(2, 7):
        perms = list(itertools.permutations(range(1, n + 1)))
        rankings = []
        for perm in perms:
            order = sorted(range(n), key=lambda i: perm[i])
            rankings.append(Ranking(items=tuple(f"i{i}" for i in order)))
        for a_idx, pa in enumerate(perms):
            ra = rankings[a_idx]
            for b_idx, pb in enumerate(perms):
                tau_oracle, rho_oracle = _oracle_tau_rho(pa, pb)
                worst = max(worst, abs(kendall_tau(ra, rankings[b_idx]) - tau_oracle))
                worst = max(worst, abs(spearman_rho(ra, rankings[b_idx]) - rho_oracle))

    rng = random.Random(5)
    w_worst = 0.0
    for _ in range(500):
        m, n = rng.randint(2, 5), rng.randint(2, 6)
        rows = []
        for _ in range(m):
            row = list(range(1, n + 1))
            rng.shuffle(row)
            rows.append(row)
        col_sums = [sum(r[i] for r in rows) for i in range(n)]
        mean_sum = sum(col_sums) / n
        oracle = 12 * sum((c - mean_sum) ** 2 for c in col_sums) / (m * m * (n**3 - n))
        w_worst = max(w_worst, abs(kendall_w(rows) - oracle))

    ident = Ranking(items=("a", "b", "c", "d"))
    rev = Ranking(items=("d", "c", "b", "a"))
    endpoints_ok = (
        kendall_tau(ident, ident) == 1.0
        and kendall_tau(ident, rev) == -1.0
        and spearman_rho(ident, ident) == 1.0
        and spearman_rho(ident, rev) == -1.0
        and kendall_w([[1, 2, 3], [1, 2, 3]]) == pytest.approx(1.0, abs=1e-15)
        and kendall_w([[1, 2, 3], [3, 2, 1]]) == pytest.approx(0.0, abs=1e-15)
    )
    elapsed = time.time() - started
    ok = worst <= 1e-12 and w_worst <= 1e-12 and endpoints_ok and elapsed < 60.0
    report(5, "rank metrics vs brute-force oracles (all pairs n<=6, 500 W matrices)", ok,
           f"worst tau/rho gap {worst:.2e}, worst W gap {w_worst:.2e}, {elapsed:.1f}s")


# -- 6: judger selection fixture ---------------------------------------------------


def test_criterion_6_judger_selection():
    metrics = {"easy": (0.40, 0.53), "moderate": (0.45, 0.55), "harsh": (0.55, 0.60)}
    winner, tie = select_judger(metrics)
    report(6, "judger selection on the alignment fixture", winner == "harsh" and not tie,
           f"selected {winner}")


# -- 7: budget-matching optimality ---------------------------------------------------


def test_criterion_7_matching_optimality():
    state = match_budget(100.0, iter([13.0] * 40))
    constant_ok = state.chosen == 8 and state.cumulative == 104.0

    rng = random.Random(7)
    violations = 0
    for _ in range(1000):
        costs = [rng.uniform(0.25, 40.0) for _ in range(500)]
        target = rng.uniform(1.0, 3000.0)
        state = match_budget(target, iter(costs))
        cums = list(itertools.accumulate(costs))
        gaps = [abs(cums[state.n_plus - 1] - target)]
        if state.n_minus >= 1:
            gaps.append(abs(cums[state.n_minus - 1] - target))
        if abs(state.gap - min(gaps)) > 1e-9:
            violations += 1
    report(7, "matching picks argmin over the crossing neighbours", constant_ok and violations == 0,
           f"{violations} violations")


# -- 8: directional scaling under matched budgets --------------------------------------


def test_criterion_8_directional_scaling():
    started = time.time()
    replications = 100
    quantile_grid = (0.05, 0.10, 0.15, 0.20, 0.25)
    mean_std_wins = 0
    dominance_wins = 0
    for rep in range(replications):
        spec = SweepSpec(
            config=RunConfig(branching_factor=5, seed=rep),
            rhos=(0.6,),
            baseline_runs=15,
            model=SimulatorModel(pass_prob=1.0, evaluator_judge_correlation=0.9,
                                 judge_noise=2.0),
            mode="kernel",
        )
        result = run_sweep(spec)
        base, pruned = result.legs[0], result.legs[1]
        if pruned.scores.mean() > base.scores.mean() and pruned.scores.std() < base.scores.std():
            mean_std_wins += 1
        if all(np.quantile(pruned.scores, q) > np.quantile(base.scores, q) for q in quantile_grid):
            dominance_wins += 1
    elapsed = time.time() - started
    ok = mean_std_wins >= 95 and dominance_wins >= 95 and elapsed < 300.0
    report(8, "pruning raises mean, cuts variance, prunes the low tail", ok,
           f"mean/std {mean_std_wins}/100, dominance {dominance_wins}/100, {elapsed:.1f}s")


# -- 9: determinism of the operator surface ----------------------------------------------


def test_criterion_9_determinism(tmp_path):
    run_dirs = [tmp_path / "runA", tmp_path / "runB"]
    for out in run_dirs:
        code = cli_main(["run", "--rho", "0.6", "--seed", "31", "--backend", "sim",
                         "--dataset", DATA, "--out", str(out)])
        assert code == 0
    events_equal = (run_dirs[0] / "events.jsonl").read_bytes() == (run_dirs[1] / "events.jsonl").read_bytes()
    reports_equal = all(
        (run_dirs[0] / "reports" / p.name).read_bytes() == p.read_bytes()
        for p in (run_dirs[1] / "reports").glob("*.json")
    )

    sweep_dirs = [tmp_path / "sweepA", tmp_path / "sweepB"]
    for out in sweep_dirs:
        code = cli_main(["sweep", "--seed", "13", "--baseline-runs", "4",
                         "--pass-prob", "0.75", "--eval-corr", "0.9", "--out", str(out)])
        assert code == 0
    summaries_equal = (sweep_dirs[0] / "summary.csv").read_bytes() == (sweep_dirs[1] / "summary.csv").read_bytes()
    report(9, "identical config+seed gives byte-identical logs and summaries",
           events_equal and reports_equal and summaries_equal)


# -- 10: quantile and pair counts -----------------------------------------------------------


def test_criterion_10_quantile_and_pair_counts(tmp_path, toy_dataset):
    indices_ok = quantile_indices(101) == [0, 25, 50, 75, 100]

    from pipescale.annotation.service import AnnotationStore
    from pipescale.annotation.study import build_study, load_scored_reports
    from pipescale.engine import write_run_dir

    config = RunConfig(pruning_ratio=0.0, branching_factor=3, seed=10,
                       extra_judge_levels=("easy", "moderate"))
    ledger = BudgetLedger()
    result = run_pipeline(config, toy_dataset, SimulatedBackend(SimulatorModel()), ledger)
    run_dir = tmp_path / "run"
    write_run_dir(run_dir, config, toy_dataset, result, ledger)
    study = build_study(load_scored_reports([run_dir]), tmp_path / "ann", seed=1)
    store = AnnotationStore(tmp_path / "ann")
    pair_total = sum(store.sequence(info["sequence_id"]).n_pairs
                     for info in study["levels"].values())
    pairs_ok = len(study["levels"]) == 3 and pair_total == 30
    report(10, "quantile indices {0,25,50,75,100} and 3 x C(5,2) = 30 exported pairs",
           indices_ok and pairs_ok, f"{pair_total} pairs")
