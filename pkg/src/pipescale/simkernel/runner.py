"""High-level interface over the simulation kernels.

Turns a run configuration plus simulator model into per-run cost/score
records, either as fixed-count batches (baseline legs, Monte-Carlo
studies) or as an incremental cost stream for budget matching.  Batches
are chunked so dense kernel buffers stay small.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..artifacts import RunConfig
from ..judging import TRAIT_SCHEMAS
from ..pruning import retained_count
from . import protocol as proto
from . import simulate_batch

CHUNK_RUNS = 2048


@dataclass(frozen=True)
class LegStats:
    """Aggregated outcome of simulating one (config, leg) worth of runs."""

    runs: int
    gen_calls: int
    prune_calls: int
    gen_tokens: int
    prune_tokens: int
    scores: np.ndarray  # every report score, run-major
    per_run_cost: np.ndarray  # in the configured budget unit
    v_sums: np.ndarray

    @property
    def total_reports(self) -> int:
        return int(self.scores.size)


def _kernel_args(config: RunConfig, model: proto.SimulatorModel, leg: int, start: int, count: int) -> dict:
    level = config.judger_level
    judge_profile = model.judge_profiles[level]
    return dict(
        master_seed=config.seed,
        leg=leg,
        start=start,
        count=count,
        branching=config.branching_factor,
        n_prime=retained_count(config.branching_factor, config.pruning_ratio),
        pruning=config.pruning_ratio > 0,
        pass_prob=model.pass_prob,
        root_mean=model.root_mean,
        root_spread=model.root_spread,
        child_spread=model.child_spread,
        eval_corr=model.evaluator_judge_correlation,
        judge_bias=judge_profile.bias,
        judge_noise=model.judge_noise * judge_profile.noise,
        n_traits=len(TRAIT_SCHEMAS[level]),
        repeats=config.judge_repeats,
    )


def simulate_runs(
    config: RunConfig,
    model: proto.SimulatorModel,
    n_runs: int,
    leg: int = 0,
    kernel=simulate_batch,
) -> LegStats:
    """Simulate exactly ``n_runs`` runs of the given configuration."""
    gen_c = prune_c = gen_t = prune_t = 0
    score_parts: list[np.ndarray] = []
    cost_parts: list[np.ndarray] = []
    v_parts: list[np.ndarray] = []
    use_tokens = config.budget_unit == "output_tokens"
    for start in range(0, n_runs, CHUNK_RUNS):
        count = min(CHUNK_RUNS, n_runs - start)
        gen, prune, gtok, ptok, v_sum, scores, _ = kernel(
            **_kernel_args(config, model, leg, start, count)
        )
        gen_c += int(gen.sum())
        prune_c += int(prune.sum())
        gen_t += int(gtok.sum())
        prune_t += int(ptok.sum())
        score_parts.append(scores)
        cost_parts.append((gtok + ptok) if use_tokens else (gen + prune))
        v_parts.append(v_sum)
    return LegStats(
        runs=n_runs,
        gen_calls=gen_c,
        prune_calls=prune_c,
        gen_tokens=gen_t,
        prune_tokens=prune_t,
        scores=np.concatenate(score_parts) if score_parts else np.empty(0),
        per_run_cost=np.concatenate(cost_parts) if cost_parts else np.empty(0),
        v_sums=np.concatenate(v_parts) if v_parts else np.empty(0, dtype=np.int64),
    )


def cost_stream(
    config: RunConfig,
    model: proto.SimulatorModel,
    leg: int,
    chunk: int = 64,
    kernel=simulate_batch,
) -> Iterator[float]:
    """Unbounded per-run cost stream for incremental budget matching.

    Runs are simulated in small chunks for throughput but yielded one at a
    time; run indices advance deterministically, so the stream is identical
    to simulating runs singly.
    """
    use_tokens = config.budget_unit == "output_tokens"
    start = 0
    while True:
        gen, prune, gtok, ptok, _, _, _ = kernel(
            **_kernel_args(config, model, leg, start, chunk)
        )
        costs = (gtok + ptok) if use_tokens else (gen + prune)
        yield from (float(c) for c in costs)
        start += chunk


def leg_stats_for_runs(config: RunConfig, model: proto.SimulatorModel, n_runs: int, leg: int) -> LegStats:
    """Stats for the first ``n_runs`` runs of a leg (after budget matching)."""
    return simulate_runs(config, model, n_runs, leg=leg)
