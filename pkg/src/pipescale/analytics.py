"""Score-distribution curves, rank-correlation metrics, and judger selection.

Rankings are strict permutations throughout (score ties are broken by
report id where rankings originate), so the untied forms of Kendall's tau
and Spearman's rho apply.  Standard deviations in sweep summaries are
population standard deviations, matching their descriptive use.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence


class AnalyticsError(ValueError):
    pass


@dataclass(frozen=True)
class SortedCurve:
    """Report scores in ascending order with their source ids aligned."""

    scores: tuple[float, ...]
    report_ids: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.scores)


def build_sorted_curve(report_scores: Mapping[str, float] | Iterable[tuple[str, float]]) -> SortedCurve:
    items = list(report_scores.items()) if isinstance(report_scores, Mapping) else list(report_scores)
    if not items:
        raise AnalyticsError("cannot build a curve from zero scored reports")
    items.sort(key=lambda pair: (pair[1], pair[0]))
    return SortedCurve(
        scores=tuple(score for _, score in items),
        report_ids=tuple(rid for rid, _ in items),
    )


DEFAULT_QUANTILES = (0.0, 0.25, 0.5, 0.75, 1.0)


def quantile_indices(length: int, quantiles: Sequence[float] = DEFAULT_QUANTILES) -> list[int]:
    """Curve indices for the requested quantiles: round(q * (length - 1))."""
    if length < len(quantiles):
        raise AnalyticsError(
            f"curve of length {length} cannot be stratified into {len(quantiles)} distinct samples"
        )
    return [round(q * (length - 1)) for q in quantiles]


def quantile_sample(curve: SortedCurve, quantiles: Sequence[float] = DEFAULT_QUANTILES) -> list[str]:
    """Report ids sampled at score quantiles along the sorted curve."""
    return [curve.report_ids[i] for i in quantile_indices(len(curve), quantiles)]


@dataclass(frozen=True)
class Ranking:
    """Ordered report ids, best first (rank 1)."""

    items: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.items)) != len(self.items):
            raise AnalyticsError("ranking contains duplicate items")

    def __len__(self) -> int:
        return len(self.items)

    def position(self) -> dict[str, int]:
        return {item: rank for rank, item in enumerate(self.items, start=1)}


def ranking_from_scores(scores: Mapping[str, float]) -> Ranking:
    """Best-first ranking by score, descending; ties broken by id ascending."""
    ordered = sorted(scores.items(), key=lambda pair: (-pair[1], pair[0]))
    return Ranking(items=tuple(rid for rid, _ in ordered))


def _paired_positions(r1: Ranking, r2: Ranking) -> tuple[list[int], list[int]]:
    if set(r1.items) != set(r2.items):
        raise AnalyticsError("rankings cover different item sets")
    p1, p2 = r1.position(), r2.position()
    items = sorted(p1)
    return [p1[i] for i in items], [p2[i] for i in items]


def concordance_counts(r1: Ranking, r2: Ranking) -> tuple[int, int]:
    """(concordant, discordant) pair counts between two strict rankings."""
    a, b = _paired_positions(r1, r2)
    n = len(a)
    concordant = discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            s = (a[i] - a[j]) * (b[i] - b[j])
            if s > 0:
                concordant += 1
            else:
                discordant += 1
    return concordant, discordant


def kendall_tau(r1: Ranking, r2: Ranking) -> float:
    n = len(r1)
    if n < 2:
        raise AnalyticsError("kendall tau needs at least 2 items")
    c, d = concordance_counts(r1, r2)
    return (c - d) / (n * (n - 1) / 2)


def spearman_rho(r1: Ranking, r2: Ranking) -> float:
    a, b = _paired_positions(r1, r2)
    n = len(a)
    if n < 2:
        raise AnalyticsError("spearman rho needs at least 2 items")
    d_sq = sum((x - y) ** 2 for x, y in zip(a, b))
    return 1.0 - (6.0 * d_sq) / (n * (n * n - 1))


def kendall_w(rank_rows: Sequence[Sequence[int]]) -> float:
    """Concordance across m annotators' rank vectors over the same n items.

    Each row assigns rank ``rank_rows[a][i]`` to item i and must be a
    permutation of 1..n.
    """
    m = len(rank_rows)
    if m < 2:
        raise AnalyticsError("kendall w needs at least 2 annotators")
    n = len(rank_rows[0])
    if n < 2:
        raise AnalyticsError("kendall w needs at least 2 items")
    for row in rank_rows:
        if sorted(row) != list(range(1, n + 1)):
            raise AnalyticsError(f"rank row {list(row)} is not a permutation of 1..{n}")
    column_sums = [sum(row[i] for row in rank_rows) for i in range(n)]
    mean = sum(column_sums) / n
    spread = sum((s - mean) ** 2 for s in column_sums)
    return 12.0 * spread / (m * m * (n**3 - n))


@dataclass(frozen=True)
class AlignmentMetrics:
    tau: float
    spearman: float
    concordant: int
    discordant: int
    concordance_w: float | None = None

    @property
    def combined(self) -> float:
        return self.tau + self.spearman


def alignment_between(judger_ranking: Ranking, human_ranking: Ranking) -> AlignmentMetrics:
    c, d = concordance_counts(judger_ranking, human_ranking)
    return AlignmentMetrics(
        tau=kendall_tau(judger_ranking, human_ranking),
        spearman=spearman_rho(judger_ranking, human_ranking),
        concordant=c,
        discordant=d,
    )


def select_judger(metrics: Mapping[str, AlignmentMetrics | tuple[float, float]]) -> tuple[str, bool]:
    """Judger id maximizing tau + rho; lexicographic tie-break, tie flagged."""
    if not metrics:
        raise AnalyticsError("no judger metrics supplied")
    combined: dict[str, float] = {}
    for judger, m in metrics.items():
        combined[judger] = m.combined if isinstance(m, AlignmentMetrics) else m[0] + m[1]
    best = max(combined.values())
    winners = sorted(j for j, v in combined.items() if v == best)
    return winners[0], len(winners) > 1


@dataclass(frozen=True)
class SweepRow:
    setting: str
    runs: int
    total_reports: int
    score_mean: float
    score_std: float
    gen_budget: int
    prune_budget: int


def population_std(values: Sequence[float], mean: float) -> float:
    if not values:
        return 0.0
    return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))


def summarize_leg(setting: str, runs: int, scores: Sequence[float], gen_budget: int, prune_budget: int) -> SweepRow:
    if not scores:
        return SweepRow(setting, runs, 0, 0.0, 0.0, gen_budget, prune_budget)
    mean = sum(scores) / len(scores)
    return SweepRow(
        setting=setting,
        runs=runs,
        total_reports=len(scores),
        score_mean=mean,
        score_std=population_std(scores, mean),
        gen_budget=gen_budget,
        prune_budget=prune_budget,
    )


SWEEP_HEADER = [
    "setting",
    "runs",
    "total_final_reports",
    "score_avg",
    "score_std",
    "gen_budget",
    "prune_budget",
]


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow(
                [
                    row.setting,
                    row.runs,
                    row.total_reports,
                    f"{row.score_mean:.4f}",
                    f"{row.score_std:.4f}",
                    row.gen_budget,
                    row.prune_budget,
                ]
            )


def write_curve_csv(curve: SortedCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "report_id", "score"])
        for idx, (rid, score) in enumerate(zip(curve.report_ids, curve.scores)):
            writer.writerow([idx, rid, f"{score:.6f}"])
