"""Pairwise preference sequences, win tallies, and consensus rankings.

A sequence presents every unordered pair of its sampled reports exactly
once, with pair order and left/right placement randomized per seed.  Each
answered pair awards one win; an annotator's ranking sorts reports by wins
(ties broken by id and flagged), and the consensus ranking sums wins
across annotators.  Rubric sliders are stored verbatim but never enter
the tallies; only the overall choice counts.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from ..analytics import Ranking

RUBRIC_DIMENSIONS = (
    "Trustworthy/Plausible",
    "Complex",
    "Unexpectedness",
    "Actionability",
    "Domain Value",
    "Effectiveness",
    "Expressiveness",
)


class AnnotationError(ValueError):
    pass


class DuplicateAnswerError(AnnotationError):
    pass


@dataclass(frozen=True)
class PreferencePair:
    pair_id: str
    left_report: str
    right_report: str
    presented_order: int

    def __post_init__(self) -> None:
        if self.left_report == self.right_report:
            raise AnnotationError(f"pair {self.pair_id} compares a report with itself")

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "left_report": self.left_report,
            "right_report": self.right_report,
            "presented_order": self.presented_order,
        }


@dataclass(frozen=True)
class AnnotationSequence:
    sequence_id: str
    dataset_label: str
    report_ids: tuple[str, ...]
    pairs: tuple[PreferencePair, ...]
    judger_id: str = ""

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    def pair(self, pair_id: str) -> PreferencePair:
        for p in self.pairs:
            if p.pair_id == pair_id:
                return p
        raise KeyError(pair_id)

    def to_dict(self) -> dict:
        return {
            "sequence_id": self.sequence_id,
            "dataset_label": self.dataset_label,
            "report_ids": list(self.report_ids),
            "judger_id": self.judger_id,
            "pairs": [p.to_dict() for p in self.pairs],
        }

    @staticmethod
    def from_dict(d: dict) -> "AnnotationSequence":
        return AnnotationSequence(
            sequence_id=d["sequence_id"],
            dataset_label=d["dataset_label"],
            report_ids=tuple(d["report_ids"]),
            judger_id=d.get("judger_id", ""),
            pairs=tuple(
                PreferencePair(
                    pair_id=p["pair_id"],
                    left_report=p["left_report"],
                    right_report=p["right_report"],
                    presented_order=p["presented_order"],
                )
                for p in d["pairs"]
            ),
        )


def build_sequence(
    report_ids: list[str],
    seed: int,
    sequence_id: str,
    dataset_label: str = "",
    judger_id: str = "",
) -> AnnotationSequence:
    """All C(n,2) pairs, shuffled, with left/right flipped at random per seed."""
    if len(set(report_ids)) != len(report_ids):
        raise AnnotationError("report ids must be distinct")
    if len(report_ids) < 2:
        raise AnnotationError("a sequence needs at least 2 reports")
    rng = random.Random(seed)
    combos = list(itertools.combinations(report_ids, 2))
    rng.shuffle(combos)
    pairs = []
    for order, (a, b) in enumerate(combos):
        left, right = (a, b) if rng.random() < 0.5 else (b, a)
        pairs.append(
            PreferencePair(
                pair_id=f"{sequence_id}-pair{order:03d}",
                left_report=left,
                right_report=right,
                presented_order=order,
            )
        )
    return AnnotationSequence(
        sequence_id=sequence_id,
        dataset_label=dataset_label,
        report_ids=tuple(report_ids),
        pairs=tuple(pairs),
        judger_id=judger_id,
    )


@dataclass(frozen=True)
class PreferenceRecord:
    pair_id: str
    annotator_id: str
    choice: str  # left | right
    rubric: dict[str, int] = field(default_factory=dict)
    rationale: str = ""
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if self.choice not in ("left", "right"):
            raise AnnotationError(f"choice must be left or right, got {self.choice!r}")
        unknown = set(self.rubric) - set(RUBRIC_DIMENSIONS)
        if unknown:
            raise AnnotationError(f"unknown rubric dimensions: {sorted(unknown)}")

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "annotator_id": self.annotator_id,
            "choice": self.choice,
            "rubric": dict(self.rubric),
            "rationale": self.rationale,
            "timestamp": self.timestamp,
        }

    @staticmethod
    def from_dict(d: dict) -> "PreferenceRecord":
        return PreferenceRecord(
            pair_id=d["pair_id"],
            annotator_id=d["annotator_id"],
            choice=d["choice"],
            rubric={k: int(v) for k, v in d.get("rubric", {}).items()},
            rationale=d.get("rationale", ""),
            timestamp=d.get("timestamp", 0.0),
        )


@dataclass(frozen=True)
class WinTally:
    annotator_id: str
    wins: dict[str, int]
    ranking: Ranking
    tied: bool

    def to_dict(self) -> dict:
        return {
            "annotator_id": self.annotator_id,
            "wins": dict(sorted(self.wins.items())),
            "ranking": list(self.ranking.items),
            "tied": self.tied,
        }


def _ranking_from_wins(wins: dict[str, int]) -> tuple[Ranking, bool]:
    ordered = sorted(wins.items(), key=lambda pair: (-pair[1], pair[0]))
    tied = len({w for _, w in wins.items()}) < len(wins)
    return Ranking(items=tuple(rid for rid, _ in ordered)), tied


def tally_wins(records: list[PreferenceRecord], sequence: AnnotationSequence,
               annotator_id: str) -> WinTally:
    """Count wins for one annotator; the sequence must be fully answered."""
    own = [r for r in records if r.annotator_id == annotator_id]
    by_pair: dict[str, PreferenceRecord] = {}
    for record in own:
        if record.pair_id in by_pair:
            raise DuplicateAnswerError(f"pair {record.pair_id} answered more than once")
        by_pair[record.pair_id] = record
    known = {p.pair_id for p in sequence.pairs}
    unknown = set(by_pair) - known
    if unknown:
        raise AnnotationError(f"records reference unknown pairs: {sorted(unknown)}")
    missing = sorted(known - set(by_pair))
    if missing:
        raise AnnotationError(f"sequence incomplete; unanswered pairs: {missing}")

    wins = {rid: 0 for rid in sequence.report_ids}
    for pair in sequence.pairs:
        record = by_pair[pair.pair_id]
        winner = pair.left_report if record.choice == "left" else pair.right_report
        wins[winner] += 1
    ranking, tied = _ranking_from_wins(wins)
    return WinTally(annotator_id=annotator_id, wins=wins, ranking=ranking, tied=tied)


def consensus(tallies: list[WinTally]) -> tuple[Ranking, bool]:
    """Consensus = ranking by total wins across annotators; ties flagged."""
    if not tallies:
        raise AnnotationError("consensus needs at least one tally")
    item_sets = {tuple(sorted(t.wins)) for t in tallies}
    if len(item_sets) != 1:
        raise AnnotationError("tallies cover different report sets")
    totals: dict[str, int] = {rid: 0 for rid in tallies[0].wins}
    for tally in tallies:
        for rid, count in tally.wins.items():
            totals[rid] += count
    return _ranking_from_wins(totals)
