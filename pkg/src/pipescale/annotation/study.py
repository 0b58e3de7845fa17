"""Alignment-study assembly and ingestion.

Export: from judger-scored reports, stratify-sample each judger's sorted
curve at the score quantiles, build one randomized pairwise sequence per
judger, and stage payloads (insight text + chart image) for the service.
Judger rankings over the sampled reports are kept in a separate study file
so nothing judge-related can leak into annotation payloads.

Ingest: recompute tallies and consensus from recorded preferences, measure
each judger's rank alignment against annotators, and select the judger
with the strongest agreement.
"""

from __future__ import annotations

import base64
import json
import shutil
from dataclasses import dataclass
from pathlib import Path

from ..analytics import (
    AlignmentMetrics,
    Ranking,
    alignment_between,
    build_sorted_curve,
    kendall_w,
    quantile_sample,
    ranking_from_scores,
    select_judger,
)
from ..judging import JUDGE_LEVELS
from .model import AnnotationSequence, build_sequence, consensus, tally_wins
from .service import AnnotationStore

# 1x1 white PNG; stands in for chart images of virtual (simulated) artifacts
_STUB_PNG = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR4nGP4//8/AwAI/AL+hc2rNAAAAABJRU5ErkJggg=="
)


@dataclass(frozen=True)
class ScoredReport:
    report_id: str
    insight_text: str
    image_path: str
    scores: dict[str, float]  # judger level -> final score


def load_scored_reports(run_dirs: list[Path]) -> list[ScoredReport]:
    reports: list[ScoredReport] = []
    for run_dir in run_dirs:
        for path in sorted(Path(run_dir).glob("reports/*.json")):
            doc = json.loads(path.read_text())
            scores: dict[str, float] = {}
            primary = doc.get("score")
            if primary and primary.get("final") is not None:
                scores[primary["level"]] = primary["final"]
            for level, extra in (doc.get("extra_scores") or {}).items():
                if extra.get("final") is not None:
                    scores[level] = extra["final"]
            if scores:
                reports.append(
                    ScoredReport(
                        report_id=doc["id"],
                        insight_text=doc.get("insight_text", ""),
                        image_path=doc.get("image_path", ""),
                        scores=scores,
                    )
                )
    return reports


def _stage_image(report: ScoredReport, images_dir: Path) -> str:
    images_dir.mkdir(parents=True, exist_ok=True)
    name = f"{report.report_id}.png"
    target = images_dir / name
    source = Path(report.image_path)
    if report.image_path and not report.image_path.startswith("virtual://") and source.exists():
        shutil.copyfile(source, target)
    else:
        target.write_bytes(_STUB_PNG)
    return f"/images/{name}"


def build_study(
    reports: list[ScoredReport],
    out_dir: str | Path,
    seed: int,
    dataset_label: str = "study",
    levels: tuple[str, ...] = JUDGE_LEVELS,
) -> dict:
    """One sequence per judger level from its quantile-sampled reports."""
    out = Path(out_dir)
    store = AnnotationStore(out)
    images_dir = out / "images"
    study: dict = {"dataset_label": dataset_label, "levels": {}, "seed": seed}
    for level in levels:
        scored = {r.report_id: r.scores[level] for r in reports if level in r.scores}
        if len(scored) < 5:
            raise ValueError(f"level {level!r} has only {len(scored)} scored reports; need >= 5")
        curve = build_sorted_curve(scored)
        sampled = quantile_sample(curve)
        sequence_id = f"{dataset_label}-{level}"
        sequence = build_sequence(
            sampled,
            seed=seed + JUDGE_LEVELS.index(level),
            sequence_id=sequence_id,
            dataset_label=dataset_label,
            judger_id=level,
        )
        by_id = {r.report_id: r for r in reports}
        payloads = {
            rid: {
                "insight": by_id[rid].insight_text,
                "image_url": _stage_image(by_id[rid], images_dir),
            }
            for rid in sampled
        }
        store.add_sequence(sequence, payloads)
        study["levels"][level] = {
            "sequence_id": sequence_id,
            "report_ids": sampled,
            "judger_ranking": list(
                ranking_from_scores({rid: scored[rid] for rid in sampled}).items
            ),
        }
    (out / "study.json").write_text(json.dumps(study, indent=2, sort_keys=True) + "\n")
    return study


@dataclass
class LevelAlignment:
    level: str
    per_annotator: dict[str, AlignmentMetrics]
    tau_mean: float
    rho_mean: float
    vs_consensus: AlignmentMetrics
    annotator_concordance: float | None


@dataclass
class IngestResult:
    alignments: dict[str, LevelAlignment]
    selected_judger: str
    tie: bool
    consensus_rankings: dict[str, list[str]]

    def to_dict(self) -> dict:
        return {
            "selected_judger": self.selected_judger,
            "tie": self.tie,
            "levels": {
                level: {
                    "tau_mean": a.tau_mean,
                    "rho_mean": a.rho_mean,
                    "tau_per_annotator": {k: m.tau for k, m in a.per_annotator.items()},
                    "rho_per_annotator": {k: m.spearman for k, m in a.per_annotator.items()},
                    "tau_vs_consensus": a.vs_consensus.tau,
                    "rho_vs_consensus": a.vs_consensus.spearman,
                    "kendall_w": a.annotator_concordance,
                }
                for level, a in self.alignments.items()
            },
            "consensus_rankings": self.consensus_rankings,
        }


def ingest_study(annotation_dir: str | Path, mode: str = "per-annotator") -> IngestResult:
    """Recompute tallies, consensus, alignment metrics, and the judger choice.

    ``mode`` selects the alignment aggregation: ``per-annotator`` averages
    tau/rho of the judger against each annotator's ranking (the default),
    ``consensus`` measures against the consensus ranking only.
    """
    root = Path(annotation_dir)
    study = json.loads((root / "study.json").read_text())
    store = AnnotationStore(root)

    alignments: dict[str, LevelAlignment] = {}
    consensus_rankings: dict[str, list[str]] = {}
    for level, info in study["levels"].items():
        sequence = store.sequence(info["sequence_id"])
        records = store.records(info["sequence_id"])
        all_pairs = {p.pair_id for p in sequence.pairs}
        annotators = sorted(
            a for a in {r.annotator_id for r in records}
            if {r.pair_id for r in records if r.annotator_id == a} >= all_pairs
        )
        if not annotators:
            raise ValueError(f"no annotator completed sequence {info['sequence_id']}")
        tallies = [tally_wins(records, sequence, a) for a in annotators]
        judger_ranking = Ranking(items=tuple(info["judger_ranking"]))
        per_annotator = {
            t.annotator_id: alignment_between(judger_ranking, t.ranking) for t in tallies
        }
        consensus_ranking, _ = consensus(tallies)
        consensus_rankings[level] = list(consensus_ranking.items)
        rank_rows = [
            [t.ranking.position()[rid] for rid in sequence.report_ids] for t in tallies
        ]
        alignments[level] = LevelAlignment(
            level=level,
            per_annotator=per_annotator,
            tau_mean=sum(m.tau for m in per_annotator.values()) / len(per_annotator),
            rho_mean=sum(m.spearman for m in per_annotator.values()) / len(per_annotator),
            vs_consensus=alignment_between(judger_ranking, consensus_ranking),
            annotator_concordance=kendall_w(rank_rows) if len(rank_rows) >= 2 else None,
        )

    if mode == "per-annotator":
        metric_pairs = {lvl: (a.tau_mean, a.rho_mean) for lvl, a in alignments.items()}
    elif mode == "consensus":
        metric_pairs = {
            lvl: (a.vs_consensus.tau, a.vs_consensus.spearman) for lvl, a in alignments.items()
        }
    else:
        raise ValueError(f"unknown ingest mode {mode!r}")
    selected, tie = select_judger(metric_pairs)
    return IngestResult(
        alignments=alignments,
        selected_judger=selected,
        tie=tie,
        consensus_rankings=consensus_rankings,
    )
