"""Domain objects flowing through a branch-and-prune pipeline run."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Any

from .judging import JUDGE_LEVELS, ReportScore
from .pruning import retained_count

STAGES = ("profiling", "visualization", "insight")

BUDGET_UNITS = ("llm_calls", "output_tokens")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 1.0
    top_p: float = 0.9
    max_tokens: int = 1500

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ConfigError("temperature must be non-negative")
        if not 0 < self.top_p <= 1:
            raise ConfigError("top_p must be in (0, 1]")
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be positive")


@dataclass(frozen=True)
class RunConfig:
    pruning_ratio: float = 0.0
    branching_factor: int = 5
    judger_level: str = "harsh"
    judge_repeats: int = 1
    rectify_attempts: int = 2
    seed: int = 0
    budget_unit: str = "llm_calls"
    decoding: DecodingParams = field(default_factory=DecodingParams)
    # extra judger levels to score each report with (for alignment studies);
    # only ``judger_level`` participates in run accounting defaults
    extra_judge_levels: tuple[str, ...] = ()
    # per-stage override of the uniform pruning ratio (stage name -> rho)
    stage_pruning: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.pruning_ratio <= 1.0:
            raise ConfigError(f"pruning ratio must be in [0,1], got {self.pruning_ratio}")
        if self.branching_factor < 1:
            raise ConfigError("branching factor must be >= 1")
        if self.judger_level not in JUDGE_LEVELS:
            raise ConfigError(f"judger_level must be one of {JUDGE_LEVELS}")
        if self.judge_repeats < 1:
            raise ConfigError("judge_repeats must be >= 1")
        if self.rectify_attempts < 0:
            raise ConfigError("rectify_attempts must be >= 0")
        if self.budget_unit not in BUDGET_UNITS:
            raise ConfigError(f"budget_unit must be one of {BUDGET_UNITS}")
        for stage, rho in self.stage_pruning.items():
            if stage not in STAGES:
                raise ConfigError(f"unknown stage {stage!r} in stage_pruning")
            if not 0.0 <= rho <= 1.0:
                raise ConfigError(f"stage_pruning[{stage!r}] must be in [0,1]")

    def rho_for(self, stage: str) -> float:
        return self.stage_pruning.get(stage, self.pruning_ratio)

    def plan_for(self, stage: str) -> "StagePlan":
        return StagePlan(
            stage=stage,
            branching=self.branching_factor,
            retained=retained_count(self.branching_factor, self.rho_for(stage)),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["extra_judge_levels"] = list(self.extra_judge_levels)
        return d


@dataclass(frozen=True)
class StagePlan:
    stage: str
    branching: int
    retained: int

    def __post_init__(self) -> None:
        if not 1 <= self.retained <= self.branching:
            raise ConfigError(
                f"retained count {self.retained} outside [1, {self.branching}] at stage {self.stage}"
            )


@dataclass
class MetadataReport:
    id: str
    text: str
    dataset_ref: str
    index: int = 0


@dataclass
class VisualizationDirection:
    id: str
    parent_profile: str
    topic: str
    chart_type: str
    variables: list[str]
    explanation: str
    parameters: dict[str, Any]
    index: int = 0


@dataclass
class ChartArtifact:
    id: str
    parent_direction: str
    code: str
    image_path: str
    verified: bool = False
    rectify_count: int = 0
    failure_trace: str | None = None


@dataclass
class Insight:
    id: str
    parent_chart: str
    description: str
    index: int = 0


@dataclass
class FinalReport:
    id: str
    chart: ChartArtifact
    insight: Insight
    lineage: tuple[str, str, str, str]  # profile, direction, chart, insight ids
    score: ReportScore | None = None
    extra_scores: dict[str, ReportScore] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "lineage": {
                "profile": self.lineage[0],
                "direction": self.lineage[1],
                "chart": self.lineage[2],
                "insight": self.lineage[3],
            },
            "insight_text": self.insight.description,
            "image_path": self.chart.image_path,
            "score": self.score.to_dict() if self.score else None,
            "extra_scores": {lvl: s.to_dict() for lvl, s in self.extra_scores.items()},
        }


@dataclass
class RunResult:
    run_id: str
    seed: int
    reports: list[FinalReport]
    verified_counts: list[int]  # per retained profile, in retained order
    dropped_candidates: int = 0
    missing_scores: int = 0

    @property
    def scores(self) -> list[float]:
        return [r.score.final for r in self.reports if r.score and r.score.final is not None]
