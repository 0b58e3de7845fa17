"""Final-report judging: trait schemas, score parsing, repeat averaging.

Three strictness levels rate a (chart, insight) report on fixed trait sets
with integer 0-100 ratings; the report's scalar is the mean of its trait
ratings, and the final score averages independent repeats.  An unparseable
judgement is retried exactly once (logged under ``judge_retry``); a repeat
that fails twice is recorded as missing rather than re-queried, keeping
call accounting exact.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

JUDGE_LEVELS = ("easy", "moderate", "harsh")

TRAIT_SCHEMAS: dict[str, tuple[str, ...]] = {
    "easy": ("Readability", "OnTopic", "TrendAlignment"),
    "moderate": ("Correctness", "Specificity", "InterpretiveValue"),
    "harsh": (
        "Correctness & Factuality",
        "Specificity & Traceability",
        "Insightfulness & Depth",
        "So-what quality",
    ),
}


class JudgementError(ValueError):
    pass


def trait_names(level: str) -> tuple[str, ...]:
    try:
        return TRAIT_SCHEMAS[level]
    except KeyError:
        raise JudgementError(f"unknown judger level {level!r}") from None


@dataclass(frozen=True)
class JudgeScore:
    level: str
    traits: dict[str, int]
    evidence: str = ""
    conclusion: str = ""


@dataclass
class ReportScore:
    """Scalar outcome of judging one report, possibly over several repeats."""

    level: str
    per_repeat: list[float] = field(default_factory=list)
    failed_repeats: int = 0

    @property
    def final(self) -> float | None:
        if not self.per_repeat:
            return None
        return sum(self.per_repeat) / len(self.per_repeat)

    @property
    def degraded(self) -> bool:
        return self.failed_repeats > 0 and bool(self.per_repeat)

    @property
    def missing(self) -> bool:
        return not self.per_repeat

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "per_repeat": self.per_repeat,
            "failed_repeats": self.failed_repeats,
            "final": self.final,
        }


def validate_judgement(document: dict, level: str) -> JudgeScore:
    """Check a parsed judgement document against the level's trait schema."""
    schema = trait_names(level)
    scores = document.get("scores")
    if not isinstance(scores, dict):
        raise JudgementError(f"judgement for level {level!r} lacks a scores object")
    missing = [t for t in schema if t not in scores]
    extra = [t for t in scores if t not in schema]
    if missing or extra:
        raise JudgementError(
            f"trait set mismatch for level {level!r}: missing {missing}, unexpected {extra}"
        )
    traits: dict[str, int] = {}
    for name in schema:
        value = scores[name]
        if isinstance(value, bool) or not isinstance(value, int):
            raise JudgementError(f"trait {name!r} must be an integer, got {value!r}")
        if not 0 <= value <= 100:
            raise JudgementError(f"trait {name!r} value {value} outside [0, 100]")
        traits[name] = value
    return JudgeScore(
        level=level,
        traits=traits,
        evidence=str(document.get("evidence", "")),
        conclusion=str(document.get("conclusion", "")),
    )


def parse_judgement(text: str, level: str) -> JudgeScore:
    """Extract and validate a judgement from raw completion text."""
    from .gateway.parsing import extract_fenced_json

    document = extract_fenced_json(text, context=f"judge_{level}")
    if not isinstance(document, dict):
        raise JudgementError(f"judgement for level {level!r} is not a JSON object")
    return validate_judgement(document, level)


def scalar_of(score: JudgeScore) -> float:
    """Arithmetic mean of the trait ratings."""
    values = list(score.traits.values())
    if not values:
        raise JudgementError("judge score has no traits")
    return sum(values) / len(values)
