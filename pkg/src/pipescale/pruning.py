"""Pruning schedule and evaluator-guided candidate selection.

At each stage a branching factor ``b`` produces candidates; a pruning ratio
``rho`` keeps ``max(1, ceil((1 - rho) * b))`` of them, chosen by an
LLM evaluator's best-to-worst ranking.  Malformed rankings are repaired
deterministically instead of re-queried so one prune costs exactly one call.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

logger = logging.getLogger(__name__)

# guards ceil() against float noise in (1-rho)*b; honest non-integer
# products sit far further than 1e-9 from an integer
_CEIL_EPS = 1e-9


class PruningError(ValueError):
    pass


@dataclass(frozen=True)
class PruneDecision:
    """Audit record of one pruning step."""

    stage: str
    input_ids: tuple[str, ...]
    evaluator_ranking: tuple[int, ...]  # 1-based indices, best -> worst
    retained_ids: tuple[str, ...]
    evidence: str = ""
    repaired: bool = False

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "input_ids": list(self.input_ids),
            "evaluator_ranking": list(self.evaluator_ranking),
            "retained_ids": list(self.retained_ids),
            "evidence": self.evidence,
            "repaired": self.repaired,
        }


def retained_count(branching: int, rho: float) -> int:
    """Number of candidates kept at a stage: max(1, ceil((1-rho)*b))."""
    if branching < 1:
        raise PruningError(f"branching factor must be >= 1, got {branching}")
    if not 0.0 <= rho <= 1.0:
        raise PruningError(f"pruning ratio must be in [0,1], got {rho}")
    return max(1, math.ceil((1.0 - rho) * branching - _CEIL_EPS))


def repair_ranking(ranking: Sequence[int], n: int) -> tuple[list[int], bool]:
    """Coerce an evaluator ranking into a permutation of 1..n.

    Keeps the first occurrence of each valid index, then appends the
    missing indices in original candidate order.  Returns (ranking,
    was_repaired).
    """
    seen: set[int] = set()
    cleaned: list[int] = []
    for idx in ranking:
        if isinstance(idx, bool) or not isinstance(idx, int):
            continue
        if 1 <= idx <= n and idx not in seen:
            seen.add(idx)
            cleaned.append(idx)
    repaired = len(cleaned) != len(ranking) or len(cleaned) != n
    for idx in range(1, n + 1):
        if idx not in seen:
            cleaned.append(idx)
    return cleaned, repaired


def prune(
    candidate_ids: Sequence[str],
    stage: str,
    rho: float,
    ranking: Sequence[int],
    evidence: str = "",
    branching: int | None = None,
) -> PruneDecision:
    """Apply an evaluator ranking, retaining the schedule's top slice.

    ``ranking`` uses 1-based positions into ``candidate_ids``.  The retained
    set is always a prefix of the (possibly repaired) ranking.  ``branching``
    defaults to the number of candidates; it differs when upstream parsing
    dropped some of the requested candidates.
    """
    n = len(candidate_ids)
    if n == 0:
        raise PruningError("cannot prune an empty candidate list")
    keep = min(retained_count(branching if branching is not None else n, rho), n)
    fixed, repaired = repair_ranking(ranking, n)
    if repaired:
        logger.warning(
            "evaluator ranking %s for stage %s is not a permutation of 1..%d; repaired to %s",
            list(ranking), stage, n, fixed,
        )
    retained = tuple(candidate_ids[idx - 1] for idx in fixed[:keep])
    return PruneDecision(
        stage=stage,
        input_ids=tuple(candidate_ids),
        evaluator_ranking=tuple(fixed),
        retained_ids=retained,
        evidence=evidence,
        repaired=repaired,
    )
