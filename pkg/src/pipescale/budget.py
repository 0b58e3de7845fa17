"""Itemized compute accounting and budget-matched run-count selection.

Budgets are measured in LLM calls (one event per call) or output tokens.
Events are the source of truth; the closed-form run costs here are checked
against event totals in tests, never substituted for them.

Categories ``rectification`` and ``judge_retry`` hold repair traffic that
the idealized per-run decomposition deliberately omits; filtering them out
lets event logs be compared against the formulas exactly.  Final-judge
calls are logged under ``generation`` (with stage ``judge``) so generation
totals line up with published accounting that folds judging into the
generation budget.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

from .pruning import retained_count

CATEGORIES = ("generation", "pruning", "rectification", "judge_retry")
FORMULA_CATEGORIES = ("generation", "pruning")


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class BudgetEvent:
    seq: int
    run_id: str
    stage: str
    category: str
    calls: int = 1
    output_tokens: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "run_id": self.run_id,
                "stage": self.stage,
                "category": self.category,
                "calls": self.calls,
                "output_tokens": self.output_tokens,
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(line: str) -> "BudgetEvent":
        d = json.loads(line)
        return BudgetEvent(
            seq=d["seq"],
            run_id=d["run_id"],
            stage=d["stage"],
            category=d["category"],
            calls=d["calls"],
            output_tokens=d["output_tokens"],
        )


class BudgetLedger:
    """Append-only event log with per-category/per-stage running totals.

    Appends are serialized behind a lock; sequence numbers define a total
    order so concurrent stage execution cannot perturb replay.
    """

    def __init__(self) -> None:
        self._events: list[BudgetEvent] = []
        self._lock = threading.Lock()
        self._calls: dict[str, int] = {c: 0 for c in CATEGORIES}
        self._tokens: dict[str, int] = {c: 0 for c in CATEGORIES}
        self._stage_calls: dict[str, int] = {}

    def log(self, run_id: str, stage: str, category: str, output_tokens: int = 0) -> BudgetEvent:
        if category not in CATEGORIES:
            raise BudgetError(f"unknown budget category {category!r}")
        if output_tokens < 0:
            raise BudgetError("output_tokens must be non-negative")
        with self._lock:
            event = BudgetEvent(
                seq=len(self._events) + 1,
                run_id=run_id,
                stage=stage,
                category=category,
                output_tokens=output_tokens,
            )
            self._events.append(event)
            self._calls[category] += 1
            self._tokens[category] += output_tokens
            self._stage_calls[stage] = self._stage_calls.get(stage, 0) + 1
        return event

    @property
    def events(self) -> tuple[BudgetEvent, ...]:
        with self._lock:
            return tuple(self._events)

    def calls(self, category: str | None = None) -> int:
        with self._lock:
            if category is None:
                return sum(self._calls.values())
            return self._calls[category]

    def tokens(self, category: str | None = None) -> int:
        with self._lock:
            if category is None:
                return sum(self._tokens.values())
            return self._tokens[category]

    def stage_calls(self) -> dict[str, int]:
        with self._lock:
            return dict(self._stage_calls)

    def formula_totals(self) -> tuple[int, int]:
        """(generation, pruning) call counts with repair categories excluded."""
        with self._lock:
            return self._calls["generation"], self._calls["pruning"]

    def token_split(self) -> tuple[int, int]:
        """(generation, pruning) output-token totals, repair categories excluded."""
        with self._lock:
            return self._tokens["generation"], self._tokens["pruning"]

    def total_cost(self, unit: str) -> int:
        """Everything spent, in the chosen unit, including repair traffic."""
        if unit == "llm_calls":
            return self.calls()
        if unit == "output_tokens":
            return self.tokens()
        raise BudgetError(f"unknown budget unit {unit!r}")

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for event in self.events:
                fh.write(event.to_json() + "\n")

    @staticmethod
    def read_jsonl(path) -> "BudgetLedger":
        ledger = BudgetLedger()
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                e = BudgetEvent.from_json(line)
                ledger.log(e.run_id, e.stage, e.category, e.output_tokens)
        return ledger

    def verify_totals(self) -> bool:
        """Recompute totals from the event list (consistency check)."""
        calls = {c: 0 for c in CATEGORIES}
        tokens = {c: 0 for c in CATEGORIES}
        for e in self.events:
            calls[e.category] += e.calls
            tokens[e.category] += e.output_tokens
        with self._lock:
            return calls == self._calls and tokens == self._tokens


def token_totals(ledger: BudgetLedger) -> tuple[int, int]:
    """(generation tokens, pruning tokens) for token-denominated budgeting."""
    return ledger.token_split()


@dataclass(frozen=True)
class BudgetBreakdown:
    gen_calls: int
    prune_calls: int

    @property
    def total(self) -> int:
        return self.gen_calls + self.prune_calls


def exact_run_budget(branching: int, n_prime: int, verified_counts: Iterable[int], rho: float) -> BudgetBreakdown:
    """Closed-form call count of one run given realized verified-chart counts.

    Per run: ``branching`` profile calls plus one prune (if pruning), then per
    retained profile one direction call (+prune), two calls per retained
    direction (code + legibility check), and per verified chart one insight
    call (+prune) plus ``n_prime`` judge calls.
    """
    vs = list(verified_counts)
    if len(vs) != n_prime:
        raise BudgetError(f"expected {n_prime} verified-chart counts, got {len(vs)}")
    pruning = 1 if rho > 0 else 0
    gen = branching
    prune = pruning
    for v in vs:
        if not 0 <= v <= n_prime:
            raise BudgetError(f"verified count {v} outside [0, {n_prime}]")
        gen += 1 + 2 * n_prime + v + v * n_prime
        prune += pruning * (1 + v)
    return BudgetBreakdown(gen_calls=gen, prune_calls=prune)


@dataclass(frozen=True)
class ComplexityEstimate:
    """Expected per-run cost under Binomial(n', pass_prob) verified counts."""

    rho: float
    branching: int
    n_prime: int
    pass_prob: float
    exact_expected: float
    cubic_term: float
    pruning_term: float


def expected_run_budget(rho: float, branching: int, pass_prob: float) -> ComplexityEstimate:
    """Expected call count of one run; cubic/quadratic leading terms exposed."""
    if not 0.0 <= pass_prob <= 1.0:
        raise BudgetError(f"pass_prob must be in [0,1], got {pass_prob}")
    n = retained_count(branching, rho)
    ind = 1.0 if rho > 0 else 0.0
    ev = pass_prob * n
    expected = branching + ind + n * (1.0 + ind + 2.0 * n + ev + ev * ind + ev * n)
    return ComplexityEstimate(
        rho=rho,
        branching=branching,
        n_prime=n,
        pass_prob=pass_prob,
        exact_expected=expected,
        cubic_term=pass_prob * n**3,
        pruning_term=ind * pass_prob * n**2,
    )


@dataclass
class BudgetMatchState:
    """Outcome of matching cumulative run cost to a target budget."""

    target: float
    pilot_estimate: float
    n0: int
    n_minus: int
    n_plus: int
    chosen: int
    cumulative: float
    gap: float
    overshoot: bool = False
    # every executed run's cost, including the crossing run when it was
    # not kept; consumers slice [:chosen] for the matched set
    per_run_costs: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "pilot_estimate": self.pilot_estimate,
            "n0": self.n0,
            "n_minus": self.n_minus,
            "n_plus": self.n_plus,
            "chosen": self.chosen,
            "cumulative": self.cumulative,
            "gap": self.gap,
            "overshoot": self.overshoot,
        }


def match_budget(
    target: float,
    run_costs: Iterable[float] | Callable[[], Iterator[float]],
    pilot_size: int = 3,
    pilot_margin: float = 0.9,
) -> BudgetMatchState:
    """Choose a run count whose cumulative cost lands nearest the target.

    Runs are consumed one at a time from ``run_costs`` (each pull executes
    a run).  A short pilot estimates the typical per-run cost and fixes an
    initial count ``n0`` whose estimated cost stays under ``pilot_margin``
    of the target; execution then continues run by run until the cumulative
    cost first reaches the target, and whichever neighbour of the crossing
    is closer wins.  If the very first run overshoots the target on its
    own, one run is kept and flagged.
    """
    if target <= 0:
        raise BudgetError(f"target budget must be positive, got {target}")
    costs_iter = iter(run_costs() if callable(run_costs) else run_costs)

    costs: list[float] = []
    cumulative: list[float] = []
    total = 0.0

    def pull() -> bool:
        nonlocal total
        try:
            c = next(costs_iter)
        except StopIteration:
            raise BudgetError("run cost stream exhausted before reaching the target budget") from None
        if c <= 0:
            raise BudgetError(f"per-run cost must be positive, got {c}")
        costs.append(float(c))
        total += float(c)
        cumulative.append(total)
        return total >= target

    crossed = False
    while len(costs) < pilot_size and not crossed:
        crossed = pull()
    pilot_estimate = total / len(costs)
    n0 = max(len(costs), math.floor(pilot_margin * target / pilot_estimate)) if not crossed else len(costs)

    while not crossed:
        crossed = pull()

    n_plus = len(costs)
    n_minus = n_plus - 1
    b_minus = cumulative[n_minus - 1] if n_minus >= 1 else 0.0
    b_plus = cumulative[n_plus - 1]

    if n_minus == 0:
        chosen = 1
        overshoot = b_plus > target
    else:
        # prefer staying under budget on exact ties
        chosen = n_minus if abs(b_minus - target) <= abs(b_plus - target) else n_plus
        overshoot = False
    chosen_cum = cumulative[chosen - 1]
    return BudgetMatchState(
        target=target,
        pilot_estimate=pilot_estimate,
        n0=n0,
        n_minus=n_minus,
        n_plus=n_plus,
        chosen=chosen,
        cumulative=chosen_cum,
        gap=abs(chosen_cum - target),
        overshoot=overshoot,
        per_run_costs=costs,
    )
