"""Budget-matched pruning sweeps.

A sweep fixes the reference budget from a no-pruning baseline leg, then for
each pruning ratio executes runs until the cumulative cost is matched to
that budget, and aggregates scores and budgets into a summary table plus
per-leg sorted curves.

Two execution modes share the same accounting: ``kernel`` simulates runs
through the compiled/numpy kernel (fast; used for Monte-Carlo studies),
``engine`` drives the full orchestration path per run (slower; writes full
run directories and works against a live backend).
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analytics import SweepRow, build_sorted_curve, summarize_leg, write_curve_csv, write_sweep_csv
from .artifacts import RunConfig, RunResult
from .budget import BudgetLedger, BudgetMatchState, match_budget
from .datasets import DatasetHandle
from .engine import run_pipeline, write_run_dir
from .gateway.requests import GenerationBackend
from .gateway.simulator import SimulatedBackend
from .sandbox import ExecutorBase
from .simkernel import protocol as proto
from .simkernel.runner import cost_stream, simulate_runs

logger = logging.getLogger(__name__)

DEFAULT_RHOS = (0.2, 0.4, 0.6, 0.8)


@dataclass(frozen=True)
class SweepSpec:
    config: RunConfig  # pruning_ratio is overridden per leg
    rhos: tuple[float, ...] = DEFAULT_RHOS
    baseline_runs: int = 15
    model: proto.SimulatorModel = field(default_factory=proto.SimulatorModel)
    mode: str = "kernel"  # kernel | engine
    pilot_size: int = 3
    workers: int = 1

    def __post_init__(self) -> None:
        if any(not 0.0 < r <= 1.0 for r in self.rhos):
            raise ValueError("sweep rho values must be in (0, 1]")
        if self.baseline_runs < 1:
            raise ValueError("baseline_runs must be >= 1")
        if self.mode not in ("kernel", "engine"):
            raise ValueError(f"unknown sweep mode {self.mode!r}")


@dataclass
class LegOutcome:
    rho: float
    leg: int
    runs: int
    scores: np.ndarray
    gen_budget: int
    prune_budget: int
    match: BudgetMatchState | None = None
    degenerate: bool = False

    @property
    def setting(self) -> str:
        return "baseline" if self.leg == 0 else f"rho={self.rho:g}"

    def row(self) -> SweepRow:
        return summarize_leg(self.setting, self.runs, list(self.scores), self.gen_budget, self.prune_budget)


@dataclass
class SweepResult:
    target_budget: float
    rows: list[SweepRow]
    legs: list[LegOutcome]


def run_sweep(
    spec: SweepSpec,
    dataset: DatasetHandle | None = None,
    backend: GenerationBackend | None = None,
    executor: ExecutorBase | None = None,
    out_dir: str | Path | None = None,
) -> SweepResult:
    if spec.mode == "kernel":
        legs = _kernel_sweep(spec)
    else:
        if dataset is None:
            raise ValueError("engine-mode sweeps need a dataset")
        legs = _engine_sweep(spec, dataset, backend, executor, out_dir)
    target = float(legs[0].gen_budget + legs[0].prune_budget)
    result = SweepResult(target_budget=target, rows=[leg.row() for leg in legs], legs=legs)
    if out_dir is not None:
        persist_sweep(result, spec, out_dir)
    return result


# -- kernel mode -------------------------------------------------------------


def _kernel_sweep(spec: SweepSpec) -> list[LegOutcome]:
    base_cfg = replace(spec.config, pruning_ratio=0.0)
    baseline = simulate_runs(base_cfg, spec.model, spec.baseline_runs, leg=0)
    use_tokens = spec.config.budget_unit == "output_tokens"
    target = float((baseline.gen_tokens + baseline.prune_tokens) if use_tokens
                   else (baseline.gen_calls + baseline.prune_calls))
    legs = [
        LegOutcome(
            rho=0.0, leg=0, runs=baseline.runs, scores=baseline.scores,
            gen_budget=baseline.gen_tokens if use_tokens else baseline.gen_calls,
            prune_budget=baseline.prune_tokens if use_tokens else baseline.prune_calls,
        )
    ]
    for leg_idx, rho in enumerate(spec.rhos, start=1):
        cfg = replace(spec.config, pruning_ratio=rho)
        state = match_budget(target, cost_stream(cfg, spec.model, leg=leg_idx), pilot_size=spec.pilot_size)
        stats = simulate_runs(cfg, spec.model, state.chosen, leg=leg_idx)
        leg = LegOutcome(
            rho=rho, leg=leg_idx, runs=state.chosen, scores=stats.scores,
            gen_budget=stats.gen_tokens if use_tokens else stats.gen_calls,
            prune_budget=stats.prune_tokens if use_tokens else stats.prune_calls,
            match=state, degenerate=state.overshoot,
        )
        if state.overshoot:
            logger.warning("budget matching degenerate at rho=%g: first run exceeded the target", rho)
        legs.append(leg)
    return legs


# -- engine mode -------------------------------------------------------------


def _engine_sweep(
    spec: SweepSpec,
    dataset: DatasetHandle,
    backend: GenerationBackend | None,
    executor: ExecutorBase | None,
    out_dir: str | Path | None,
) -> list[LegOutcome]:
    use_tokens = spec.config.budget_unit == "output_tokens"

    def make_backend() -> GenerationBackend:
        return backend if backend is not None else SimulatedBackend(spec.model)

    def execute_run(cfg: RunConfig, leg: int, idx: int) -> tuple[RunResult, BudgetLedger]:
        ledger = BudgetLedger()
        result = run_pipeline(cfg, dataset, make_backend(), ledger,
                              executor=executor, run_index=idx, leg=leg)
        if out_dir is not None:
            run_dir = Path(out_dir) / f"leg{leg:02d}" / result.run_id
            write_run_dir(run_dir, cfg, dataset, result, ledger)
        return result, ledger

    base_cfg = replace(spec.config, pruning_ratio=0.0)
    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            baseline_runs = list(pool.map(lambda i: execute_run(base_cfg, 0, i), range(spec.baseline_runs)))
    else:
        baseline_runs = [execute_run(base_cfg, 0, i) for i in range(spec.baseline_runs)]

    def leg_from_runs(rho: float, leg_idx: int, runs: list[tuple[RunResult, BudgetLedger]],
                      match: BudgetMatchState | None = None) -> LegOutcome:
        scores: list[float] = []
        gen = prune = 0
        for result, ledger in runs:
            scores.extend(result.scores)
            g, p = (ledger.token_split() if use_tokens else ledger.formula_totals())
            gen += g
            prune += p
        return LegOutcome(
            rho=rho, leg=leg_idx, runs=len(runs), scores=np.asarray(scores),
            gen_budget=gen, prune_budget=prune, match=match,
            degenerate=bool(match and match.overshoot),
        )

    legs = [leg_from_runs(0.0, 0, baseline_runs)]
    target = float(legs[0].gen_budget + legs[0].prune_budget)

    for leg_idx, rho in enumerate(spec.rhos, start=1):
        cfg = replace(spec.config, pruning_ratio=rho)
        executed: list[tuple[RunResult, BudgetLedger]] = []

        def stream():
            idx = 0
            while True:
                result, ledger = execute_run(cfg, leg_idx, idx)
                executed.append((result, ledger))
                yield float(ledger.total_cost(cfg.budget_unit))
                idx += 1

        state = match_budget(target, stream, pilot_size=spec.pilot_size)
        legs.append(leg_from_runs(rho, leg_idx, executed[: state.chosen], match=state))
    return legs


# -- persistence --------------------------------------------------------------


def persist_sweep(result: SweepResult, spec: SweepSpec, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(result.rows, out / "summary.csv")
    for leg in result.legs:
        if len(leg.scores):
            curve = build_sorted_curve(
                {f"{leg.setting}-r{idx:06d}": float(s) for idx, s in enumerate(leg.scores)}
            )
            write_curve_csv(curve, out / f"curve_{leg.setting.replace('=', '')}.csv")
    manifest = {
        "target_budget": result.target_budget,
        "mode": spec.mode,
        "baseline_runs": spec.baseline_runs,
        "rhos": list(spec.rhos),
        "budget_unit": spec.config.budget_unit,
        "seed": spec.config.seed,
        "branching_factor": spec.config.branching_factor,
        "legs": [
            {
                "setting": leg.setting,
                "rho": leg.rho,
                "runs": leg.runs,
                "reports": int(len(leg.scores)),
                "gen_budget": leg.gen_budget,
                "prune_budget": leg.prune_budget,
                "degenerate": leg.degenerate,
                "match": leg.match.to_dict() if leg.match else None,
            }
            for leg in result.legs
        ],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out
