"""Branch-and-prune execution of one pipeline run.

A run expands profiling -> directions -> charts -> insights as a DAG with
branching factor ``b`` per stage, prunes each stage to the schedule's
retained count via stage-local evaluator rankings, verifies charts through
sandboxed execution plus a legibility filter, judges every retained
(chart, insight) report, and logs one budget event per backend call with
stage attribution.

Call accounting per run (judge repeats = 1, clean execution):
``b`` profiling calls (+1 prune), then per retained profile one direction
call (+1 prune), two calls per retained direction (code + legibility),
and per verified chart one insight call (+1 prune) plus one judge call
per retained insight.  Dropped or unparseable candidates narrow the branch
instead of aborting, and never trigger re-prompts, so accounting stays
exact.  Rectification calls carry their own category so the idealized
per-run decomposition can be checked by filtering them out.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .artifacts import (
    ChartArtifact,
    FinalReport,
    Insight,
    MetadataReport,
    RunConfig,
    RunResult,
    VisualizationDirection,
)
from .budget import BudgetLedger
from .datasets import DatasetHandle
from .gateway.parsing import ParseError, extract_fenced_code, extract_fenced_json
from .gateway.requests import BackendError, GenerationBackend, GenerationRequest, GenerationResponse
from .judging import ReportScore, parse_judgement, scalar_of
from .pruning import prune
from .sandbox import ExecutorBase, VirtualExecutor
from .simkernel import protocol as proto

logger = logging.getLogger(__name__)


class PipelineAborted(RuntimeError):
    """Backend gave out mid-run; the event log up to the failure is intact."""

    def __init__(self, message: str, partial: "RunResult | None" = None):
        self.partial = partial
        super().__init__(message)


@dataclass
class EngineContext:
    config: RunConfig
    dataset: DatasetHandle
    backend: GenerationBackend
    ledger: BudgetLedger
    executor: ExecutorBase
    run_id: str
    run_seed: int


def run_pipeline(
    config: RunConfig,
    dataset: DatasetHandle,
    backend: GenerationBackend,
    ledger: BudgetLedger,
    executor: ExecutorBase | None = None,
    run_index: int = 0,
    leg: int = 0,
    run_id: str | None = None,
) -> RunResult:
    """Execute one seeded pipeline run and return its scored reports."""
    ctx = EngineContext(
        config=config,
        dataset=dataset,
        backend=backend,
        ledger=ledger,
        executor=executor or VirtualExecutor(),
        run_id=run_id or f"run-{leg:03d}-{run_index:05d}",
        run_seed=proto.run_seed(config.seed, leg, run_index),
    )
    result = RunResult(run_id=ctx.run_id, seed=config.seed, reports=[], verified_counts=[])
    try:
        _execute(ctx, result)
    except BackendError as exc:
        raise PipelineAborted(f"run {ctx.run_id} aborted: {exc}", partial=result) from exc
    return result


def _execute(ctx: EngineContext, result: RunResult) -> None:
    config = ctx.config
    b = config.branching_factor

    profiles = profile_stage(ctx)
    result.dropped_candidates += b - len(profiles)
    profiles = _prune_stage(
        ctx, "profiling", profiles,
        texts=[p.text for p in profiles],
        keys=[("profile", p.index, 0, 0) for p in profiles],
        template="eval_meta",
    )

    for profile in profiles:
        directions = direction_stage(ctx, profile)
        directions = _prune_stage(
            ctx, "direction", directions,
            texts=[json.dumps(_direction_payload(d), sort_keys=True) for d in directions],
            keys=[("direction", profile.index, d.index, 0) for d in directions],
            template="eval_direction",
        )

        verified = 0
        for direction in directions:
            chart = chart_stage(ctx, profile, direction)
            if not chart.verified:
                continue
            verified += 1
            insights = insight_stage(ctx, profile, direction, chart)
            insights = _prune_stage(
                ctx, "insight", insights,
                texts=[i.description for i in insights],
                keys=[("insight", profile.index, direction.index, i.index) for i in insights],
                template="eval_insight",
            )
            reports = assemble_reports(profile, direction, chart, insights)
            for report in reports:
                _judge_report(ctx, profile, direction, report)
                if report.score is None or report.score.missing:
                    result.missing_scores += 1
                result.reports.append(report)
        result.verified_counts.append(verified)


# -- stages ----------------------------------------------------------------


def profile_stage(ctx: EngineContext) -> list[MetadataReport]:
    """One backend call per requested metadata report; empties are dropped."""
    profiles: list[MetadataReport] = []
    for i in range(ctx.config.branching_factor):
        response = _call(
            ctx,
            stage="profiling",
            category="generation",
            request=GenerationRequest(
                template_id="profiling",
                user_content=ctx.dataset.metadata_block(),
                decoding=ctx.config.decoding,
                sim=_sim(ctx, "profile", i=i),
            ),
        )
        if not response.text.strip():
            logger.warning("profile candidate %d produced empty text; dropped", i)
            continue
        profiles.append(
            MetadataReport(
                id=f"{ctx.run_id}-p{i:02d}",
                text=response.text,
                dataset_ref=ctx.dataset.name,
                index=i,
            )
        )
    return profiles


def direction_stage(ctx: EngineContext, profile: MetadataReport) -> list[VisualizationDirection]:
    """One call proposing ``b`` directions; invalid candidates narrow the branch."""
    b = ctx.config.branching_factor
    response = _call(
        ctx,
        stage="direction",
        category="generation",
        request=GenerationRequest(
            template_id="direction",
            fills={"num_directions": b},
            user_content=profile.text,
            decoding=ctx.config.decoding,
            sim=_sim(ctx, "direction", i=profile.index),
        ),
    )
    directions: list[VisualizationDirection] = []
    try:
        raw = extract_fenced_json(response.text, context="direction")
    except ParseError as exc:
        logger.warning("direction drafting for %s unparseable (%s); branch narrowed", profile.id, exc)
        return directions
    if not isinstance(raw, list):
        logger.warning("direction drafting for %s returned a non-list; branch narrowed", profile.id)
        return directions
    required = {"topic", "chart_type", "variables", "explanation", "parameters"}
    for j, item in enumerate(raw[:b]):
        if not isinstance(item, dict) or not required.issubset(item):
            logger.warning("direction %s.%d missing keys; dropped", profile.id, j)
            continue
        variables = [str(v) for v in item["variables"]]
        if not ctx.dataset.validate_variables(variables):
            logger.warning("direction %s.%d references unknown columns %s; dropped", profile.id, j, variables)
            continue
        directions.append(
            VisualizationDirection(
                id=f"{profile.id}-d{j:02d}",
                parent_profile=profile.id,
                topic=str(item["topic"]),
                chart_type=str(item["chart_type"]),
                variables=variables,
                explanation=str(item["explanation"]),
                parameters=dict(item["parameters"]),
                index=j,
            )
        )
    if len(raw) < b:
        logger.warning("direction drafting for %s returned %d of %d candidates", profile.id, len(raw), b)
    return directions


def chart_stage(ctx: EngineContext, profile: MetadataReport, direction: VisualizationDirection) -> ChartArtifact:
    """Code generation, sandboxed execution with rectification, legibility check."""
    chart_id = f"{direction.id}-c"
    image_path = _image_path(ctx, chart_id)
    fills = {"data_path": ctx.dataset.path, "output_path": image_path}
    response = _call(
        ctx,
        stage="code",
        category="generation",
        request=GenerationRequest(
            template_id="codegen",
            fills=fills,
            user_content=_direction_prompt(ctx, direction),
            decoding=ctx.config.decoding,
            sim=_sim(ctx, "codegen", i=profile.index, j=direction.index),
        ),
    )
    chart = ChartArtifact(id=chart_id, parent_direction=direction.id, code="", image_path=image_path)
    try:
        chart.code = extract_fenced_code(response.text, "python", context="codegen")
    except ParseError as exc:
        logger.warning("codegen for %s unparseable (%s); chart dropped", chart_id, exc)
        chart.failure_trace = str(exc)
        return chart

    outcome = ctx.executor.execute(
        chart.code, ctx.dataset.path, image_path, ctx.run_id, chart_id,
    )
    while not outcome.ok and chart.rectify_count < ctx.config.rectify_attempts:
        chart.rectify_count += 1
        rectify_response = _call(
            ctx,
            stage="code",
            category="rectification",
            request=GenerationRequest(
                template_id="rectify",
                fills=fills,
                user_content=f"Original code:\n{chart.code}\n\nError feedback:\n{outcome.trace}",
                decoding=ctx.config.decoding,
                sim=_sim(ctx, "rectify", i=profile.index, j=direction.index),
            ),
        )
        try:
            chart.code = extract_fenced_code(rectify_response.text, "python", context="rectify")
        except ParseError:
            logger.warning("rectification %d for %s unparseable", chart.rectify_count, chart_id)
            break
        outcome = ctx.executor.execute(
            chart.code, ctx.dataset.path, image_path, ctx.run_id, chart_id,
        )

    if not outcome.ok:
        chart.failure_trace = outcome.trace
        logger.warning("chart %s failed execution after %d rectifications", chart_id, chart.rectify_count)
        return chart

    verify_response = _call(
        ctx,
        stage="verify",
        category="generation",
        request=GenerationRequest(
            template_id="chart_filter",
            user_content="Assess the attached chart.",
            decoding=ctx.config.decoding,
            attachments=_image_bytes(image_path),
            sim=_sim(ctx, "chart", i=profile.index, j=direction.index),
        ),
    )
    try:
        verdict = extract_fenced_json(verify_response.text, context="chart_filter")
        chart.verified = bool(verdict.get("is_legible", False))
    except ParseError as exc:
        logger.warning("chart filter for %s unparseable (%s); treated as not legible", chart_id, exc)
        chart.verified = False
    return chart


def insight_stage(ctx: EngineContext, profile: MetadataReport, direction: VisualizationDirection,
                  chart: ChartArtifact) -> list[Insight]:
    """One drafting call per verified chart yielding ``b`` insight candidates."""
    b = ctx.config.branching_factor
    response = _call(
        ctx,
        stage="insight",
        category="generation",
        request=GenerationRequest(
            template_id="insight",
            fills={"num_insights": b},
            user_content=f"Chart topic: {direction.topic}",
            decoding=ctx.config.decoding,
            attachments=_image_bytes(chart.image_path),
            sim=_sim(ctx, "insight", i=profile.index, j=direction.index),
        ),
    )
    insights: list[Insight] = []
    try:
        raw = extract_fenced_json(response.text, context="insight")
    except ParseError as exc:
        logger.warning("insight drafting for %s unparseable (%s)", chart.id, exc)
        return insights
    items = raw.get("insights", []) if isinstance(raw, dict) else []
    for k, item in enumerate(items[:b]):
        description = str(item.get("description", "")).strip() if isinstance(item, dict) else ""
        if not description:
            logger.warning("insight %s.%d empty; dropped", chart.id, k)
            continue
        insights.append(
            Insight(id=f"{direction.id}-k{k:02d}", parent_chart=chart.id, description=description, index=k)
        )
    return insights


def assemble_reports(profile: MetadataReport, direction: VisualizationDirection,
                     chart: ChartArtifact, retained_insights: list[Insight]) -> list[FinalReport]:
    """One final report per retained insight of a verified chart."""
    if not chart.verified:
        raise ValueError(f"cannot assemble reports for unverified chart {chart.id}")
    return [
        FinalReport(
            id=insight.id,
            chart=chart,
            insight=insight,
            lineage=(profile.id, direction.id, chart.id, insight.id),
        )
        for insight in retained_insights
    ]


# -- judging ----------------------------------------------------------------


def judge_report(ctx: EngineContext, profile_index: int, direction_index: int, insight_index: int,
                 insight_text: str, image_path: str, level: str, repeats: int) -> ReportScore:
    """Judge one report ``repeats`` independent times; mean of surviving repeats.

    An unparseable judgement gets exactly one retry (logged as
    ``judge_retry``); a twice-failed repeat is recorded as missing.
    """
    score = ReportScore(level=level)
    for repeat in range(repeats):
        parsed = None
        for attempt in range(2):
            response = _call(
                ctx,
                stage="judge",
                category="generation" if attempt == 0 else "judge_retry",
                request=GenerationRequest(
                    template_id=f"judge_{level}",
                    user_content=insight_text,
                    decoding=ctx.config.decoding,
                    attachments=_image_bytes(image_path),
                    sim=_sim(
                        ctx, "judge",
                        i=profile_index, j=direction_index, k=insight_index,
                        repeat=repeat, level=level, insight_text=insight_text,
                    ),
                ),
            )
            try:
                parsed = parse_judgement(response.text, level)
                break
            except (ParseError, ValueError) as exc:
                logger.warning("judgement parse failure (repeat %d attempt %d): %s", repeat, attempt, exc)
        if parsed is None:
            score.failed_repeats += 1
        else:
            score.per_repeat.append(scalar_of(parsed))
    return score


def _judge_report(ctx: EngineContext, profile: MetadataReport, direction: VisualizationDirection,
                  report: FinalReport) -> None:
    report.score = judge_report(
        ctx,
        profile.index,
        direction.index,
        report.insight.index,
        report.insight.description,
        report.chart.image_path,
        ctx.config.judger_level,
        ctx.config.judge_repeats,
    )
    for level in ctx.config.extra_judge_levels:
        if level == ctx.config.judger_level:
            continue
        report.extra_scores[level] = judge_report(
            ctx,
            profile.index,
            direction.index,
            report.insight.index,
            report.insight.description,
            report.chart.image_path,
            level,
            ctx.config.judge_repeats,
        )


# -- helpers ----------------------------------------------------------------


def _prune_stage(ctx: EngineContext, stage: str, candidates: list, texts: list[str],
                 keys: list[tuple], template: str) -> list:
    """Evaluator-guided pruning: exactly one call per invocation when active."""
    rho = ctx.config.rho_for(_plan_stage(stage))
    if rho == 0 or not candidates:
        return candidates
    listing = "\n".join(f"{idx}: {text}" for idx, text in enumerate(texts, start=1))
    response = _call(
        ctx,
        stage=stage,
        category="pruning",
        request=GenerationRequest(
            template_id=template,
            user_content=listing,
            decoding=ctx.config.decoding,
            sim=_sim(ctx, "eval", candidates=keys),
        ),
    )
    ranking: list[int] = []
    evidence = ""
    try:
        doc = extract_fenced_json(response.text, context=template)
        ranking = list(doc.get("ranking", []))
        evidence = str(doc.get("evidence", ""))
    except ParseError as exc:
        logger.warning("evaluator output for %s unparseable (%s); ranking repaired", stage, exc)
    decision = prune(
        [c.id for c in candidates],
        stage,
        rho,
        ranking,
        evidence=evidence,
        branching=ctx.config.branching_factor,
    )
    by_id = {c.id: c for c in candidates}
    return [by_id[cid] for cid in decision.retained_ids]


_PLAN_STAGES = {"profiling": "profiling", "direction": "visualization", "insight": "insight"}


def _plan_stage(stage: str) -> str:
    return _PLAN_STAGES[stage]


def _sim(ctx: EngineContext, kind: str, **extra) -> dict:
    payload = {
        "run_seed": ctx.run_seed,
        "kind": kind,
        "columns": list(ctx.dataset.columns),
        "dataset": ctx.dataset.name,
        "shape": ctx.dataset.shape_text,
    }
    payload.update(extra)
    return payload


def _call(ctx: EngineContext, stage: str, category: str, request: GenerationRequest) -> GenerationResponse:
    response = ctx.backend.complete(request)
    # every attempt that reached the provider is billable; only the final
    # one carries the completion's tokens
    for _ in range(response.provider_attempts - 1):
        ctx.ledger.log(ctx.run_id, stage, category, output_tokens=0)
    ctx.ledger.log(ctx.run_id, stage, category, output_tokens=response.output_tokens)
    return response


def _direction_prompt(ctx: EngineContext, direction: VisualizationDirection) -> str:
    return json.dumps(_direction_payload(direction), sort_keys=True) + "\n\n" + ctx.dataset.metadata_block()


def _direction_payload(direction: VisualizationDirection) -> dict:
    return {
        "topic": direction.topic,
        "chart_type": direction.chart_type,
        "variables": direction.variables,
        "explanation": direction.explanation,
        "parameters": direction.parameters,
    }


def _image_path(ctx: EngineContext, chart_id: str) -> str:
    getter = getattr(ctx.executor, "scratch_root", None)
    if getter is None:
        return f"virtual://{ctx.run_id}/{chart_id}.png"
    return str(Path(getter) / ctx.run_id / chart_id / "chart.png")


def _image_bytes(image_path: str) -> tuple[bytes, ...]:
    if image_path.startswith("virtual://"):
        return ()
    path = Path(image_path)
    if path.exists():
        return (path.read_bytes(),)
    return ()


# -- run directory persistence ----------------------------------------------


def write_run_dir(out_dir: str | Path, config: RunConfig, dataset: DatasetHandle,
                  result: RunResult, ledger: BudgetLedger) -> Path:
    """Persist manifest, event log, and per-report JSON for one run."""
    out = Path(out_dir)
    reports_dir = out / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "run_id": result.run_id,
        "seed": config.seed,
        "dataset_path": dataset.path,
        "config": config.to_dict(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    ledger.write_jsonl(out / "events.jsonl")
    for report in result.reports:
        (reports_dir / f"{report.id}.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
        )
    summary = {
        "run_id": result.run_id,
        "n_reports": len(result.reports),
        "verified_counts": result.verified_counts,
        "dropped_candidates": result.dropped_candidates,
        "missing_scores": result.missing_scores,
        "gen_calls": ledger.formula_totals()[0],
        "prune_calls": ledger.formula_totals()[1],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return out
