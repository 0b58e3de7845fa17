"""Operator entry points: run, sweep, analyze, match-budget, annotate.

Configuration comes from an optional YAML file plus flag overrides; only
secrets (API keys) come from the environment.  Exit codes: 0 success,
2 usage, 3 backend failure, 4 validation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .analytics import build_sorted_curve, summarize_leg, write_curve_csv, write_sweep_csv
from .artifacts import ConfigError, DecodingParams, RunConfig
from .budget import BudgetError, BudgetLedger, match_budget
from .datasets import load_dataset
from .engine import PipelineAborted, run_pipeline, write_run_dir
from .gateway.http import HttpBackend, HttpBackendConfig
from .gateway.requests import BackendError, TemplateStore
from .gateway.simulator import SimulatedBackend
from .sandbox import SubprocessExecutor, VirtualExecutor
from .simkernel import LANE_NAME, protocol as proto
from .simkernel.runner import cost_stream
from .sweep import SweepSpec, run_sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BACKEND = 3
EXIT_VALIDATION = 4


def _rho(value: str) -> float:
    rho = float(value)
    if not 0.0 <= rho <= 1.0:
        raise argparse.ArgumentTypeError(f"rho must be in [0, 1], got {value}")
    return rho


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return n


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="YAML config file; flags override it")
    parser.add_argument("--rho", type=_rho, default=None, help="pruning ratio in [0,1]")
    parser.add_argument("--branching", type=_positive_int, default=None, help="branching factor per stage")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--backend", choices=["sim", "http"], default=None)
    parser.add_argument("--budget-unit", choices=["calls", "tokens"], default=None)
    parser.add_argument("--judger", choices=["easy", "moderate", "harsh"], default=None)
    parser.add_argument("--judge-repeats", type=_positive_int, default=None)
    parser.add_argument("--dataset", type=Path, default=None)
    parser.add_argument("--out", type=Path, default=None)
    parser.add_argument("--force", action="store_true", help="allow writing into an existing out dir")
    parser.add_argument("--pass-prob", type=float, default=None, help="simulator chart pass probability")
    parser.add_argument("--eval-corr", type=float, default=None,
                        help="simulator evaluator/judge ranking correlation")
    parser.add_argument("--templates", type=Path, default=None, help="prompt template override dir")


def _load_settings(args: argparse.Namespace) -> dict:
    settings: dict = {}
    if args.config:
        if not args.config.exists():
            raise ConfigError(f"config file not found: {args.config}")
        settings = yaml.safe_load(args.config.read_text()) or {}
        if not isinstance(settings, dict):
            raise ConfigError("config file must hold a mapping")
    return settings


def _setting(args: argparse.Namespace, settings: dict, flag: str, key: str, default):
    value = getattr(args, flag, None)
    if value is not None:
        return value
    return settings.get(key, default)


def _build_config(args: argparse.Namespace, settings: dict, rho_default: float = 0.0) -> RunConfig:
    unit_flag = _setting(args, settings, "budget_unit", "budget_unit", "calls")
    unit = {"calls": "llm_calls", "tokens": "output_tokens",
            "llm_calls": "llm_calls", "output_tokens": "output_tokens"}.get(unit_flag)
    if unit is None:
        raise ConfigError(f"unknown budget unit {unit_flag!r}")
    decoding_settings = settings.get("decoding", {})
    return RunConfig(
        pruning_ratio=_setting(args, settings, "rho", "rho", rho_default),
        branching_factor=_setting(args, settings, "branching", "branching", 5),
        judger_level=_setting(args, settings, "judger", "judger", "harsh"),
        judge_repeats=_setting(args, settings, "judge_repeats", "judge_repeats", 1),
        rectify_attempts=settings.get("rectify_attempts", 2),
        seed=_setting(args, settings, "seed", "seed", 0),
        budget_unit=unit,
        decoding=DecodingParams(
            temperature=decoding_settings.get("temperature", 1.0),
            top_p=decoding_settings.get("top_p", 0.9),
            max_tokens=decoding_settings.get("max_tokens", 1500),
        ),
        extra_judge_levels=tuple(settings.get("extra_judge_levels", ())),
    )


def _build_model(args: argparse.Namespace, settings: dict) -> proto.SimulatorModel:
    sim_settings = settings.get("simulator", {})
    return proto.SimulatorModel(
        pass_prob=_setting(args, settings, "pass_prob", "pass_prob", sim_settings.get("pass_prob", 1.0)),
        evaluator_judge_correlation=_setting(
            args, settings, "eval_corr", "eval_corr",
            sim_settings.get("evaluator_judge_correlation", 1.0),
        ),
        judge_noise=sim_settings.get("judge_noise", 2.0),
        root_mean=sim_settings.get("root_mean", 50.0),
        root_spread=sim_settings.get("root_spread", 15.0),
        child_spread=sim_settings.get("child_spread", 12.0),
    )


def _build_backend(args: argparse.Namespace, settings: dict, model: proto.SimulatorModel):
    backend_kind = _setting(args, settings, "backend", "backend", "sim")
    if backend_kind == "sim":
        return SimulatedBackend(model), VirtualExecutor()
    http_settings = settings.get("http", {})
    config = HttpBackendConfig(
        base_url=http_settings.get("base_url", "http://localhost:8000/v1"),
        model=http_settings.get("model", "default"),
        api_key_env=http_settings.get("api_key_env", "PIPESCALE_API_KEY"),
        max_retries=http_settings.get("max_retries", 3),
        rate_per_s=http_settings.get("rate_per_s", 0.0),
        burst=http_settings.get("burst", 1),
    )
    templates = TemplateStore(args.templates or settings.get("templates"))
    scratch = Path(args.out or "pipescale-out") / "scratch"
    return HttpBackend(config, templates=templates), SubprocessExecutor(scratch)


def _prepare_out(args: argparse.Namespace, default_name: str) -> Path:
    out = args.out or Path(default_name)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise ConfigError(f"output directory {out} is not empty; pass --force to reuse it")
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands ---------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    settings = _load_settings(args)
    config = _build_config(args, settings)
    if args.dataset is None and "dataset" not in settings:
        raise ConfigError("a dataset is required (--dataset or config key 'dataset')")
    dataset = load_dataset(args.dataset or settings["dataset"])
    model = _build_model(args, settings)
    backend, executor = _build_backend(args, settings, model)
    out = _prepare_out(args, "pipescale-run")
    ledger = BudgetLedger()
    try:
        result = run_pipeline(config, dataset, backend, ledger, executor=executor)
    except PipelineAborted as exc:
        ledger.write_jsonl(out / "events.jsonl")
        logger.error("%s", exc)
        return EXIT_BACKEND
    write_run_dir(out, config, dataset, result, ledger)
    gen, prune = ledger.formula_totals()
    print(f"run {result.run_id}: {len(result.reports)} reports, gen={gen} prune={prune} -> {out}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    settings = _load_settings(args)
    config = _build_config(args, settings)
    model = _build_model(args, settings)
    rhos = tuple(settings.get("rhos", (0.2, 0.4, 0.6, 0.8)))
    spec = SweepSpec(
        config=config,
        rhos=rhos,
        baseline_runs=args.baseline_runs or settings.get("baseline_runs", 15),
        model=model,
        mode=args.mode,
        workers=args.workers,
    )
    out = _prepare_out(args, "pipescale-sweep")
    dataset = None
    backend = executor = None
    if spec.mode == "engine":
        if args.dataset is None and "dataset" not in settings:
            raise ConfigError("engine-mode sweeps need a dataset")
        dataset = load_dataset(args.dataset or settings["dataset"])
        backend, executor = _build_backend(args, settings, model)
    result = run_sweep(spec, dataset=dataset, backend=backend, executor=executor, out_dir=out)
    print(f"sweep target budget: {result.target_budget:g} ({config.budget_unit})")
    for row in result.rows:
        print(
            f"  {row.setting:<12} runs={row.runs:<5} reports={row.total_reports:<6} "
            f"score={row.score_mean:.2f}±{row.score_std:.2f} gen={row.gen_budget} prune={row.prune_budget}"
        )
    print(f"summary written to {out / 'summary.csv'}")
    return EXIT_OK


def cmd_match_budget(args: argparse.Namespace) -> int:
    settings = _load_settings(args)
    config = _build_config(args, settings, rho_default=0.8)
    model = _build_model(args, settings)
    state = match_budget(args.target, cost_stream(config, model, leg=args.leg))
    summary = {
        "target": state.target,
        "chosen_runs": state.chosen,
        "cumulative": state.cumulative,
        "gap": state.gap,
        "n_minus": state.n_minus,
        "n_plus": state.n_plus,
        "overshoot": state.overshoot,
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    if args.run_dir:
        run_dir = Path(args.run_dir)
        reports = sorted(run_dir.glob("reports/*.json"))
        if not reports:
            raise ConfigError(f"no reports found under {run_dir}")
        scores: dict[str, float] = {}
        for path in reports:
            doc = json.loads(path.read_text())
            if doc.get("score") and doc["score"].get("final") is not None:
                scores[doc["id"]] = doc["score"]["final"]
        ledger = BudgetLedger.read_jsonl(run_dir / "events.jsonl")
        gen, prune = ledger.formula_totals()
        curve = build_sorted_curve(scores)
        out = Path(args.out) if args.out else run_dir
        write_curve_csv(curve, out / "curve.csv")
        row = summarize_leg("run", 1, list(curve.scores), gen, prune)
        write_sweep_csv([row], out / "table.csv")
        print(f"{len(scores)} scored reports; mean {row.score_mean:.2f}±{row.score_std:.2f}; "
              f"gen={gen} prune={prune}")
        return EXIT_OK
    if args.annotations:
        from .annotation.study import ingest_study

        result = ingest_study(args.annotations, mode=args.alignment_mode)
        print(json.dumps(result.to_dict(), indent=2, sort_keys=True))
        return EXIT_OK
    raise ConfigError("analyze needs --run-dir or --annotations")


def cmd_annotate(args: argparse.Namespace) -> int:
    from .annotation.study import build_study, ingest_study, load_scored_reports

    if args.action == "export":
        run_dirs = [Path(p) for p in args.runs]
        if not run_dirs:
            raise ConfigError("annotate export needs at least one --runs directory")
        reports = load_scored_reports(run_dirs)
        out = _prepare_out(args, "pipescale-annotation")
        study = build_study(reports, out, seed=args.seed if args.seed is not None else 0,
                            dataset_label=args.label)
        total_pairs = sum(
            len(info["report_ids"]) * (len(info["report_ids"]) - 1) // 2
            for info in study["levels"].values()
        )
        print(f"exported {len(study['levels'])} sequences, {total_pairs} pairs -> {out}")
        return EXIT_OK
    if args.action in ("serve", "ingest") and args.annotations is None:
        raise ConfigError(f"annotate {args.action} needs --annotations")
    if args.action == "serve":
        import uvicorn

        from .annotation.service import AnnotationStore, create_app

        root = Path(args.annotations)
        store = AnnotationStore(root)
        images_dir = root / "images"
        images_dir.mkdir(parents=True, exist_ok=True)
        app = create_app(store, images_dir=images_dir, ui_dir=args.ui_dir)
        uvicorn.run(app, host=args.host, port=args.port)
        return EXIT_OK
    if args.action == "ingest":
        result = ingest_study(args.annotations, mode=args.alignment_mode)
        print(json.dumps(result.to_dict(), indent=2, sort_keys=True))
        print(f"selected judger: {result.selected_judger}" + (" (tie)" if result.tie else ""))
        return EXIT_OK
    raise ConfigError(f"unknown annotate action {args.action!r}")


def cmd_bench(args: argparse.Namespace) -> int:
    from .simkernel.bench import run_bench

    run_bench(runs=args.runs)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pipescale",
                                     description="budgeted branch-and-prune pipeline harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one pipeline run")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="budget-matched pruning sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--baseline-runs", type=_positive_int, default=None)
    p_sweep.add_argument("--mode", choices=["kernel", "engine"], default="kernel",
                         help="kernel simulates runs via the fast lane; engine drives full orchestration")
    p_sweep.add_argument("--workers", type=_positive_int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_match = sub.add_parser("match-budget", help="choose a run count matching a target budget")
    _add_common(p_match)
    p_match.add_argument("--target", type=float, required=True)
    p_match.add_argument("--leg", type=int, default=1)
    p_match.set_defaults(func=cmd_match_budget)

    p_analyze = sub.add_parser("analyze", help="curves, tables, and alignment metrics")
    p_analyze.add_argument("--run-dir", type=Path, default=None)
    p_analyze.add_argument("--annotations", type=Path, default=None)
    p_analyze.add_argument("--alignment-mode", choices=["per-annotator", "consensus"],
                           default="per-annotator")
    p_analyze.add_argument("--out", type=Path, default=None)
    p_analyze.set_defaults(func=cmd_analyze)

    p_annotate = sub.add_parser("annotate", help="pairwise annotation workflow")
    p_annotate.add_argument("action", choices=["export", "serve", "ingest"])
    p_annotate.add_argument("--runs", nargs="*", default=[], help="scored run directories (export)")
    p_annotate.add_argument("--annotations", type=Path, default=None, help="annotation directory")
    p_annotate.add_argument("--label", default="study")
    p_annotate.add_argument("--seed", type=int, default=None)
    p_annotate.add_argument("--out", type=Path, default=None)
    p_annotate.add_argument("--force", action="store_true")
    p_annotate.add_argument("--host", default="127.0.0.1")
    p_annotate.add_argument("--port", type=int, default=8700)
    p_annotate.add_argument("--ui-dir", type=Path, default=None)
    p_annotate.add_argument("--alignment-mode", choices=["per-annotator", "consensus"],
                            default="per-annotator")
    p_annotate.add_argument("--config", type=Path, default=None)
    p_annotate.set_defaults(func=cmd_annotate)

    p_bench = sub.add_parser("bench", help="compare kernel lanes")
    p_bench.add_argument("--runs", type=int, default=20000)
    p_bench.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BudgetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (BackendError, PipelineAborted) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
