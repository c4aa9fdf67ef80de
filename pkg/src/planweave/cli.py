"""The ``plan`` command line entry point."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .corpus import ValidationRules, corpus_stats, load_corpus, write_rejects_report
from .gallery import export_gallery
from .runner import ConfigError, ExperimentConfig, run_ablation, run_experiment, run_template_robustness


def _add_global_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument(
        "--cache-mode",
        choices=["off", "record", "replay", "strict-replay"],
        default=None,
        help="override the backend cache mode",
    )
    parser.add_argument(
        "--workers", type=int, default=None, help="override the task worker bound"
    )


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.cache_mode is not None:
        overrides["cache_mode"] = args.cache_mode
    if args.workers is not None:
        overrides["workers"] = args.workers
    return replace(config, **overrides) if overrides else config


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args)
    report = run_experiment(config)
    total = sum(row.n_plans for rows in report.per_dataset.values() for row in rows)
    print(f"scored {total} plans across {len(report.per_dataset)} dataset(s)")
    if report.failures:
        print(f"failed tasks: {len(report.failures)}")
        for failure in report.failures:
            print(f"  - {failure}")
    print(f"report: {Path(config.out_dir) / 'report.md'}")
    return 0


def _cmd_robustness(args: argparse.Namespace) -> int:
    config = _load_config(args)
    report = run_template_robustness(config, template_ids=args.templates or None)
    for role, template_id in sorted(report.selected.items()):
        print(f"selected {role}: {template_id}")
    print(f"report: {Path(config.out_dir) / 'robustness.md'}")
    return 0


def _cmd_ablate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    report = run_ablation(config)
    print(f"ablation rows: {sum(len(rows) for rows in report.per_dataset.values())}")
    print(f"report: {Path(config.out_dir) / 'ablation.md'}")
    return 0


def _cmd_gallery(args: argparse.Namespace) -> int:
    result = export_gallery(args.input, args.output)
    print(f"wrote {len(result.pages)} page(s) to {args.output}")
    if result.warnings:
        print(f"warnings: {len(result.warnings)}")
        for warning in sorted(set(result.warnings)):
            print(f"  - {warning}")
    return 0


def _cmd_validate_corpus(args: argparse.Namespace) -> int:
    rules = ValidationRules(
        min_steps=args.min_steps,
        max_steps=args.max_steps,
        min_image_dim=args.min_image_dim,
    )
    manifest = load_corpus(args.path, rules=rules)
    rejected = {r.example_id for r in manifest.rejections}
    print(f"accepted: {manifest.accepted_count}  rejected: {len(rejected)}")
    report = write_rejects_report(manifest)
    if manifest.rejections:
        print(f"rejection report: {report}")
        for rejection in manifest.rejections:
            print(f"  - {rejection.example_id}: {rejection.detail}")
    return 0 if not manifest.rejections else 1


def _cmd_stats(args: argparse.Namespace) -> int:
    manifest = load_corpus(args.path)
    stats = corpus_stats(manifest)
    print(f"dataset: {manifest.dataset}")
    print(f"accepted examples: {stats.accepted}")
    print(f"avg steps: {stats.avg_steps:.2f}")
    print("step histogram:")
    for count, frequency in stats.step_histogram.items():
        print(f"  {count:>3} steps: {frequency}")
    print("categories:")
    for category, frequency in stats.category_counts.items():
        print(f"  {category}: {frequency}")
    return 0


def _cmd_rate_serve(args: argparse.Namespace) -> int:
    from .rater import serve

    serve(
        args.data_dir,
        host=args.host,
        port=args.port,
        plans_dir=args.plans,
        ui_dir=args.ui,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plan",
        description="Multimodal procedural planning: generation, evaluation, rating.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="run methods over sampled tasks and score them")
    run_parser.add_argument("-c", "--config", required=True)
    _add_global_flags(run_parser)
    run_parser.set_defaults(fn=_cmd_run)

    rob_parser = sub.add_parser("robustness", help="sweep bridge templates by alignment")
    rob_parser.add_argument("-c", "--config", required=True)
    rob_parser.add_argument(
        "--templates", nargs="*", help="restrict the sweep to these template ids"
    )
    _add_global_flags(rob_parser)
    rob_parser.set_defaults(fn=_cmd_robustness)

    abl_parser = sub.add_parser("ablate", help="contrast bridge ablations")
    abl_parser.add_argument("-c", "--config", required=True)
    _add_global_flags(abl_parser)
    abl_parser.set_defaults(fn=_cmd_ablate)

    gal_parser = sub.add_parser("gallery", help="export browsable plan pages")
    gal_parser.add_argument("-i", "--input", required=True, help="plans directory")
    gal_parser.add_argument("-o", "--output", required=True, help="site directory")
    gal_parser.set_defaults(fn=_cmd_gallery)

    val_parser = sub.add_parser("validate-corpus", help="validate a corpus file")
    val_parser.add_argument("path")
    val_parser.add_argument("--min-steps", type=int, default=3)
    val_parser.add_argument("--max-steps", type=int, default=22)
    val_parser.add_argument("--min-image-dim", type=int, default=400)
    val_parser.set_defaults(fn=_cmd_validate_corpus)

    stats_parser = sub.add_parser("stats", help="corpus statistics")
    stats_parser.add_argument("path")
    stats_parser.set_defaults(fn=_cmd_stats)

    serve_parser = sub.add_parser("rate-serve", help="start the pairwise rating service")
    serve_parser.add_argument("--data-dir", required=True)
    serve_parser.add_argument("--host", default="127.0.0.1")
    serve_parser.add_argument("--port", type=int, default=8008)
    serve_parser.add_argument("--plans", default=None, help="plan output directory to serve images from")
    serve_parser.add_argument("--ui", default=None, help="static rater UI bundle to serve")
    serve_parser.set_defaults(fn=_cmd_rate_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
