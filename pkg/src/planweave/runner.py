"""Experiment orchestration: run methods over sampled tasks, score the plans,
sweep bridge templates for robustness, contrast ablations, and leave
resumable artifacts on disk.

Run layout under ``out_dir``::

    assets/                          content-addressed images
    cache/                           replay cache (when enabled)
    {dataset}/{goal_id}/{method}.plan one-line plan records
    metrics.jsonl                    per-plan metric reports
    report.csv / report.md           aggregate score table
    figures/*.png                    rendered charts
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .backends import (
    BackendSuite,
    ChatCompletionsBackend,
    EmbedSpace,
    ImageStore,
    MockCaptionBackend,
    MockEmbeddingBackend,
    MockImageBackend,
    MockTextBackend,
    RestCaptionBackend,
    RestEmbedBackend,
    RestImageBackend,
    resolve_cache_mode,
    wrap_with_replay,
)
from .corpus import (
    CorpusManifest,
    import_reference_image,
    import_reference_plan,
    load_corpus,
    sample_tasks,
)
from .metrics import (
    AlignmentSample,
    MetricReport,
    composite_scores,
    frechet_distance,
    meteor,
    moments_from_features,
    plan_clip_score,
    plan_text,
    rouge_l,
    sbert_similarity,
    select_best_template,
    template_alignment,
    tokenize,
    wmd,
    wmd_similarity,
)
from .model import (
    GenerationParams,
    Goal,
    MultimodalPlan,
    PlanMethod,
    ReferencePlan,
    TemplateRole,
    parse_plan,
    serialize_plan,
)
from .pipeline import PipelineConfig, run_method
from .reporting import (
    AblationReport,
    ComparisonReport,
    MethodRow,
    RobustnessReport,
    RobustnessRow,
    render_ablation_figure,
    render_robustness_figure,
    render_scores_figure,
    write_ablation_csv,
    write_ablation_markdown,
    write_robustness_csv,
    write_robustness_markdown,
    write_scores_csv,
    write_scores_markdown,
)
from .templates import REFERENCE_ALIGNMENT, default_templates, get_template

logger = logging.getLogger(__name__)

ALL_METRICS = (
    "wmd",
    "sbert",
    "rouge_l",
    "meteor",
    "fid",
    "clip",
    "composite",
)

ABLATION_METHODS = [
    PlanMethod.TIP_PROCEDURE,
    PlanMethod.ABLATION_NO_T2IB,
    PlanMethod.ABLATION_NO_I2TB,
    PlanMethod.TIP_STEPWISE,
]


class ConfigError(ValueError):
    """The experiment configuration is invalid; fail fast."""


@dataclass
class ExperimentConfig:
    corpus: list[str]
    out_dir: str
    methods: list[PlanMethod]
    sample_size: int = 4
    seed: int = 0
    backends: dict[str, Any] = field(default_factory=lambda: {"kind": "mock", "seed": 0})
    cache_mode: str | None = None
    cache_dir: str | None = None
    templates: dict[str, str] = field(default_factory=dict)
    metrics: dict[str, bool] = field(default_factory=dict)
    workers: int = 4
    image_size: tuple[int, int] = (512, 512)
    params: GenerationParams = field(default_factory=GenerationParams)
    max_steps: int = 22
    wmd_budget: int = 200
    wmd_missing: str = "error"

    def __post_init__(self) -> None:
        if isinstance(self.corpus, str):
            self.corpus = [self.corpus]
        if not self.corpus:
            raise ConfigError("config needs at least one corpus path")
        if not self.methods:
            raise ConfigError("config needs at least one method")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for role_value, template_id in self.templates.items():
            role = TemplateRole(role_value)
            template = get_template(template_id)
            if template.role != role:
                raise ConfigError(
                    f"template '{template_id}' has role {template.role.value}, "
                    f"configured for {role.value}"
                )
        for name in self.metrics:
            if name not in ALL_METRICS:
                raise ConfigError(f"unknown metric toggle '{name}'")

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ExperimentConfig":
        data = dict(raw)
        if "methods" in data:
            try:
                data["methods"] = [PlanMethod(m) for m in data["methods"]]
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if "params" in data and isinstance(data["params"], dict):
            data["params"] = GenerationParams(**data["params"])
        if "image_size" in data:
            width, height = data["image_size"]
            data["image_size"] = (int(width), int(height))
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        missing = {"corpus", "out_dir", "methods"} - set(data)
        if missing:
            raise ConfigError(f"missing config fields: {sorted(missing)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config file must hold a mapping")
        return cls.from_dict(raw)

    def metric_enabled(self, name: str) -> bool:
        return self.metrics.get(name, True)

    def resolved_templates(self) -> dict[TemplateRole, Any]:
        resolved = default_templates()
        for role_value, template_id in self.templates.items():
            resolved[TemplateRole(role_value)] = get_template(template_id)
        return resolved


def build_suite(config: ExperimentConfig) -> BackendSuite:
    """Assemble the backend suite described by the config, behind the replay
    cache when a cache mode is active."""
    spec = config.backends
    kind = spec.get("kind", "mock")
    if kind == "mock":
        seed = int(spec.get("seed", config.seed))
        text = MockTextBackend(seed=seed)
        image = MockImageBackend(seed=seed)
        captioner = MockCaptionBackend(seed=seed)
        embedder = MockEmbeddingBackend(seed=seed)
    elif kind == "remote":
        import os

        api_key = None
        if spec.get("api_key_env"):
            api_key = os.environ.get(spec["api_key_env"])
        min_interval = float(spec.get("min_interval", 0.0))
        text = ChatCompletionsBackend(
            spec["text_endpoint"], spec.get("model", "default"), api_key,
            min_interval=min_interval,
        )
        image = RestImageBackend(spec["image_endpoint"], api_key, min_interval=min_interval)
        captioner = RestCaptionBackend(
            spec["caption_endpoint"], api_key, min_interval=min_interval
        )
        embedder = RestEmbedBackend(spec["embed_endpoint"], api_key, min_interval=min_interval)
    else:
        raise ConfigError(f"unknown backend kind '{kind}'")

    mode = resolve_cache_mode(config.cache_mode)
    if mode != "off":
        cache_dir = Path(config.cache_dir or Path(config.out_dir) / "cache")
        text = wrap_with_replay(text, cache_dir, mode)
        image = wrap_with_replay(image, cache_dir, mode)
        captioner = wrap_with_replay(captioner, cache_dir, mode)
        embedder = wrap_with_replay(embedder, cache_dir, mode)
    return BackendSuite(text, image, captioner, embedder, ImageStore(config.out_dir))


def plan_record_path(out_dir: str | Path, plan_goal: Goal, method: PlanMethod) -> Path:
    return Path(out_dir) / plan_goal.dataset / plan_goal.id / f"{method.value}.plan"


def _ensure_plan(
    manifest: CorpusManifest,
    goal: Goal,
    method: PlanMethod,
    suite: BackendSuite,
    config: ExperimentConfig,
) -> tuple[MultimodalPlan, bool]:
    """Load the plan record if it exists, else generate and persist it."""
    path = plan_record_path(config.out_dir, goal, method)
    if path.exists():
        return parse_plan(path.read_text(encoding="utf-8")), False
    reference = manifest.reference_for(goal.id)
    if method == PlanMethod.BASELINE_IMAGE_REF:
        reference = import_reference_plan(manifest, reference, suite.store)
    pipeline_config = PipelineConfig(
        templates=config.resolved_templates(),
        mode=method,
        image_size=config.image_size,
        params=config.params,
        max_steps=config.max_steps,
    )
    plan = run_method(goal, suite, pipeline_config, reference=reference)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_plan(plan) + "\n", encoding="utf-8")
    return plan, True


def compute_plan_metrics(
    plan: MultimodalPlan,
    reference: ReferencePlan,
    suite: BackendSuite,
    config: ExperimentConfig,
) -> tuple[MetricReport, dict[str, str]]:
    """Per-plan metric report; metrics that fail are None with a reason."""
    report = MetricReport()
    skipped: dict[str, str] = {}
    predicted_text = plan_text([s.text for s in plan.steps])
    reference_text = plan_text([s.text for s in reference.steps])
    predicted_tokens = tokenize(predicted_text)
    reference_tokens = tokenize(reference_text)

    def guard(name: str, fn) -> None:
        try:
            fn()
        except Exception as exc:  # per-metric isolation, never aborts the plan
            skipped[name] = str(exc)

    if config.metric_enabled("rouge_l"):
        guard("rouge_l", lambda: setattr(
            report, "rouge_l", rouge_l(predicted_tokens, reference_tokens).f
        ))
    if config.metric_enabled("meteor"):
        guard("meteor", lambda: setattr(
            report, "meteor", meteor(predicted_tokens, reference_tokens)
        ))
    if config.metric_enabled("wmd"):
        def compute_wmd() -> None:
            def embed_word(word: str):
                return suite.embed_text(word, EmbedSpace.WORD).values

            distance = wmd(
                predicted_tokens,
                reference_tokens,
                embed_word,
                budget=config.wmd_budget,
                missing=config.wmd_missing,
            )
            report.wmd_distance = distance
            report.wmd_similarity = wmd_similarity(distance)

        guard("wmd", compute_wmd)
    if config.metric_enabled("sbert"):
        guard("sbert", lambda: setattr(
            report,
            "sbert",
            sbert_similarity(
                predicted_text,
                reference_text,
                lambda t: suite.embed_text(t, EmbedSpace.SENTENCE).values,
            ),
        ))
    if config.metric_enabled("clip"):
        guard("clip", lambda: setattr(report, "clip", plan_clip_score(plan, suite)))
    if config.metric_enabled("composite"):
        def compute_composite() -> None:
            scores = composite_scores(plan, reference, suite)
            report.cap_s = scores["cap_s"]
            report.text_s = scores["text_s"]
            report.all_s = scores["all_s"]

        guard("composite", compute_composite)
    return report, skipped


def _corpus_fid(
    plans: list[MultimodalPlan],
    references: list[ReferencePlan],
    manifest: CorpusManifest,
    suite: BackendSuite,
) -> float | None:
    predicted_features = [
        suite.embed_image(step.image).values
        for plan in plans
        for step in plan.steps
        if step.image is not None
    ]
    reference_features = []
    for reference in references:
        for step in reference.steps:
            if step.image is None:
                continue
            handle = import_reference_image(manifest, step.image, suite.store)
            reference_features.append(suite.embed_image(handle).values)
    if len(predicted_features) < 2 or len(reference_features) < 2:
        return None
    return frechet_distance(
        moments_from_features(np.asarray(predicted_features)),
        moments_from_features(np.asarray(reference_features)),
    )


@dataclass
class TaskResult:
    dataset: str
    goal: Goal
    method: PlanMethod
    plan: MultimodalPlan
    metrics: MetricReport
    skipped: dict[str, str]


def run_experiment(
    config: ExperimentConfig,
    suite: BackendSuite | None = None,
    write_reports: bool = True,
) -> ComparisonReport:
    """Generate (or resume) every goal x method plan, score it, and write the
    aggregate report. Per-task failures are logged, counted, and skipped.

    ``write_reports=False`` keeps the scoring in memory (plan records are
    still written); the ablation sweep uses this so it never clobbers the
    report files of a plain run sharing the same output directory.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    suite = suite or build_suite(config)

    manifests = [load_corpus(path) for path in config.corpus]
    results: list[TaskResult] = []
    failures: list[str] = []

    for manifest in manifests:
        count = min(config.sample_size, manifest.accepted_count)
        goals = sample_tasks(manifest, count, config.seed)
        tasks = [(goal, method) for goal in goals for method in config.methods]

        def one(task: tuple[Goal, PlanMethod]) -> TaskResult | str:
            goal, method = task
            try:
                plan, _ = _ensure_plan(manifest, goal, method, suite, config)
                reference = manifest.reference_for(goal.id)
                metrics, skipped = compute_plan_metrics(plan, reference, suite, config)
                return TaskResult(manifest.dataset, goal, method, plan, metrics, skipped)
            except Exception as exc:
                message = f"{manifest.dataset}/{goal.id}/{method.value}: {exc}"
                logger.warning("task failed: %s", message)
                return message

        if config.workers > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                outcomes = list(pool.map(one, tasks))
        else:
            outcomes = [one(task) for task in tasks]
        for outcome in outcomes:
            if isinstance(outcome, str):
                failures.append(outcome)
            else:
                results.append(outcome)

    results.sort(key=lambda r: (r.dataset, r.goal.id, r.method.value))

    # corpus-level FID per (dataset, method)
    fid_values: dict[tuple[str, str], float | None] = {}
    if config.metric_enabled("fid"):
        by_group: dict[tuple[str, str], list[TaskResult]] = {}
        for result in results:
            by_group.setdefault((result.dataset, result.method.value), []).append(result)
        manifest_by_dataset = {m.dataset: m for m in manifests}
        for (dataset, method), group in sorted(by_group.items()):
            manifest = manifest_by_dataset[dataset]
            references = [manifest.reference_for(r.goal.id) for r in group]
            fid_values[(dataset, method)] = _corpus_fid(
                [r.plan for r in group], references, manifest, suite
            )

    report = _aggregate(config, results, fid_values, suite.fingerprint(), failures)
    if write_reports:
        _write_metrics_jsonl(out_dir / "metrics.jsonl", results)
        write_scores_csv(report, out_dir / "report.csv")
        write_scores_markdown(report, out_dir / "report.md")
        (out_dir / "figures").mkdir(exist_ok=True)
        render_scores_figure(report, out_dir / "figures" / "scores.png")
    return report


def _write_metrics_jsonl(path: Path, results: list[TaskResult]) -> None:
    lines = []
    for result in results:
        record = {
            "dataset": result.dataset,
            "goal_id": result.goal.id,
            "method": result.method.value,
            "n_steps": len(result.plan.steps),
            "pairing_adjusted": result.plan.pairing_adjusted,
            **result.metrics.to_dict(),
        }
        if result.skipped:
            record["skipped"] = dict(sorted(result.skipped.items()))
        lines.append(json.dumps(record, sort_keys=True, ensure_ascii=False))
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


_ROW_METRICS = (
    "wmd_distance",
    "wmd_similarity",
    "sbert",
    "rouge_l",
    "meteor",
    "clip",
    "cap_s",
    "text_s",
    "all_s",
)


def _aggregate(
    config: ExperimentConfig,
    results: list[TaskResult],
    fid_values: dict[tuple[str, str], float | None],
    fingerprint: str,
    failures: list[str],
) -> ComparisonReport:
    per_dataset: dict[str, list[MethodRow]] = {}
    datasets = sorted({r.dataset for r in results})
    for dataset in datasets:
        rows: list[MethodRow] = []
        for method in config.methods:
            group = [
                r for r in results if r.dataset == dataset and r.method == method
            ]
            means: dict[str, float | None] = {}
            excluded: dict[str, int] = {}
            for metric in _ROW_METRICS:
                values = [
                    getattr(r.metrics, metric)
                    for r in group
                    if getattr(r.metrics, metric) is not None
                ]
                means[metric] = sum(values) / len(values) if values else None
                excluded[metric] = len(group) - len(values)
            means["fid"] = fid_values.get((dataset, method.value))
            rows.append(
                MethodRow(
                    method=method.value,
                    n_plans=len(group),
                    avg_steps=(
                        sum(len(r.plan.steps) for r in group) / len(group)
                        if group
                        else None
                    ),
                    means=means,
                    excluded={k: v for k, v in excluded.items() if v},
                )
            )
        per_dataset[dataset] = rows
    return ComparisonReport(
        per_dataset=per_dataset, fingerprint=fingerprint, failures=failures
    )


def run_template_robustness(
    config: ExperimentConfig,
    template_ids: list[str] | None = None,
    suite: BackendSuite | None = None,
) -> RobustnessReport:
    """Score every candidate bridge template on sampled reference steps and
    pick the argmax of the across-dataset average per role."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    suite = suite or build_suite(config)
    manifests = [load_corpus(path) for path in config.corpus]

    from .templates import TEMPLATES

    candidates = [
        TEMPLATES[tid] for tid in (template_ids or sorted(TEMPLATES))
        if TEMPLATES[tid].role in (TemplateRole.T2I_BRIDGE, TemplateRole.I2T_BRIDGE)
    ]
    by_role: dict[TemplateRole, list] = {}
    for template in candidates:
        by_role.setdefault(template.role, []).append(template)
    for role, group in by_role.items():
        if len(group) < 2:
            raise ConfigError(
                f"robustness sweep needs >= 2 candidate templates for {role.value}"
            )

    samples_per_dataset: dict[str, list[AlignmentSample]] = {}
    for manifest in manifests:
        count = min(config.sample_size, manifest.accepted_count)
        goals = sample_tasks(manifest, count, config.seed)
        samples = []
        for goal in goals:
            reference = manifest.reference_for(goal.id)
            step = reference.steps[0]
            image = (
                import_reference_image(manifest, step.image, suite.store)
                if step.image is not None
                else None
            )
            samples.append(AlignmentSample(step_text=step.text, image=image))
        if not samples:
            raise ConfigError(f"no alignment samples from corpus {manifest.dataset}")
        samples_per_dataset[manifest.dataset] = samples

    pipeline_config = PipelineConfig(
        templates=config.resolved_templates(),
        mode=PlanMethod.TIP_PROCEDURE,
        image_size=config.image_size,
        params=config.params,
    )

    rows: list[RobustnessRow] = []
    for role in (TemplateRole.T2I_BRIDGE, TemplateRole.I2T_BRIDGE):
        group = by_role.get(role, [])
        averages: dict[str, float] = {}
        role_rows: list[RobustnessRow] = []
        for template in sorted(group, key=lambda t: t.id):
            alignment = {
                dataset: template_alignment(template, samples, suite, pipeline_config)
                for dataset, samples in sorted(samples_per_dataset.items())
            }
            average = sum(alignment.values()) / len(alignment)
            averages[template.id] = average
            role_rows.append(
                RobustnessRow(
                    template_id=template.id,
                    role=role.value,
                    body=template.body,
                    misleading=template.misleading,
                    alignment=alignment,
                    average=average,
                    reference=REFERENCE_ALIGNMENT.get(template.id),
                )
            )
        winner = select_best_template(averages)
        for row in role_rows:
            row.selected = row.template_id == winner
        role_rows.sort(key=lambda r: (-r.average, r.template_id))
        rows.extend(role_rows)

    report = RobustnessReport(
        rows=rows,
        selected={
            role.value: next(
                r.template_id for r in rows if r.role == role.value and r.selected
            )
            for role in (TemplateRole.T2I_BRIDGE, TemplateRole.I2T_BRIDGE)
            if any(r.role == role.value for r in rows)
        },
    )
    write_robustness_csv(report, out_dir / "robustness.csv")
    write_robustness_markdown(report, out_dir / "robustness.md")
    (out_dir / "figures").mkdir(exist_ok=True)
    render_robustness_figure(report, out_dir / "figures" / "robustness.png")
    return report


def run_ablation(
    config: ExperimentConfig, suite: BackendSuite | None = None
) -> AblationReport:
    """Contrast the full dual-bridge flow against single-bridge ablations and
    the stepwise variant, with per-metric percentage deltas."""
    if PlanMethod.TIP_PROCEDURE not in config.methods:
        raise ConfigError("ablation requires tip_procedure among the methods")
    ablation_config = replace(config, methods=list(ABLATION_METHODS))
    scores = run_experiment(ablation_config, suite=suite, write_reports=False)
    report = AblationReport(
        base_method=PlanMethod.TIP_PROCEDURE.value,
        per_dataset=scores.per_dataset,
        fingerprint=scores.fingerprint,
    )
    out_dir = Path(config.out_dir)
    write_ablation_csv(report, out_dir / "ablation.csv")
    write_ablation_markdown(report, out_dir / "ablation.md")
    (out_dir / "figures").mkdir(exist_ok=True)
    render_ablation_figure(report, out_dir / "figures" / "ablation.png")
    return report
