"""Ingestion, validation, and sampling of multimodal procedure corpora.

A corpus file is one JSON array of examples::

    [{"id": ..., "title": ..., "category": ..., "topic": ...,
      "steps": [{"text": ..., "image": "assets/xyz.png"}, ...]}, ...]

Image paths are relative to the corpus file's directory. Validation is total:
every example is either accepted or rejected with at least one reason, and
the counts always sum to the input size.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from PIL import Image

from .backends import ImageStore
from .model import Goal, ImageHandle, PlanStep, ReferencePlan


class CorpusSchemaError(ValueError):
    """The corpus file does not match the documented schema; the message
    carries the offending location."""


@dataclass(frozen=True)
class ValidationRules:
    min_steps: int = 3
    max_steps: int = 22
    min_image_dim: int = 400

    def __post_init__(self) -> None:
        if not (1 <= self.min_steps <= self.max_steps):
            raise ValueError("rules require 1 <= min_steps <= max_steps")


@dataclass(frozen=True)
class Rejection:
    example_id: str
    rule: str
    detail: str


@dataclass
class CorpusManifest:
    dataset: str
    root: Path
    examples: list[ReferencePlan]
    rejections: list[Rejection]
    provenance: str = ""

    @property
    def accepted_count(self) -> int:
        return len(self.examples)

    def reference_for(self, goal_id: str) -> ReferencePlan:
        for example in self.examples:
            if example.goal.id == goal_id:
                return example
        raise KeyError(f"no accepted example with id '{goal_id}'")


def _require(obj: dict[str, Any], key: str, where: str) -> Any:
    if key not in obj:
        raise CorpusSchemaError(f"{where}: missing field '{key}'")
    return obj[key]


def _probe_image(path: Path) -> tuple[int, int, str]:
    with Image.open(path) as im:
        width, height = im.size
        fmt = (im.format or "png").lower()
    return width, height, fmt


def load_corpus(
    path: str | Path,
    rules: ValidationRules | None = None,
    dataset: str | None = None,
) -> CorpusManifest:
    """Load and validate a corpus file.

    Schema violations fail loudly with their location; per-example rule
    violations land in the manifest's rejection list instead.
    """
    rules = rules or ValidationRules()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    dataset = dataset or path.stem
    root = path.parent

    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusSchemaError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(raw, list):
        raise CorpusSchemaError(f"{path}: top level must be an array of examples")

    accepted: list[ReferencePlan] = []
    rejections: list[Rejection] = []
    seen_ids: set[str] = set()
    for pos, obj in enumerate(raw):
        where = f"examples[{pos}]"
        if not isinstance(obj, dict):
            raise CorpusSchemaError(f"{where}: example must be an object")
        example_id = str(_require(obj, "id", where))
        title = str(_require(obj, "title", where))
        steps_raw = _require(obj, "steps", where)
        if not isinstance(steps_raw, list):
            raise CorpusSchemaError(f"{where}.steps: must be an array")

        reasons: list[Rejection] = []
        if example_id in seen_ids:
            reasons.append(Rejection(example_id, "unique-id", f"duplicate id '{example_id}'"))
        seen_ids.add(example_id)
        if not title.strip():
            reasons.append(Rejection(example_id, "title", "empty title"))

        count = len(steps_raw)
        if count < rules.min_steps:
            reasons.append(
                Rejection(example_id, "step-count", f"step count {count} < {rules.min_steps}")
            )
        elif count > rules.max_steps:
            reasons.append(
                Rejection(example_id, "step-count", f"step count {count} > {rules.max_steps}")
            )

        steps: list[PlanStep] = []
        for step_pos, step_obj in enumerate(steps_raw):
            step_where = f"{where}.steps[{step_pos}]"
            if not isinstance(step_obj, dict):
                raise CorpusSchemaError(f"{step_where}: step must be an object")
            text = str(_require(step_obj, "text", step_where))
            locator = _require(step_obj, "image", step_where)
            handle = None
            if locator is not None:
                image_path = root / str(locator)
                if not image_path.exists():
                    reasons.append(
                        Rejection(example_id, "image-missing", f"image not found: {locator}")
                    )
                else:
                    try:
                        width, height, fmt = _probe_image(image_path)
                    except Exception as exc:
                        reasons.append(
                            Rejection(
                                example_id, "image-decode", f"{locator} does not decode: {exc}"
                            )
                        )
                    else:
                        dim = min(width, height)
                        if dim < rules.min_image_dim:
                            reasons.append(
                                Rejection(
                                    example_id,
                                    "image-dim",
                                    f"image dim {dim} < {rules.min_image_dim} ({locator})",
                                )
                            )
                        handle = ImageHandle(str(locator), width, height, fmt)
            if not text.strip():
                reasons.append(
                    Rejection(example_id, "step-text", f"empty text at step {step_pos + 1}")
                )
            steps.append(PlanStep(index=step_pos + 1, text=text, image=handle))

        if reasons:
            rejections.extend(reasons)
            continue
        goal = Goal(
            id=example_id,
            title=title,
            dataset=dataset,
            category=obj.get("category"),
        )
        accepted.append(ReferencePlan(goal=goal, steps=tuple(steps)))

    return CorpusManifest(
        dataset=dataset,
        root=root,
        examples=accepted,
        rejections=rejections,
        provenance=str(path),
    )


def write_rejects_report(manifest: CorpusManifest, path: str | Path | None = None) -> Path:
    """Write one line per rejection (id, rule, detail) next to the corpus
    file by default."""
    if path is None:
        path = manifest.root / "rejects.txt"
    path = Path(path)
    lines = [f"{r.example_id}\t{r.rule}\t{r.detail}" for r in manifest.rejections]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path


def sample_tasks(
    manifest: CorpusManifest,
    n: int,
    seed: int,
    balance_categories: bool = False,
) -> list[Goal]:
    """Sample ``n`` distinct goals uniformly without replacement.

    Deterministic for a fixed (accepted ids, n, seed); the optional category
    balancing draws as evenly as possible across categories.
    """
    goals = sorted((e.goal for e in manifest.examples), key=lambda g: g.id)
    if n > len(goals):
        raise ValueError(f"cannot sample {n} tasks from {len(goals)} accepted examples")
    rng = random.Random(seed)
    if not balance_categories:
        return rng.sample(goals, n)

    by_category: dict[str, list[Goal]] = {}
    for goal in goals:
        by_category.setdefault(goal.category or "", []).append(goal)
    for bucket in by_category.values():
        rng.shuffle(bucket)
    picked: list[Goal] = []
    categories = sorted(by_category)
    while len(picked) < n:
        progressed = False
        for cat in categories:
            if by_category[cat] and len(picked) < n:
                picked.append(by_category[cat].pop())
                progressed = True
        if not progressed:
            break
    return picked


@dataclass(frozen=True)
class CorpusStats:
    avg_steps: float
    step_histogram: dict[int, int]
    category_counts: dict[str, int]
    accepted: int
    rejected: int


def corpus_stats(manifest: CorpusManifest) -> CorpusStats:
    if not manifest.examples:
        raise ValueError("corpus has no accepted examples")
    counts = [len(e.steps) for e in manifest.examples]
    histogram: dict[int, int] = {}
    for c in counts:
        histogram[c] = histogram.get(c, 0) + 1
    categories: dict[str, int] = {}
    for e in manifest.examples:
        key = e.goal.category or "(none)"
        categories[key] = categories.get(key, 0) + 1
    rejected_ids = {r.example_id for r in manifest.rejections}
    return CorpusStats(
        avg_steps=round(sum(counts) / len(counts), 2),
        step_histogram=dict(sorted(histogram.items())),
        category_counts=dict(sorted(categories.items())),
        accepted=len(manifest.examples),
        rejected=len(rejected_ids),
    )


def import_reference_image(
    manifest: CorpusManifest, handle: ImageHandle, store: ImageStore
) -> ImageHandle:
    """Copy a corpus image into a run's content-addressed store so emitted
    plans stay self-contained under the run directory."""
    data = (manifest.root / handle.locator).read_bytes()
    return store.put(data, handle.format)


def import_reference_plan(
    manifest: CorpusManifest, reference: ReferencePlan, store: ImageStore
) -> ReferencePlan:
    """Reference plan with all images re-homed into ``store``."""
    steps = tuple(
        PlanStep(
            index=step.index,
            text=step.text,
            image=import_reference_image(manifest, step.image, store)
            if step.image is not None
            else None,
        )
        for step in reference.steps
    )
    return ReferencePlan(goal=reference.goal, steps=steps)
