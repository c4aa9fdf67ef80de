"""Core value types shared by every module: goals, plan steps, multimodal
plans, prompt templates, and the plan record text format.

Plan records are single-line JSON objects (JSON Lines) so runs stay diffable
and plans can be streamed. Images are stored as files and referenced by a
relative locator; resolving a locator against a root directory is the
caller's job.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class PlanMethod(str, Enum):
    TIP_PROCEDURE = "tip_procedure"
    TIP_STEPWISE = "tip_stepwise"
    BASELINE_NO_BRIDGE = "baseline_no_bridge"
    BASELINE_TEXT_REF = "baseline_text_ref"
    BASELINE_IMAGE_REF = "baseline_image_ref"
    ABLATION_NO_T2IB = "ablation_no_t2ib"
    ABLATION_NO_I2TB = "ablation_no_i2tb"


#: Methods that run the dual-bridge flow; their image-bearing steps must
#: record the imagination prompt the image was generated from.
TIP_METHODS = frozenset(
    {
        PlanMethod.TIP_PROCEDURE,
        PlanMethod.TIP_STEPWISE,
        PlanMethod.ABLATION_NO_T2IB,
        PlanMethod.ABLATION_NO_I2TB,
    }
)


class TemplateRole(str, Enum):
    VANILLA = "vanilla"
    T2I_BRIDGE = "t2i_bridge"
    I2T_BRIDGE = "i2t_bridge"


@dataclass(frozen=True)
class Goal:
    """A high-level task: an opaque id plus its natural-language title."""

    id: str
    title: str
    dataset: str = ""
    category: str | None = None

    def __post_init__(self) -> None:
        if not self.title.strip():
            raise ValueError("goal title must be non-empty")
        if not self.id:
            raise ValueError("goal id must be non-empty")


@dataclass(frozen=True)
class ImageHandle:
    """Reference to an image file by relative locator plus probed metadata."""

    locator: str
    width: int
    height: int
    format: str = "png"


@dataclass(frozen=True)
class PlanStep:
    """One step of a plan: text, optional paired image, and per-stage
    provenance (the imagination prompt the image came from, its caption)."""

    index: int
    text: str
    image: ImageHandle | None = None
    imagination_prompt: str | None = None
    caption: str | None = None


@dataclass(frozen=True)
class MultimodalPlan:
    goal: Goal
    method: PlanMethod
    steps: tuple[PlanStep, ...]
    vanilla_text: tuple[str, ...] = ()
    pairing_adjusted: bool = False
    backend_fingerprint: str = ""


@dataclass(frozen=True)
class ReferencePlan:
    """A gold plan from a corpus: per-step gold text and gold image."""

    goal: Goal
    steps: tuple[PlanStep, ...]


@dataclass(frozen=True)
class PromptTemplate:
    """A role-tagged trigger sentence. ``misleading`` marks the adversarial
    control templates used by the robustness harness."""

    id: str
    role: TemplateRole
    body: str
    misleading: bool = False

    def __post_init__(self) -> None:
        if not self.body.strip():
            raise ValueError("template body must be non-empty")


@dataclass(frozen=True)
class GenerationParams:
    """Decoding parameters; temperature 0 means greedy decoding."""

    temperature: float = 0.0
    max_tokens: int = 512
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


class PlanParseError(ValueError):
    """Raised when a plan record cannot be parsed; the message carries the
    offending position or field."""


def validate_plan(plan: MultimodalPlan) -> list[str]:
    """Check every plan invariant and return human-readable violations.

    Violations are data, not failures: an empty list means the plan is valid.
    """
    violations: list[str] = []
    if not plan.steps:
        violations.append("steps: plan has no steps (|steps| >= 1 required)")
    for pos, step in enumerate(plan.steps):
        expected = pos + 1
        if step.index != expected:
            violations.append(
                f"steps[{pos}].index: non-contiguous step indices "
                f"(expected {expected}, got {step.index})"
            )
        if not step.text.strip():
            violations.append(f"steps[{pos}].text: empty step text")
        if step.image is not None:
            if step.image.width < 1 or step.image.height < 1:
                violations.append(
                    f"steps[{pos}].image: non-positive dimensions "
                    f"{step.image.width}x{step.image.height}"
                )
            if plan.method in TIP_METHODS and step.imagination_prompt is None:
                violations.append(
                    f"missing imagination_prompt at step {step.index}"
                )
    return violations


def _image_to_obj(image: ImageHandle | None) -> dict[str, Any] | None:
    if image is None:
        return None
    return {
        "locator": image.locator,
        "width": image.width,
        "height": image.height,
        "format": image.format,
    }


def serialize_plan(plan: MultimodalPlan) -> str:
    """Encode a plan as one canonical JSON line (sorted keys, no spaces)."""
    record = {
        "goal": {
            "id": plan.goal.id,
            "title": plan.goal.title,
            "dataset": plan.goal.dataset,
            "category": plan.goal.category,
        },
        "method": plan.method.value,
        "vanilla_text": list(plan.vanilla_text),
        "steps": [
            {
                "index": step.index,
                "text": step.text,
                "image": _image_to_obj(step.image),
                "imagination_prompt": step.imagination_prompt,
                "caption": step.caption,
            }
            for step in plan.steps
        ],
        "pairing_adjusted": plan.pairing_adjusted,
        "backend_fingerprint": plan.backend_fingerprint,
    }
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _require(obj: dict[str, Any], key: str, where: str) -> Any:
    if key not in obj:
        raise PlanParseError(f"{where}: missing field '{key}'")
    return obj[key]


def _parse_image(obj: Any, where: str) -> ImageHandle | None:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise PlanParseError(f"{where}: image must be an object or null")
    return ImageHandle(
        locator=_require(obj, "locator", where),
        width=int(_require(obj, "width", where)),
        height=int(_require(obj, "height", where)),
        format=_require(obj, "format", where),
    )


def parse_plan(text: str) -> MultimodalPlan:
    """Parse a plan record produced by :func:`serialize_plan`.

    Raises :class:`PlanParseError` with a position or field annotation on any
    malformed input; unknown method tags are rejected.
    """
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlanParseError(
            f"invalid plan record at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(record, dict):
        raise PlanParseError("plan record must be a JSON object")

    goal_obj = _require(record, "goal", "record")
    goal = Goal(
        id=str(_require(goal_obj, "id", "goal")),
        title=str(_require(goal_obj, "title", "goal")),
        dataset=str(_require(goal_obj, "dataset", "goal")),
        category=goal_obj.get("category"),
    )

    method_tag = _require(record, "method", "record")
    try:
        method = PlanMethod(method_tag)
    except ValueError:
        raise PlanParseError(f"unknown method '{method_tag}'") from None

    steps = []
    for pos, obj in enumerate(_require(record, "steps", "record")):
        where = f"steps[{pos}]"
        steps.append(
            PlanStep(
                index=int(_require(obj, "index", where)),
                text=str(_require(obj, "text", where)),
                image=_parse_image(_require(obj, "image", where), where),
                imagination_prompt=_require(obj, "imagination_prompt", where),
                caption=_require(obj, "caption", where),
            )
        )

    return MultimodalPlan(
        goal=goal,
        method=method,
        steps=tuple(steps),
        vanilla_text=tuple(str(t) for t in _require(record, "vanilla_text", "record")),
        pairing_adjusted=bool(_require(record, "pairing_adjusted", "record")),
        backend_fingerprint=str(_require(record, "backend_fingerprint", "record")),
    )
