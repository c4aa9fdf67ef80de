"""Prompt assembly for the three template roles, LLM-output parsing, and the
plan generation flows: the full dual-bridge procedure, the stepwise variant,
and the baseline/ablation modes.

Prompt assembly uses newline joins throughout; the exact bytes are pinned by
golden fixture files in the test suite.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, TypeVar

from .backends import BackendError, BackendSuite
from .model import (
    GenerationParams,
    Goal,
    ImageHandle,
    MultimodalPlan,
    PlanMethod,
    PlanStep,
    PromptTemplate,
    ReferencePlan,
    TemplateRole,
    validate_plan,
)
from .templates import (
    CAPTION_QUESTION,
    STEPWISE_HISTORY_HEADER,
    STEPWISE_STOP_MARKER,
    default_templates,
    stepwise_instruction,
)

T = TypeVar("T")


class UnparseablePlan(RuntimeError):
    """The LLM output contained no parseable steps; carries the raw text."""

    def __init__(self, message: str, raw: str) -> None:
        super().__init__(message)
        self.raw = raw


class StepError(RuntimeError):
    """A backend failure annotated with the 1-based step it occurred at."""

    def __init__(self, step: int, cause: Exception) -> None:
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause


class PipelineError(RuntimeError):
    """An emitted plan failed its own invariants (a bug, not bad input)."""


@dataclass(frozen=True)
class RenderedPrompt:
    role: TemplateRole
    text: str
    slots: Mapping[str, str]


@dataclass
class PipelineConfig:
    """Everything a single plan generation needs besides the goal."""

    templates: Mapping[TemplateRole, PromptTemplate] = field(default_factory=default_templates)
    mode: PlanMethod = PlanMethod.TIP_PROCEDURE
    image_size: tuple[int, int] = (512, 512)
    params: GenerationParams = field(default_factory=GenerationParams)
    max_steps: int = 22
    step_workers: int = 1

    def __post_init__(self) -> None:
        needed = {TemplateRole.VANILLA}
        if self.mode in (
            PlanMethod.TIP_PROCEDURE,
            PlanMethod.TIP_STEPWISE,
            PlanMethod.ABLATION_NO_T2IB,
            PlanMethod.ABLATION_NO_I2TB,
        ):
            needed = set(TemplateRole)
        missing = [role.value for role in needed if role not in self.templates]
        if missing:
            raise ValueError(f"missing templates for roles: {', '.join(missing)}")
        for role, template in self.templates.items():
            if template.role != role:
                raise ValueError(
                    f"template '{template.id}' has role {template.role.value}, "
                    f"registered under {role.value}"
                )


def render_vanilla_prompt(goal: Goal, template: PromptTemplate) -> RenderedPrompt:
    """Assemble the task prompt: trigger sentence, then ``Task: <title>?``."""
    if template.role != TemplateRole.VANILLA:
        raise ValueError(f"template '{template.id}' is not a vanilla template")
    if not goal.title.strip():
        raise ValueError("goal title must be non-empty")
    text = f"{template.body}\nTask: {goal.title}?"
    return RenderedPrompt(
        role=TemplateRole.VANILLA,
        text=text,
        slots={"TEMPLATE": template.body, "GOAL": goal.title},
    )


_STEP_PREFIX = re.compile(r"^\s*(?:[Ss]tep\s+(\d+)\s*[:.]|(\d+)\.)\s*(.*)$")


def parse_step_list(completion_text: str) -> list[str]:
    """Extract ordered step texts from an LLM completion.

    Accepts ``Step k:`` and ``k.`` prefixes; a prefixed line starts a step and
    unprefixed non-empty lines continue the current one. Preamble lines before
    the first step are dropped. Raises :class:`UnparseablePlan` when nothing
    parses.
    """
    steps: list[str] = []
    for line in completion_text.splitlines():
        if not line.strip():
            continue
        match = _STEP_PREFIX.match(line)
        if match:
            body = match.group(3).strip()
            steps.append(body)
        elif steps:
            steps[-1] = f"{steps[-1]} {line.strip()}".strip()
    steps = [s for s in steps if s]
    if not steps:
        raise UnparseablePlan("no parseable steps in completion", raw=completion_text)
    return steps


def render_imagination_prompt(step_text: str, template: PromptTemplate) -> RenderedPrompt:
    """Assemble the scene-description prompt: the step, then the trigger."""
    if template.role != TemplateRole.T2I_BRIDGE:
        raise ValueError(f"template '{template.id}' is not a t2i_bridge template")
    if not step_text.strip():
        raise ValueError("step text must be non-empty")
    text = f"{step_text}\n{template.body}"
    return RenderedPrompt(
        role=TemplateRole.T2I_BRIDGE,
        text=text,
        slots={"STEP": step_text, "T2I-B": template.body},
    )


def _numbered(lines: Sequence[str]) -> str:
    return "\n".join(f"Step {i + 1}: {line}" for i, line in enumerate(lines))


def render_revision_prompt(
    initial_steps: Sequence[str],
    captions: Sequence[str],
    template: PromptTemplate,
) -> RenderedPrompt:
    """Assemble the revision prompt: numbered steps, numbered captions, trigger."""
    if template.role != TemplateRole.I2T_BRIDGE:
        raise ValueError(f"template '{template.id}' is not an i2t_bridge template")
    if len(initial_steps) != len(captions):
        raise ValueError(
            f"step/caption arity mismatch: {len(initial_steps)} steps vs "
            f"{len(captions)} captions"
        )
    if not initial_steps:
        raise ValueError("revision prompt needs at least one step")
    text = (
        "Step-by-step Procedure:\n"
        f"{_numbered(initial_steps)}\n"
        "Captions:\n"
        f"{_numbered(captions)}\n"
        f"{template.body}"
    )
    return RenderedPrompt(
        role=TemplateRole.I2T_BRIDGE,
        text=text,
        slots={
            "INITIAL": _numbered(initial_steps),
            "CAPTION": _numbered(captions),
            "I2T-B": template.body,
        },
    )


def build_stepwise_prompt(
    goal: Goal, template: PromptTemplate, history: Sequence[str]
) -> RenderedPrompt:
    """Assemble the iterative prompt: task, accepted history, next-step ask."""
    base = render_vanilla_prompt(goal, template)
    text = (
        f"{base.text}\n"
        f"{STEPWISE_HISTORY_HEADER}\n"
        + "".join(f"Step {i + 1}: {s}\n" for i, s in enumerate(history))
        + stepwise_instruction(len(history) + 1)
    )
    return RenderedPrompt(
        role=TemplateRole.VANILLA,
        text=text,
        slots={**base.slots, "HISTORY": _numbered(history)},
    )


def _map_steps(
    fn: Callable[[int], T], count: int, workers: int
) -> list[T]:
    """Apply ``fn`` over step positions, optionally in parallel, preserving
    order and annotating failures with the 1-based step index."""

    def guarded(i: int) -> T:
        try:
            return fn(i)
        except StepError:
            raise
        except (BackendError, ValueError, KeyError) as exc:
            raise StepError(i + 1, exc) from exc

    if workers <= 1 or count <= 1:
        return [guarded(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(guarded, range(count)))


def _uses_bridge(mode: PlanMethod) -> bool:
    return mode in (
        PlanMethod.TIP_PROCEDURE,
        PlanMethod.TIP_STEPWISE,
        PlanMethod.ABLATION_NO_I2TB,
    )


def generate_image_plan(
    text_steps: Sequence[str],
    suite: BackendSuite,
    config: PipelineConfig,
) -> list[tuple[str, ImageHandle]]:
    """Produce one (imagination_prompt, image) pair per step, in step order.

    In modes that bypass the text-to-image bridge the imagination prompt is
    the raw step text itself.
    """
    if not text_steps:
        raise ValueError("image plan needs at least one step")
    width, height = config.image_size
    bridged = _uses_bridge(config.mode)
    template = config.templates.get(TemplateRole.T2I_BRIDGE)

    def one(i: int) -> tuple[str, ImageHandle]:
        step = text_steps[i]
        if bridged:
            assert template is not None
            prompt = render_imagination_prompt(step, template)
            description = suite.text_complete(prompt.text, config.params).text.strip()
            if not description:
                raise BackendError("empty scene description")
        else:
            description = step
        image = suite.image_generate(description, width, height)
        return description, image

    return _map_steps(one, len(text_steps), config.step_workers)


def verbalize_images(
    images: Sequence[ImageHandle],
    suite: BackendSuite,
    question: str = CAPTION_QUESTION,
    workers: int = 1,
) -> list[str]:
    """Caption every image, preserving order; failures carry the step index."""
    return _map_steps(lambda i: suite.caption(images[i], question), len(images), workers)


def _finalize(
    goal: Goal,
    mode: PlanMethod,
    final_texts: Sequence[str],
    image_plan: Sequence[tuple[str, ImageHandle] | None],
    captions: Sequence[str | None],
    vanilla: Sequence[str],
    suite: BackendSuite,
    pairing_adjusted: bool,
) -> MultimodalPlan:
    steps = tuple(
        PlanStep(
            index=i + 1,
            text=final_texts[i],
            image=image_plan[i][1] if image_plan[i] else None,
            imagination_prompt=image_plan[i][0] if image_plan[i] else None,
            caption=captions[i],
        )
        for i in range(len(final_texts))
    )
    plan = MultimodalPlan(
        goal=goal,
        method=mode,
        steps=steps,
        vanilla_text=tuple(vanilla),
        pairing_adjusted=pairing_adjusted,
        backend_fingerprint=suite.fingerprint(),
    )
    violations = validate_plan(plan)
    if violations:
        raise PipelineError(f"emitted plan violates invariants: {violations}")
    return plan


def run_tip(goal: Goal, suite: BackendSuite, config: PipelineConfig) -> MultimodalPlan:
    """Run the full dual-bridge flow: vanilla text plan, textual-grounded
    image plan, verbalization, and visual-grounded revision.

    If the revision changes the step count, text and images are paired by
    index up to the shorter length and the plan is flagged
    ``pairing_adjusted``.
    """
    if config.mode not in (
        PlanMethod.TIP_PROCEDURE,
        PlanMethod.ABLATION_NO_T2IB,
        PlanMethod.ABLATION_NO_I2TB,
    ):
        raise ValueError(f"run_tip does not handle mode {config.mode.value}")
    vanilla_prompt = render_vanilla_prompt(goal, config.templates[TemplateRole.VANILLA])
    vanilla = parse_step_list(suite.text_complete(vanilla_prompt.text, config.params).text)

    image_plan = generate_image_plan(vanilla, suite, config)
    captions = verbalize_images(
        [image for _, image in image_plan], suite, workers=config.step_workers
    )

    if config.mode == PlanMethod.ABLATION_NO_I2TB:
        final_texts = list(vanilla)
    else:
        revision_prompt = render_revision_prompt(
            vanilla, captions, config.templates[TemplateRole.I2T_BRIDGE]
        )
        final_texts = parse_step_list(
            suite.text_complete(revision_prompt.text, config.params).text
        )

    pairing_adjusted = len(final_texts) != len(image_plan)
    n = min(len(final_texts), len(image_plan))
    return _finalize(
        goal,
        config.mode,
        final_texts[:n],
        image_plan[:n],
        captions[:n],
        vanilla,
        suite,
        pairing_adjusted,
    )


def _extract_single_step(text: str) -> str:
    try:
        return parse_step_list(text)[0]
    except UnparseablePlan:
        stripped = text.strip()
        if not stripped:
            raise
        return stripped


def run_tip_stepwise(goal: Goal, suite: BackendSuite, config: PipelineConfig) -> MultimodalPlan:
    """Generate the plan one step at a time, bridging and revising as it goes.

    Each iteration prompts with the accepted steps so far and asks for the
    next step or the stop marker; an accepted step flows through the
    text-to-image bridge and verbalization, then the whole prefix is revised
    with the captions gathered so far.
    """
    if config.mode != PlanMethod.TIP_STEPWISE:
        raise ValueError("run_tip_stepwise requires mode tip_stepwise")
    history: list[str] = []
    image_plan: list[tuple[str, ImageHandle]] = []
    captions: list[str] = []
    raw_generated: list[str] = []
    pairing_adjusted = False

    # iteration-capped (not just length-capped): a revision that keeps
    # shrinking the prefix must not loop forever
    for _ in range(config.max_steps):
        if len(history) >= config.max_steps:
            break
        prompt = build_stepwise_prompt(goal, config.templates[TemplateRole.VANILLA], history)
        reply = suite.text_complete(prompt.text, config.params).text.strip()
        if reply == STEPWISE_STOP_MARKER or reply.startswith(STEPWISE_STOP_MARKER):
            break
        step_text = _extract_single_step(reply)
        raw_generated.append(step_text)

        k = len(history) + 1
        try:
            pair = generate_image_plan([step_text], suite, config)[0]
            caption = verbalize_images([pair[1]], suite)[0]
        except StepError as exc:
            raise StepError(k, exc.cause) from exc
        image_plan.append(pair)
        captions.append(caption)

        prefix = history + [step_text]
        revision_prompt = render_revision_prompt(
            prefix, captions, config.templates[TemplateRole.I2T_BRIDGE]
        )
        revised = parse_step_list(suite.text_complete(revision_prompt.text, config.params).text)
        if len(revised) != len(prefix):
            pairing_adjusted = True
            keep = min(len(revised), len(prefix))
            history = list(revised[:keep])
            image_plan = image_plan[:keep]
            captions = captions[:keep]
        else:
            history = list(revised)

    if not history:
        raise UnparseablePlan("stepwise generation produced no steps", raw="")
    return _finalize(
        goal,
        PlanMethod.TIP_STEPWISE,
        history,
        image_plan,
        captions,
        raw_generated,
        suite,
        pairing_adjusted,
    )


def run_baseline(
    goal: Goal,
    suite: BackendSuite,
    config: PipelineConfig,
    reference: ReferencePlan | None = None,
) -> MultimodalPlan:
    """Run one of the no-bridge baselines.

    ``baseline_no_bridge`` generates text and images separately with no
    bridging or revision; the ``*_ref`` variants substitute the reference
    text (or reference images) for one modality.
    """
    mode = config.mode
    if mode == PlanMethod.BASELINE_NO_BRIDGE:
        vanilla_prompt = render_vanilla_prompt(goal, config.templates[TemplateRole.VANILLA])
        texts = parse_step_list(suite.text_complete(vanilla_prompt.text, config.params).text)
        image_plan = generate_image_plan(texts, suite, config)
        return _finalize(
            goal, mode, texts, image_plan, [None] * len(texts), texts, suite, False
        )

    if mode == PlanMethod.BASELINE_TEXT_REF:
        if reference is None:
            raise ValueError("baseline_text_ref requires a reference plan")
        texts = [step.text for step in reference.steps]
        image_plan = generate_image_plan(texts, suite, config)
        return _finalize(
            goal, mode, texts, image_plan, [None] * len(texts), texts, suite, False
        )

    if mode == PlanMethod.BASELINE_IMAGE_REF:
        if reference is None:
            raise ValueError("baseline_image_ref requires a reference plan")
        handles: list[ImageHandle] = []
        for pos, step in enumerate(reference.steps):
            if step.image is None:
                raise StepError(pos + 1, ValueError("reference step has no image"))
            handles.append(step.image)
        captions = verbalize_images(handles, suite, workers=config.step_workers)
        image_plan_opt = [(None, h) for h in handles]
        steps = tuple(
            PlanStep(index=i + 1, text=captions[i], image=handles[i], caption=captions[i])
            for i in range(len(handles))
        )
        plan = MultimodalPlan(
            goal=goal,
            method=mode,
            steps=steps,
            vanilla_text=(),
            pairing_adjusted=False,
            backend_fingerprint=suite.fingerprint(),
        )
        violations = validate_plan(plan)
        if violations:
            raise PipelineError(f"emitted plan violates invariants: {violations}")
        return plan

    raise ValueError(f"run_baseline does not handle mode {mode.value}")


def run_method(
    goal: Goal,
    suite: BackendSuite,
    config: PipelineConfig,
    reference: ReferencePlan | None = None,
) -> MultimodalPlan:
    """Dispatch to the flow implementing ``config.mode``."""
    if config.mode == PlanMethod.TIP_STEPWISE:
        return run_tip_stepwise(goal, suite, config)
    if config.mode in (
        PlanMethod.TIP_PROCEDURE,
        PlanMethod.ABLATION_NO_T2IB,
        PlanMethod.ABLATION_NO_I2TB,
    ):
        return run_tip(goal, suite, config)
    return run_baseline(goal, suite, config, reference)
