"""Template alignment: how well a bridge template makes the generated
modality agree with the given one, measured as joint-space cosine.

For a text-to-image template, each sampled step text is pushed through the
bridge to an image and scored against the step; for an image-to-text
template, each sampled image is captioned and revised and the revised step is
scored against the image.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from ..backends import BackendSuite, EmbedSpace
from ..model import ImageHandle, PromptTemplate, TemplateRole
from ..pipeline import (
    PipelineConfig,
    parse_step_list,
    render_imagination_prompt,
    render_revision_prompt,
)
from .scores import cosine


@dataclass(frozen=True)
class AlignmentSample:
    """One probe: a gold step text and, for image-to-text templates, the gold
    image paired with it."""

    step_text: str
    image: ImageHandle | None = None


def template_alignment(
    template: PromptTemplate,
    samples: Sequence[AlignmentSample],
    suite: BackendSuite,
    config: PipelineConfig,
) -> float:
    """Mean alignment of ``template`` over the sampled steps, in [-1, 1]."""
    if not samples:
        raise ValueError("template alignment needs a non-empty sample")
    if template.role == TemplateRole.T2I_BRIDGE:
        scores = [_t2i_alignment(template, s, suite, config) for s in samples]
    elif template.role == TemplateRole.I2T_BRIDGE:
        scores = [_i2t_alignment(template, s, suite, config) for s in samples]
    else:
        raise ValueError("alignment is defined for bridge templates only")
    return sum(scores) / len(scores)


def _t2i_alignment(
    template: PromptTemplate,
    sample: AlignmentSample,
    suite: BackendSuite,
    config: PipelineConfig,
) -> float:
    prompt = render_imagination_prompt(sample.step_text, template)
    description = suite.text_complete(prompt.text, config.params).text.strip()
    width, height = config.image_size
    image = suite.image_generate(description, width, height)
    text_vec = suite.embed_text(sample.step_text, EmbedSpace.JOINT_TEXT).values
    image_vec = suite.embed_image(image).values
    return cosine(text_vec, image_vec)


def _i2t_alignment(
    template: PromptTemplate,
    sample: AlignmentSample,
    suite: BackendSuite,
    config: PipelineConfig,
) -> float:
    if sample.image is None:
        raise ValueError("image-to-text alignment needs sampled images")
    caption = suite.caption(sample.image)
    prompt = render_revision_prompt([sample.step_text], [caption], template)
    revised = parse_step_list(suite.text_complete(prompt.text, config.params).text)[0]
    image_vec = suite.embed_image(sample.image).values
    text_vec = suite.embed_text(revised, EmbedSpace.JOINT_TEXT).values
    return cosine(image_vec, text_vec)


def select_best_template(averages: Mapping[str, float]) -> str:
    """Argmax over averaged alignments; ties break toward the smaller
    template id. Invariant under any uniform positive rescaling."""
    if not averages:
        raise ValueError("no templates to select among")
    best = max(averages.values())
    return min(tid for tid, value in averages.items() if value == best)
