"""Stock prompt templates for the three pipeline roles, plus the fixed
prompt-grammar constants the pipeline and the deterministic mocks share.

The default template per bridge role is the one with the best averaged
multimodal alignment in the reference measurements shipped alongside the
registry; the remaining entries (including the deliberately misleading
controls) exist for the robustness harness.
"""

from __future__ import annotations

from .model import PromptTemplate, TemplateRole

#: Question posed to the captioner when verbalizing an image plan.
CAPTION_QUESTION = "what does the image describe"

#: Reply that ends step-by-step generation in stepwise mode.
STEPWISE_STOP_MARKER = "DONE"

#: Header introducing the accepted history inside a stepwise prompt.
STEPWISE_HISTORY_HEADER = "Steps so far:"


def stepwise_instruction(next_index: int) -> str:
    """Instruction suffix asking for one more step or the stop marker."""
    return (
        f'Write the next step as "Step {next_index}: ..." or reply '
        f'"{STEPWISE_STOP_MARKER}" if the procedure is complete.'
    )


VANILLA_DEFAULT_ID = "vanilla_step_by_step"
T2I_DEFAULT_ID = "t2i_draw_to_describe"
I2T_DEFAULT_ID = "i2t_rewrite_pairwise"

_STOCK = [
    PromptTemplate(
        id=VANILLA_DEFAULT_ID,
        role=TemplateRole.VANILLA,
        body="What's the step-by-step procedure of",
    ),
    # --- text-to-image bridge candidates ---
    PromptTemplate(
        id=T2I_DEFAULT_ID,
        role=TemplateRole.T2I_BRIDGE,
        body="What do I need to draw in the picture to describe the above text?",
    ),
    PromptTemplate(
        id="t2i_what_do_you_see",
        role=TemplateRole.T2I_BRIDGE,
        body="What do you see in the figure?",
    ),
    PromptTemplate(
        id="t2i_describe_picture_content",
        role=TemplateRole.T2I_BRIDGE,
        body="Describe what the picture corresponding to the text should have.",
    ),
    PromptTemplate(
        id="t2i_think_what_to_visualize",
        role=TemplateRole.T2I_BRIDGE,
        body="Let's think about what we need to visualize to present the above idea.",
    ),
    PromptTemplate(
        id="t2i_mis_irrelevant_description",
        role=TemplateRole.T2I_BRIDGE,
        body="Describe something irrelevant to the above text.",
        misleading=True,
    ),
    PromptTemplate(
        id="t2i_mis_usual_drawing",
        role=TemplateRole.T2I_BRIDGE,
        body="What do you usually draw?",
        misleading=True,
    ),
    # --- image-to-text bridge candidates ---
    PromptTemplate(
        id=I2T_DEFAULT_ID,
        role=TemplateRole.I2T_BRIDGE,
        body=(
            "Rewrite the textual instruction with the knowledge from "
            "visualized instruction pair-wisely."
        ),
    ),
    PromptTemplate(
        id="i2t_revise_from_caption_question",
        role=TemplateRole.I2T_BRIDGE,
        body=(
            "Based on the visual caption, can you revise the step-by-step "
            "procedure according to the paired captions?"
        ),
    ),
    PromptTemplate(
        id="i2t_revise_by_imagination",
        role=TemplateRole.I2T_BRIDGE,
        body="Revise each step according to the visual imagination.",
    ),
    PromptTemplate(
        id="i2t_revise_with_captions",
        role=TemplateRole.I2T_BRIDGE,
        body="Let's revise the procedure using the captions.",
    ),
    PromptTemplate(
        id="i2t_mis_disobey_captions",
        role=TemplateRole.I2T_BRIDGE,
        body="What's the procedure that disobey the captions?",
        misleading=True,
    ),
    PromptTemplate(
        id="i2t_mis_irrelevant_procedure",
        role=TemplateRole.I2T_BRIDGE,
        body="Provide an interesting procedure to be irrelevant with the captions.",
        misleading=True,
    ),
]

TEMPLATES: dict[str, PromptTemplate] = {t.id: t for t in _STOCK}

#: Alignment scores measured for the stock templates in the original
#: template study, per dataset. Shipped as report context only; nothing in
#: this artifact asserts computed alignments against them.
REFERENCE_ALIGNMENT: dict[str, dict[str, float]] = {
    T2I_DEFAULT_ID: {"wikiplan": 0.9625, "recipeplan": 0.9595},
    "t2i_what_do_you_see": {"wikiplan": 0.9366, "recipeplan": 0.9397},
    "t2i_describe_picture_content": {"wikiplan": 0.9070, "recipeplan": 0.9181},
    "t2i_think_what_to_visualize": {"wikiplan": 0.8986, "recipeplan": 0.8941},
    "t2i_mis_irrelevant_description": {"wikiplan": 0.5598, "recipeplan": 0.5325},
    "t2i_mis_usual_drawing": {"wikiplan": 0.5350, "recipeplan": 0.4826},
    I2T_DEFAULT_ID: {"wikiplan": 0.7644, "recipeplan": 0.6945},
    "i2t_revise_from_caption_question": {"wikiplan": 0.8011, "recipeplan": 0.6205},
    "i2t_revise_by_imagination": {"wikiplan": 0.6921, "recipeplan": 0.7329},
    "i2t_revise_with_captions": {"wikiplan": 0.6155, "recipeplan": 0.7691},
    "i2t_mis_disobey_captions": {"wikiplan": 0.5079, "recipeplan": 0.5902},
    "i2t_mis_irrelevant_procedure": {"wikiplan": 0.1519, "recipeplan": 0.163},
}


def get_template(template_id: str) -> PromptTemplate:
    try:
        return TEMPLATES[template_id]
    except KeyError:
        raise KeyError(f"unknown template id '{template_id}'") from None


def templates_for_role(role: TemplateRole) -> list[PromptTemplate]:
    return [t for t in TEMPLATES.values() if t.role == role]


def default_templates() -> dict[TemplateRole, PromptTemplate]:
    return {
        TemplateRole.VANILLA: TEMPLATES[VANILLA_DEFAULT_ID],
        TemplateRole.T2I_BRIDGE: TEMPLATES[T2I_DEFAULT_ID],
        TemplateRole.I2T_BRIDGE: TEMPLATES[I2T_DEFAULT_ID],
    }
