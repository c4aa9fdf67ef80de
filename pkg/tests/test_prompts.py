from __future__ import annotations

import pytest

from planweave.model import Goal, TemplateRole
from planweave.pipeline import (
    UnparseablePlan,
    build_stepwise_prompt,
    parse_step_list,
    render_imagination_prompt,
    render_revision_prompt,
    render_vanilla_prompt,
)
from planweave.templates import (
    CAPTION_QUESTION,
    I2T_DEFAULT_ID,
    T2I_DEFAULT_ID,
    TEMPLATES,
    VANILLA_DEFAULT_ID,
    get_template,
    templates_for_role,
)


def test_vanilla_prompt_matches_golden_file(fixtures_dir):
    goal = Goal(id="g", title="How to make a candy bouquet", dataset="demo")
    rendered = render_vanilla_prompt(goal, TEMPLATES[VANILLA_DEFAULT_ID])
    golden = (fixtures_dir / "prompts" / "vanilla.txt").read_bytes()
    assert rendered.text.encode("utf-8") == golden


def test_imagination_prompt_matches_golden_file(fixtures_dir):
    rendered = render_imagination_prompt(
        "put down the wine glass", TEMPLATES[T2I_DEFAULT_ID]
    )
    golden = (fixtures_dir / "prompts" / "imagination.txt").read_bytes()
    assert rendered.text.encode("utf-8") == golden


def test_revision_prompt_matches_golden_file(fixtures_dir):
    rendered = render_revision_prompt(
        [
            "Gather the flowers and trim the stems",
            "Tie the stems together with a ribbon",
        ],
        [
            "a bunch of flowers laid out on a table",
            "a ribbon being tied around green stems",
        ],
        TEMPLATES[I2T_DEFAULT_ID],
    )
    golden = (fixtures_dir / "prompts" / "revision.txt").read_bytes()
    assert rendered.text.encode("utf-8") == golden


def test_caption_question_matches_golden_file(fixtures_dir):
    golden = (fixtures_dir / "prompts" / "caption_question.txt").read_bytes()
    assert CAPTION_QUESTION.encode("utf-8") == golden


def test_vanilla_slots_and_fidelity():
    goal = Goal(id="g", title="How to brew tea", dataset="demo")
    template = TEMPLATES[VANILLA_DEFAULT_ID]
    rendered = render_vanilla_prompt(goal, template)
    assert rendered.slots == {"TEMPLATE": template.body, "GOAL": goal.title}
    assert template.body in rendered.text
    assert goal.title in rendered.text


def test_vanilla_wrong_role_rejected():
    goal = Goal(id="g", title="How to brew tea", dataset="demo")
    with pytest.raises(ValueError):
        render_vanilla_prompt(goal, TEMPLATES[T2I_DEFAULT_ID])


def test_imagination_misleading_template_renders_normally():
    rendered = render_imagination_prompt(
        "pick up the cup", TEMPLATES["t2i_mis_usual_drawing"]
    )
    assert rendered.text == "pick up the cup\nWhat do you usually draw?"


def test_imagination_empty_step_rejected():
    with pytest.raises(ValueError):
        render_imagination_prompt("  ", TEMPLATES[T2I_DEFAULT_ID])


def test_revision_arity_mismatch_rejected():
    with pytest.raises(ValueError, match="arity"):
        render_revision_prompt(["a", "b"], ["x", "y", "z"], TEMPLATES[I2T_DEFAULT_ID])


def test_revision_numbering_format():
    rendered = render_revision_prompt(["a", "b"], ["x", "y"], TEMPLATES[I2T_DEFAULT_ID])
    assert "Step 1: a" in rendered.text
    assert "Step 2: b" in rendered.text
    assert "Step 1: x" in rendered.text
    assert "Step 2: y" in rendered.text


def test_parse_step_list_step_prefix():
    assert parse_step_list("Step 1: A\nStep 2: B") == ["A", "B"]


def test_parse_step_list_numeric_prefix():
    assert parse_step_list("1. A\n2. B\n3. C") == ["A", "B", "C"]


def test_parse_step_list_continuation_and_preamble():
    text = "Here is the plan:\nStep 1: first part\nsecond part\nStep 2: done"
    assert parse_step_list(text) == ["first part second part", "done"]


def test_parse_step_list_unparseable():
    with pytest.raises(UnparseablePlan) as err:
        parse_step_list("no numbering at all")
    assert err.value.raw == "no numbering at all"


def test_stepwise_prompt_contains_history_verbatim():
    goal = Goal(id="g", title="How to pot a plant", dataset="demo")
    history = ["choose a pot with a drainage hole", "fill the pot with soil"]
    rendered = build_stepwise_prompt(goal, TEMPLATES[VANILLA_DEFAULT_ID], history)
    assert "Step 1: choose a pot with a drainage hole\n" in rendered.text
    assert "Step 2: fill the pot with soil\n" in rendered.text
    assert 'reply "DONE"' in rendered.text
    assert '"Step 3: ..."' in rendered.text


def test_registered_templates_cover_both_bridge_roles():
    t2i = templates_for_role(TemplateRole.T2I_BRIDGE)
    i2t = templates_for_role(TemplateRole.I2T_BRIDGE)
    assert sum(1 for t in t2i if not t.misleading) >= 2
    assert sum(1 for t in i2t if not t.misleading) >= 2
    assert any(t.misleading for t in t2i)
    assert any(t.misleading for t in i2t)
    assert get_template("i2t_revise_with_captions").body == (
        "Let's revise the procedure using the captions."
    )


def test_prompt_fidelity_across_all_templates():
    # every rendered prompt contains the template body verbatim and every
    # substituted input verbatim
    goal = Goal(id="g", title="How to build a birdhouse", dataset="demo")
    for template in templates_for_role(TemplateRole.VANILLA):
        rendered = render_vanilla_prompt(goal, template)
        assert template.body in rendered.text
        assert goal.title in rendered.text
    step = "sand the edges until smooth"
    for template in templates_for_role(TemplateRole.T2I_BRIDGE):
        rendered = render_imagination_prompt(step, template)
        assert template.body in rendered.text
        assert step in rendered.text
        assert rendered.slots["STEP"] == step
    steps = ["cut the boards to size", "nail the walls together"]
    captions = ["boards on a workbench", "a small wooden box taking shape"]
    for template in templates_for_role(TemplateRole.I2T_BRIDGE):
        rendered = render_revision_prompt(steps, captions, template)
        assert template.body in rendered.text
        for value in steps + captions:
            assert value in rendered.text


def test_reference_alignment_expectations_recorded():
    # reference measurements shipped with the registry; recorded as context,
    # never asserted against computed alignments
    from planweave.templates import REFERENCE_ALIGNMENT

    selected_t2i = REFERENCE_ALIGNMENT[T2I_DEFAULT_ID]
    assert selected_t2i == {"wikiplan": 0.9625, "recipeplan": 0.9595}
    assert (selected_t2i["wikiplan"] + selected_t2i["recipeplan"]) / 2 == pytest.approx(
        0.961, abs=5e-4
    )
    assert REFERENCE_ALIGNMENT[I2T_DEFAULT_ID] == {"wikiplan": 0.7644, "recipeplan": 0.6945}
    # every registered bridge template carries a reference measurement
    for template in templates_for_role(TemplateRole.T2I_BRIDGE):
        assert template.id in REFERENCE_ALIGNMENT
    for template in templates_for_role(TemplateRole.I2T_BRIDGE):
        assert template.id in REFERENCE_ALIGNMENT
