from __future__ import annotations

import json
from pathlib import Path

import pytest

from planweave.backends import deterministic_png
from planweave.corpus import (
    CorpusSchemaError,
    ValidationRules,
    corpus_stats,
    load_corpus,
    sample_tasks,
    write_rejects_report,
)


def _write_image(path: Path, width: int, height: int) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(deterministic_png(path.name.encode().ljust(32, b"x")[:32], width, height))


def make_corpus(root: Path, examples: list[dict], name: str = "demo") -> Path:
    """Write a corpus file plus 420px images for any step without an explicit
    image entry."""
    for pos, example in enumerate(examples):
        for step_pos, step in enumerate(example["steps"]):
            if "image" not in step:
                locator = f"assets/{example['id']}-{step_pos}.png"
                _write_image(root / locator, 420, 420)
                step["image"] = locator
    path = root / f"{name}.json"
    path.write_text(json.dumps(examples), encoding="utf-8")
    return path


def _example(example_id: str, steps: int, category: str = "crafts") -> dict:
    return {
        "id": example_id,
        "title": f"How to do task {example_id}",
        "category": category,
        "topic": "demo",
        "steps": [{"text": f"step {i + 1} of {example_id}"} for i in range(steps)],
    }


def test_valid_corpus_fully_accepted(tmp_path):
    path = make_corpus(tmp_path, [_example("a", 3), _example("b", 4), _example("c", 5)])
    manifest = load_corpus(path)
    assert manifest.accepted_count == 3
    assert manifest.rejections == []
    assert manifest.dataset == "demo"
    assert all(s.image is not None for e in manifest.examples for s in e.steps)


def test_too_few_steps_rejected(tmp_path):
    path = make_corpus(tmp_path, [_example("short", 2), _example("ok", 3)])
    manifest = load_corpus(path)
    assert manifest.accepted_count == 1
    reasons = [r for r in manifest.rejections if r.example_id == "short"]
    assert any("step count 2 < 3" in r.detail for r in reasons)


def test_too_many_steps_rejected(tmp_path):
    path = make_corpus(tmp_path, [_example("long", 23), _example("ok", 3)])
    manifest = load_corpus(path)
    reasons = [r for r in manifest.rejections if r.example_id == "long"]
    assert any("step count 23 > 22" in r.detail for r in reasons)


def test_small_image_rejected(tmp_path):
    example = _example("smallimg", 3)
    _write_image(tmp_path / "assets/custom.png", 399, 500)
    example["steps"][1]["image"] = "assets/custom.png"
    path = make_corpus(tmp_path, [example, _example("ok", 3)])
    manifest = load_corpus(path)
    reasons = [r for r in manifest.rejections if r.example_id == "smallimg"]
    assert any("image dim 399 < 400" in r.detail for r in reasons)


def test_missing_image_rejected(tmp_path):
    example = _example("noimg", 3)
    example["steps"][0]["image"] = "assets/never-written.png"
    path = make_corpus(tmp_path, [example])
    manifest = load_corpus(path)
    assert any(r.rule == "image-missing" for r in manifest.rejections)


def test_duplicate_ids_rejected(tmp_path):
    path = make_corpus(tmp_path, [_example("dup", 3), _example("dup", 3)])
    manifest = load_corpus(path)
    assert manifest.accepted_count == 1
    assert any(r.rule == "unique-id" for r in manifest.rejections)


def test_validation_is_total(tmp_path):
    examples = [_example("a", 2), _example("b", 3), _example("c", 23)]
    path = make_corpus(tmp_path, examples)
    manifest = load_corpus(path)
    rejected_ids = {r.example_id for r in manifest.rejections}
    assert manifest.accepted_count + len(rejected_ids) == len(examples)


def test_schema_violation_reports_location(tmp_path):
    bad = [{"id": "x", "steps": [{"text": "a", "image": None}]}]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    with pytest.raises(CorpusSchemaError, match=r"examples\[0\]: missing field 'title'"):
        load_corpus(path)


def test_schema_top_level_must_be_array(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"examples": []}')
    with pytest.raises(CorpusSchemaError, match="array"):
        load_corpus(path)


def test_rules_are_parameterized(tmp_path):
    path = make_corpus(tmp_path, [_example("two", 2)])
    manifest = load_corpus(path, rules=ValidationRules(min_steps=2, max_steps=22))
    assert manifest.accepted_count == 1


def test_rejects_report_written(tmp_path):
    path = make_corpus(tmp_path, [_example("short", 2), _example("ok", 3)])
    manifest = load_corpus(path)
    report = write_rejects_report(manifest)
    lines = report.read_text().splitlines()
    assert len(lines) == 1
    assert lines[0].split("\t")[0] == "short"
    assert "step count 2 < 3" in lines[0]


def test_sample_tasks_deterministic(tmp_path):
    path = make_corpus(tmp_path, [_example(f"t{i}", 3) for i in range(8)])
    manifest = load_corpus(path)
    a = sample_tasks(manifest, 5, seed=13)
    b = sample_tasks(manifest, 5, seed=13)
    assert [g.id for g in a] == [g.id for g in b]
    assert len({g.id for g in a}) == 5
    c = sample_tasks(manifest, 5, seed=14)
    assert [g.id for g in a] != [g.id for g in c]


def test_sample_all_shuffles(tmp_path):
    path = make_corpus(tmp_path, [_example(f"t{i}", 3) for i in range(8)])
    manifest = load_corpus(path)
    sample = sample_tasks(manifest, 8, seed=7)
    assert sorted(g.id for g in sample) == [f"t{i}" for i in range(8)]


def test_sample_zero_and_over_budget(tmp_path):
    path = make_corpus(tmp_path, [_example("a", 3)])
    manifest = load_corpus(path)
    assert sample_tasks(manifest, 0, seed=1) == []
    with pytest.raises(ValueError):
        sample_tasks(manifest, 2, seed=1)


def test_sample_balanced_categories(tmp_path):
    examples = [_example(f"a{i}", 3, category="alpha") for i in range(4)]
    examples += [_example(f"b{i}", 3, category="beta") for i in range(4)]
    path = make_corpus(tmp_path, examples)
    manifest = load_corpus(path)
    sample = sample_tasks(manifest, 4, seed=3, balance_categories=True)
    by_cat = {}
    for goal in sample:
        by_cat[goal.category] = by_cat.get(goal.category, 0) + 1
    assert by_cat == {"alpha": 2, "beta": 2}


def test_corpus_stats(tmp_path):
    path = make_corpus(tmp_path, [_example("a", 3), _example("b", 5), _example("c", 7)])
    manifest = load_corpus(path)
    stats = corpus_stats(manifest)
    assert stats.avg_steps == 5.00
    assert stats.step_histogram == {3: 1, 5: 1, 7: 1}
    assert stats.category_counts == {"crafts": 3}


def test_corpus_stats_single_example(tmp_path):
    path = make_corpus(tmp_path, [_example("a", 4)])
    manifest = load_corpus(path)
    assert corpus_stats(manifest).avg_steps == 4.0


def test_load_is_idempotent_on_accepted(tmp_path):
    path = make_corpus(tmp_path, [_example("a", 3), _example("b", 4)])
    first = load_corpus(path)
    second = load_corpus(path)
    assert first.examples == second.examples
