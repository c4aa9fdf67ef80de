"""Embedding-based similarity scores and the per-plan metric report.

Plan-level text scores operate on steps joined by newline, one embedding per
plan. The report exposes the transport distance both as a true distance and
as the similarity orientation 1/(1+d) used in the aggregate tables.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

from ..backends import BackendSuite, EmbedSpace
from ..model import MultimodalPlan, ReferencePlan

CLIP_WEIGHT = 2.5


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    if len(u) != len(v):
        raise ValueError(f"vector length mismatch: {len(u)} vs {len(v)}")
    dot = sum(a * b for a, b in zip(u, v))
    norm_u = math.sqrt(sum(a * a for a in u))
    norm_v = math.sqrt(sum(b * b for b in v))
    if norm_u == 0.0 or norm_v == 0.0:
        raise ValueError("cosine is undefined for zero-norm vectors")
    return dot / (norm_u * norm_v)


def sbert_similarity(
    text_a: str,
    text_b: str,
    embed_sentence: Callable[[str], Sequence[float]],
) -> float:
    """Cosine of the two sentence embeddings; raises on zero-norm vectors."""
    if not text_a.strip() or not text_b.strip():
        raise ValueError("sbert_similarity requires non-empty texts")
    return cosine(embed_sentence(text_a), embed_sentence(text_b))


def clip_score(
    image_vector: Sequence[float],
    text_vector: Sequence[float],
    weight: float = CLIP_WEIGHT,
) -> float:
    """weight * max(cos, 0): in [0, weight]."""
    return weight * max(cosine(image_vector, text_vector), 0.0)


def plan_text(steps_text: Sequence[str]) -> str:
    return "\n".join(steps_text)


@dataclass
class MetricReport:
    """Scores for one predicted plan against its reference. ``fid`` is filled
    only at corpus level; absent metrics are None."""

    wmd_distance: float | None = None
    wmd_similarity: float | None = None
    sbert: float | None = None
    rouge_l: float | None = None
    meteor: float | None = None
    clip: float | None = None
    cap_s: float | None = None
    text_s: float | None = None
    all_s: float | None = None
    fid: float | None = None

    def to_dict(self) -> dict[str, float | None]:
        return asdict(self)


def plan_clip_score(
    plan: MultimodalPlan, suite: BackendSuite, weight: float = CLIP_WEIGHT
) -> float:
    """Mean clamped joint-space similarity between each step's image and its
    text, over steps that carry an image."""
    scores = []
    for step in plan.steps:
        if step.image is None:
            continue
        image_vec = suite.embed_image(step.image).values
        text_vec = suite.embed_text(step.text, EmbedSpace.JOINT_TEXT).values
        scores.append(weight * max(cosine(image_vec, text_vec), 0.0))
    if not scores:
        raise ValueError("plan has no image-bearing steps to score")
    return sum(scores) / len(scores)


def ensure_captions(plan: MultimodalPlan, suite: BackendSuite) -> list[str]:
    """Captions for every image-bearing step, generating any that are absent."""
    captions = []
    for step in plan.steps:
        if step.image is None:
            continue
        captions.append(step.caption if step.caption else suite.caption(step.image))
    if not captions:
        raise ValueError("plan has no images to caption")
    return captions


def composite_scores(
    predicted: MultimodalPlan,
    reference: ReferencePlan,
    suite: BackendSuite,
) -> dict[str, float]:
    """Caption-vs-reference, text-vs-reference, and their mean.

    cap_s embeds the captions of the predicted image plan, text_s the
    predicted text plan, both against the reference text plan.
    """
    if not reference.steps:
        raise ValueError("reference plan has no steps")
    embed = lambda text: suite.embed_text(text, EmbedSpace.SENTENCE).values
    reference_text = plan_text([s.text for s in reference.steps])
    captions = ensure_captions(predicted, suite)
    cap_s = sbert_similarity(plan_text(captions), reference_text, embed)
    text_s = sbert_similarity(
        plan_text([s.text for s in predicted.steps]), reference_text, embed
    )
    return {"cap_s": cap_s, "text_s": text_s, "all_s": (cap_s + text_s) / 2.0}
