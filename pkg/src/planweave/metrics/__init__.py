"""Automatic metrics: token metrics (ROUGE-L, METEOR), transport distance
(WMD), distribution distance (Frechet), embedding similarities, and the
template-alignment score."""

from .alignment import AlignmentSample, select_best_template, template_alignment
from .frechet import DistributionMoments, frechet_distance, moments_from_features
from .meteor import meteor
from .rouge import RougeLScore, lcs_length, rouge_l
from .scores import (
    CLIP_WEIGHT,
    MetricReport,
    clip_score,
    composite_scores,
    cosine,
    ensure_captions,
    plan_clip_score,
    plan_text,
    sbert_similarity,
)
from .tokens import TokenSequence, tokenize
from .wmd import (
    MissingWordError,
    WmdBudgetError,
    nbow_weights,
    solve_transport,
    wmd,
    wmd_similarity,
)
