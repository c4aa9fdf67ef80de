"""Pairwise human-rating backend: session store, aggregation, REST service."""

from .store import (
    ASPECT_PROMPTS,
    ASPECTS,
    CHOICES,
    INSTRUCTION,
    OPTION_LABELS,
    ComparisonItem,
    PlanSideView,
    RaterError,
    Rating,
    RatingStore,
    StepView,
    aggregate_ratings,
    validate_choices,
)
from .service import create_app, serve
