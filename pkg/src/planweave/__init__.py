"""planweave: dual-bridge multimodal procedural planning.

A generation engine that orchestrates pluggable text-generation,
image-generation, and captioning backends through paired prompt bridges, an
automatic-metric evaluation harness (WMD, S-BERT, ROUGE-L, METEOR, FID, CLIP,
caption-composite scores), and a pairwise win-tie-lose rating service.
"""

from .model import (
    GenerationParams,
    Goal,
    ImageHandle,
    MultimodalPlan,
    PlanMethod,
    PlanParseError,
    PlanStep,
    PromptTemplate,
    ReferencePlan,
    TemplateRole,
    parse_plan,
    serialize_plan,
    validate_plan,
)
from .pipeline import (
    PipelineConfig,
    RenderedPrompt,
    StepError,
    UnparseablePlan,
    run_baseline,
    run_method,
    run_tip,
    run_tip_stepwise,
)
from .runner import (
    ConfigError,
    ExperimentConfig,
    build_suite,
    run_ablation,
    run_experiment,
    run_template_robustness,
)

__version__ = "0.1.0"
