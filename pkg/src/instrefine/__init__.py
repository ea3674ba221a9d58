"""instrefine: expand-then-curate refinement for instruction datasets.

The pipeline has two phases. Expansion rewrites every instruction into
harder variants for k rounds and merges the results with the original
dataset. Curation then shrinks the expanded pool twice: variety
curation keeps the items with the highest row variance in an
eigenvector-reduced embedding space, and quality curation keeps the
items with the best fused rubric + length scores. Reports summarize
where the surviving records came from and what fine-tuning on them
would cost.
"""

from .analysis import (
    CompositionReport,
    CostReport,
    Histogram,
    composition_report,
    estimate_cost,
    pass_at_k,
    pass_at_k_mean,
    score_histogram,
)
from .expansion import ExpansionConfig, build_rewrite_prompt, expand, expand_round
from .gateway import (
    EmbeddingMatrix,
    LlmGateway,
    PromptPair,
    ProviderConfig,
    ProviderError,
    ResponseCache,
)
from .pipeline import PipelineConfig, build_gateway, run_all
from .providers import HttpProvider, MockProvider, mock_provider
from .quality import (
    FewShotExample,
    GptScore,
    QualityAssessment,
    QualityConfig,
    build_score_prompt,
    length_score,
    parse_score_response,
    quality_curate,
    score_dataset,
)
from .records import (
    Dataset,
    DatasetError,
    InstructionRecord,
    content_hash,
    load_dataset,
    merge,
    save_dataset,
)
from .variety import (
    EigenPair,
    VarietyConfig,
    covariance,
    project,
    row_variances,
    select_top_fraction,
    top_k_eigen,
    variety_curate,
)

__version__ = "0.1.0"

__all__ = [
    "CompositionReport",
    "CostReport",
    "Histogram",
    "composition_report",
    "estimate_cost",
    "pass_at_k",
    "pass_at_k_mean",
    "score_histogram",
    "ExpansionConfig",
    "build_rewrite_prompt",
    "expand",
    "expand_round",
    "EmbeddingMatrix",
    "LlmGateway",
    "PromptPair",
    "ProviderConfig",
    "ProviderError",
    "ResponseCache",
    "PipelineConfig",
    "build_gateway",
    "run_all",
    "HttpProvider",
    "MockProvider",
    "mock_provider",
    "FewShotExample",
    "GptScore",
    "QualityAssessment",
    "QualityConfig",
    "build_score_prompt",
    "length_score",
    "parse_score_response",
    "quality_curate",
    "score_dataset",
    "Dataset",
    "DatasetError",
    "InstructionRecord",
    "content_hash",
    "load_dataset",
    "merge",
    "save_dataset",
    "EigenPair",
    "VarietyConfig",
    "covariance",
    "project",
    "row_variances",
    "select_top_fraction",
    "top_k_eigen",
    "variety_curate",
]
