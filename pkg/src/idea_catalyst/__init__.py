"""Retrieval-grounded interdisciplinary ideation pipeline and evaluation harness."""

__version__ = "0.1.0"

from .fields import CoarseField, DomainMapper, MappingError
from .models import (
    Challenge,
    CoverageAssessment,
    CoverageClass,
    GateResult,
    IdeaFragment,
    PairwiseJudgment,
    PaperSnippet,
    QuestionPair,
    ResearchProblem,
    RunArtifact,
    SourceDomain,
    Takeaway,
    canonical_deserialize,
    canonical_serialize,
    validate_fragment,
)

__all__ = [
    "CoarseField",
    "DomainMapper",
    "MappingError",
    "Challenge",
    "CoverageAssessment",
    "CoverageClass",
    "GateResult",
    "IdeaFragment",
    "PairwiseJudgment",
    "PaperSnippet",
    "QuestionPair",
    "ResearchProblem",
    "RunArtifact",
    "SourceDomain",
    "Takeaway",
    "canonical_deserialize",
    "canonical_serialize",
    "validate_fragment",
    "__version__",
]
