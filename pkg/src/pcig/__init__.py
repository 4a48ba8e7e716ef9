"""Prompt-consistency scene planning and pipeline orchestration."""

from .analysis import (
    AnalysisMode,
    AnalysisResult,
    FixtureTransport,
    HttpChatTransport,
    LlmClient,
    analyze,
    classify_object,
    expand_counts,
    extract_objects,
    extract_triples,
)
from .errors import (
    AnalysisError,
    BackendError,
    DispatchError,
    EvalError,
    GraphError,
    LayoutError,
    PcigError,
    PlanParseError,
    PlanValidationError,
)
from .evaluation import (
    EvalReport,
    ExemplarRecord,
    HallucinationClass,
    Verdict,
    compare_reports,
    compute_report,
    load_benchmark,
)
from .graph import SceneGraph, build_graph, select_anchor
from .layout import (
    ConstraintKind,
    LayoutConfig,
    LayoutConstraint,
    LayoutResult,
    llm_layout,
    predicates_to_constraints,
    relation_satisfied,
    solve_layout,
)
from .model import (
    BoundingBox,
    Diagnostic,
    ObjectCategory,
    PromptSpec,
    RelationTriple,
    SceneObject,
    ScenePlan,
    parse_plan,
    serialize_plan,
    validate_plan,
)
from .pipeline import (
    BackendRequest,
    DispatchItem,
    PipelineConfig,
    dispatch_plan,
    plan_prompt,
    run_batch,
    run_pipeline,
)
from .resolver import FixturePnResolver, PnImageResolver, RemotePnResolver

__version__ = "0.1.0"

__all__ = [
    "AnalysisError",
    "AnalysisMode",
    "AnalysisResult",
    "BackendError",
    "BackendRequest",
    "BoundingBox",
    "ConstraintKind",
    "Diagnostic",
    "DispatchError",
    "DispatchItem",
    "EvalError",
    "EvalReport",
    "ExemplarRecord",
    "FixturePnResolver",
    "FixtureTransport",
    "GraphError",
    "HallucinationClass",
    "HttpChatTransport",
    "LayoutConfig",
    "LayoutConstraint",
    "LayoutError",
    "LayoutResult",
    "LlmClient",
    "ObjectCategory",
    "PcigError",
    "PipelineConfig",
    "PlanParseError",
    "PlanValidationError",
    "PnImageResolver",
    "PromptSpec",
    "RelationTriple",
    "RemotePnResolver",
    "SceneGraph",
    "SceneObject",
    "ScenePlan",
    "Verdict",
    "analyze",
    "build_graph",
    "classify_object",
    "compare_reports",
    "compute_report",
    "dispatch_plan",
    "expand_counts",
    "extract_objects",
    "extract_triples",
    "llm_layout",
    "load_benchmark",
    "parse_plan",
    "plan_prompt",
    "predicates_to_constraints",
    "relation_satisfied",
    "run_batch",
    "run_pipeline",
    "select_anchor",
    "serialize_plan",
    "solve_layout",
    "validate_plan",
]
