"""Context-reliance diagnostics for VQA models via feature swaps."""

from .augment import AugmentConfig, augment_features, decide_swap
from .context import MatchTable, identify_context, match_detections
from .domain import (
    BoundingBox,
    ContextSet,
    DetectedObject,
    EmbeddingTable,
    FeatureMatrix,
    ObjectAnnotation,
    Question,
    ReasoningStep,
    Relation,
    SceneGraph,
    iou,
    validate_scene_graph,
)
from .encoder import EncoderConfig, encode_object, encode_scene
from .errors import (
    AmbiguousSelection,
    BadMagic,
    DanglingDependency,
    DimensionMismatch,
    DonorUnmatched,
    EmptyClass,
    ImageMismatch,
    IncompleteLog,
    IndexOutOfRange,
    InvariantViolation,
    MalformedInput,
    ModelFailure,
    SwapMixError,
    TruncatedFile,
    UnknownLabel,
    UnsupportedOperation,
    VersionUnsupported,
)
from .ingestion import (
    DatasetBundle,
    build_indices,
    load_bundle,
    load_embeddings,
    load_features_dir,
    parse_questions,
    parse_scene_graphs,
    read_feature_file,
    write_feature_file,
)
from .metrics import RobustnessReport, compute_report, emit_report, report_as_dict
from .models import (
    FAILURE_ANSWER,
    AnswerLogEntry,
    BaselineModel,
    bridge_export,
    bridge_import,
    normalize_answer,
    read_answer_file,
    symbolic_execute,
    write_answer_file,
)
from .perturb import apply_swap, enumerate_perturbations
from .pipeline import RunConfig
from .seeding import rng_from, stable_seed
from .swapplan import (
    SwapCandidate,
    SwapPlan,
    attribute_candidates,
    attribute_candidates_perfect,
    build_swap_plan,
    class_candidates,
    read_plan_file,
    write_plan_file,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousSelection",
    "AnswerLogEntry",
    "AugmentConfig",
    "BadMagic",
    "BaselineModel",
    "BoundingBox",
    "ContextSet",
    "DanglingDependency",
    "DatasetBundle",
    "DetectedObject",
    "DimensionMismatch",
    "DonorUnmatched",
    "EmbeddingTable",
    "EmptyClass",
    "EncoderConfig",
    "FAILURE_ANSWER",
    "FeatureMatrix",
    "ImageMismatch",
    "IncompleteLog",
    "IndexOutOfRange",
    "InvariantViolation",
    "MalformedInput",
    "MatchTable",
    "ModelFailure",
    "ObjectAnnotation",
    "Question",
    "ReasoningStep",
    "Relation",
    "RobustnessReport",
    "RunConfig",
    "SceneGraph",
    "SwapCandidate",
    "SwapMixError",
    "SwapPlan",
    "TruncatedFile",
    "UnknownLabel",
    "UnsupportedOperation",
    "VersionUnsupported",
    "apply_swap",
    "attribute_candidates",
    "attribute_candidates_perfect",
    "bridge_export",
    "bridge_import",
    "build_indices",
    "build_swap_plan",
    "class_candidates",
    "compute_report",
    "decide_swap",
    "emit_report",
    "encode_object",
    "encode_scene",
    "enumerate_perturbations",
    "identify_context",
    "iou",
    "load_bundle",
    "load_embeddings",
    "load_features_dir",
    "match_detections",
    "normalize_answer",
    "parse_questions",
    "parse_scene_graphs",
    "read_answer_file",
    "read_feature_file",
    "read_plan_file",
    "report_as_dict",
    "rng_from",
    "stable_seed",
    "symbolic_execute",
    "validate_scene_graph",
    "write_answer_file",
    "write_feature_file",
    "write_plan_file",
]
