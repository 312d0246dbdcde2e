"""Online cost-aware teacher-student routing.

Cache an expensive teacher classifier's answers, train a cheap local student
on the cache, and gate each incoming instance on two signals (distance to the
weighted neighbor centroid, entropy of the student's class distribution) to
decide whether the student can be trusted or the teacher must be called.
"""

from .cache import Cache, CacheEntry, Neighbor, neighbor_weight
from .domain import (
    EmbeddedInstance,
    Instance,
    LabelSpace,
    cosine_distance,
    shannon_entropy,
    validate_embedding,
)
from .embedding import HashedEmbedder, hashed_embedding
from .errors import (
    ConfigError,
    DegenerateVectorError,
    DimensionError,
    EmptyCacheError,
    EmptyNeighborhoodError,
    EmptyTraceError,
    EmptyTrainingError,
    FixtureMissError,
    FormatError,
    InsufficientClassError,
    IoError,
    MissingEmbeddingError,
    MissingGoldError,
    OcatsError,
    OracleNeedsGoldError,
    SchemaError,
    TeacherProtocolError,
    TeacherUnavailableError,
    TraceShapeError,
    UnknownLabelError,
)
from .experiments import (
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    load_config,
    run_simulation,
    run_split,
    run_tuning,
)
from .gate import GateDecision, Thresholds, bootstrap_decision, decide
from .ingest import (
    Dataset,
    FewShotSplit,
    Stream,
    attach_embeddings,
    load_dataset,
    load_embeddings,
    make_few_shot_split,
    make_streams,
)
from .metrics import (
    DiscountedScore,
    RunTrace,
    TraceStep,
    accuracy,
    aggregate,
    discounted,
    score_trace,
    trajectory,
)
from .router import Router, RouterConfig, ServeResult, make_student, run_stream
from .students import (
    KnnStudent,
    MlpClassifier,
    MlpConfig,
    MlpStudent,
    StudentPrediction,
    WeightedKnnClassifier,
    knn_predict,
    mlp_predict,
    mlp_train,
    weighted_centroid,
)
from .teachers import (
    LiveTeacher,
    OracleTeacher,
    PromptBundle,
    RecordingTeacher,
    ReplayTeacher,
    TeacherResponse,
    build_prompt,
    canonical_label,
)
from .tuner import (
    SearchSpace,
    ThresholdEvaluator,
    TpeConfig,
    TunerObservation,
    TuneResult,
    grid_search,
    tpe_suggest,
    tune,
)

__version__ = "0.1.0"

__all__ = [
    "Cache",
    "CacheEntry",
    "ConfigError",
    "Dataset",
    "DegenerateVectorError",
    "DimensionError",
    "DiscountedScore",
    "EmbeddedInstance",
    "EmptyCacheError",
    "EmptyNeighborhoodError",
    "EmptyTraceError",
    "EmptyTrainingError",
    "ExperimentConfig",
    "FewShotSplit",
    "FixtureMissError",
    "FormatError",
    "GateDecision",
    "HashedEmbedder",
    "InsufficientClassError",
    "Instance",
    "IoError",
    "KnnStudent",
    "LabelSpace",
    "LiveTeacher",
    "MissingEmbeddingError",
    "MissingGoldError",
    "MlpClassifier",
    "MlpConfig",
    "MlpStudent",
    "Neighbor",
    "OcatsError",
    "OracleNeedsGoldError",
    "OracleTeacher",
    "PromptBundle",
    "RecordingTeacher",
    "ReplayTeacher",
    "Router",
    "RouterConfig",
    "RunTrace",
    "SchemaError",
    "SearchSpace",
    "ServeResult",
    "Stream",
    "StudentPrediction",
    "TeacherProtocolError",
    "TeacherResponse",
    "TeacherUnavailableError",
    "ThresholdEvaluator",
    "Thresholds",
    "TpeConfig",
    "TraceShapeError",
    "TraceStep",
    "TuneResult",
    "TunerObservation",
    "UnknownLabelError",
    "WeightedKnnClassifier",
    "accuracy",
    "aggregate",
    "attach_embeddings",
    "bootstrap_decision",
    "build_prompt",
    "canonical_label",
    "config_from_dict",
    "config_to_dict",
    "cosine_distance",
    "decide",
    "discounted",
    "grid_search",
    "hashed_embedding",
    "knn_predict",
    "load_config",
    "load_dataset",
    "load_embeddings",
    "make_few_shot_split",
    "make_streams",
    "make_student",
    "mlp_predict",
    "mlp_train",
    "neighbor_weight",
    "run_simulation",
    "run_split",
    "run_stream",
    "run_tuning",
    "score_trace",
    "shannon_entropy",
    "tpe_suggest",
    "trajectory",
    "tune",
    "validate_embedding",
    "weighted_centroid",
]
