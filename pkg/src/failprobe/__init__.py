"""Mortality-prediction failure analysis over day-bucketed clinical-note embeddings.

Pipeline: cohort selection -> note bucketing with forward fill -> embedding
store -> repeated linear-head training -> confusion reports and failure-subgroup
analysis. A synthetic planted-confounder benchmark exercises the whole chain.
"""
from .analysis import (
    ClassHistogram,
    PatientProfile,
    SubgroupReport,
    build_analysis,
    build_profiles,
    failure_subgroup,
    histogram,
    nursing_distinctness,
    subgroup_ratios,
)
from .bucketing import (
    BucketCell,
    BucketGrid,
    Fill,
    NoteCategory,
    assign_day,
    build_grid,
    export_buckets,
    forward_fill,
    load_notes,
    read_bucket_export,
)
from .cohort import (
    AdmissionRecord,
    CohortMember,
    Label,
    ReadmissionFeatures,
    load_admissions,
    readmission_features,
    read_cohort,
    select_cohort,
    write_cohort,
)
from .errors import (
    DataValidationError,
    FailprobeError,
    MissingClassError,
    MissingEmbeddingError,
    NumericalError,
    StoreFormatError,
)
from .harness import (
    ConfusionMatrix,
    ExperimentConfig,
    PredictionRecord,
    aggregate,
    metrics,
    mix64,
    read_prediction_log,
    run_experiment,
    write_prediction_log,
)
from .head import Head, SigmoidHeadClassifier, TrainConfig, init_head, sigmoid, train
from .store import (
    EmbeddingStore,
    StubTextEmbedder,
    assemble_features,
    read_store,
    stub_embed,
    validate_store,
    write_store,
)
from .synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "AdmissionRecord",
    "BucketCell",
    "BucketGrid",
    "ClassHistogram",
    "CohortMember",
    "ConfusionMatrix",
    "DataValidationError",
    "EmbeddingStore",
    "ExperimentConfig",
    "FailprobeError",
    "Fill",
    "Head",
    "Label",
    "MissingClassError",
    "MissingEmbeddingError",
    "NoteCategory",
    "NumericalError",
    "PatientProfile",
    "PredictionRecord",
    "ReadmissionFeatures",
    "SigmoidHeadClassifier",
    "StoreFormatError",
    "StubTextEmbedder",
    "SubgroupReport",
    "SynthConfig",
    "TrainConfig",
    "aggregate",
    "assemble_features",
    "assign_day",
    "build_analysis",
    "build_grid",
    "build_profiles",
    "export_buckets",
    "failure_subgroup",
    "forward_fill",
    "generate",
    "histogram",
    "init_head",
    "load_admissions",
    "load_notes",
    "metrics",
    "mix64",
    "nursing_distinctness",
    "read_bucket_export",
    "read_cohort",
    "read_prediction_log",
    "read_store",
    "readmission_features",
    "run_experiment",
    "select_cohort",
    "sigmoid",
    "stub_embed",
    "subgroup_ratios",
    "train",
    "validate_store",
    "write_cohort",
    "write_prediction_log",
    "write_store",
]
