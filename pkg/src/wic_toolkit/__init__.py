"""Toolkit for binary word-in-context disambiguation.

Pairs of sentences sharing a target word are encoded with a contextual
encoder, the target's sub-token vectors are max-pooled, and a small head
(an MLP over concatenated vectors, or plain cosine similarity) scores
whether the word carries the same meaning in both sentences. Includes
dataset handling for MCL-WiC and SuperGLUE WiC formats, ROC-based
threshold calibration, a fine-tuning loop with early stopping, and error
analysis utilities.
"""

from .calibration import (
    CalibrationResult,
    RocCurve,
    RocPoint,
    fixed_threshold,
    roc_curve,
    youden_threshold,
)
from .datasets import (
    POS_UNKNOWN,
    Corpus,
    SplitConfig,
    WicPair,
    load_corpus,
    load_mclwic,
    load_superglue_wic,
    merge,
    save_corpus,
    split_by_lemma,
    validate_pair,
)
from .encoding import (
    ContextualEncoder,
    EncoderOutput,
    PairEmbedding,
    ToyEncoder,
    align_target_subtokens,
    encode_pair,
    max_pool,
)
from .errors import (
    AlignmentError,
    CalibrationError,
    ConfigError,
    DataFormatError,
    DegenerateEmbeddingError,
    EncoderRegistryError,
    EvaluationError,
    GoldJoinError,
    MergeError,
    OutputLockError,
    SpanValidationError,
    SplitError,
    TrainingError,
    WicError,
)
from .evaluation import (
    ErrorGroupReport,
    EvaluationReport,
    error_intersection,
    evaluate,
    read_submission,
    shared_first_sentence_errors,
    write_submission,
)
from .heads import (
    CosineHead,
    CosineHeadConfig,
    MlpHead,
    MlpHeadConfig,
    build_head,
    cosine_similarity,
    decide,
    parameter_count,
)
from .registry import available_encoders, create_encoder
from .training import (
    Checkpoint,
    EarlyStopper,
    TrainConfig,
    TrainHistory,
    bce_loss,
    load_checkpoint,
    make_checkpoint,
    predict_scores,
    save_checkpoint,
    score_pair,
    simulate_early_stopping,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "POS_UNKNOWN",
    "AlignmentError",
    "CalibrationError",
    "CalibrationResult",
    "Checkpoint",
    "ConfigError",
    "ContextualEncoder",
    "Corpus",
    "CosineHead",
    "CosineHeadConfig",
    "DataFormatError",
    "DegenerateEmbeddingError",
    "EarlyStopper",
    "EncoderOutput",
    "EncoderRegistryError",
    "ErrorGroupReport",
    "EvaluationError",
    "EvaluationReport",
    "GoldJoinError",
    "MergeError",
    "MlpHead",
    "MlpHeadConfig",
    "OutputLockError",
    "PairEmbedding",
    "RocCurve",
    "RocPoint",
    "SpanValidationError",
    "SplitConfig",
    "SplitError",
    "ToyEncoder",
    "TrainConfig",
    "TrainHistory",
    "TrainingError",
    "WicError",
    "WicPair",
    "align_target_subtokens",
    "available_encoders",
    "bce_loss",
    "build_head",
    "cosine_similarity",
    "create_encoder",
    "decide",
    "encode_pair",
    "error_intersection",
    "evaluate",
    "fixed_threshold",
    "load_checkpoint",
    "load_corpus",
    "load_mclwic",
    "load_superglue_wic",
    "make_checkpoint",
    "max_pool",
    "merge",
    "parameter_count",
    "predict_scores",
    "read_submission",
    "roc_curve",
    "save_checkpoint",
    "save_corpus",
    "score_pair",
    "shared_first_sentence_errors",
    "simulate_early_stopping",
    "split_by_lemma",
    "train",
    "validate_pair",
    "write_submission",
    "youden_threshold",
]
