"""Multiple-choice question answering over visual cue channels.

Each cue channel gets a regularized two-view embedding aligning image
features with text embeddings; candidates are ranked by correlation-
weighted cosine similarity, optionally after selecting the best image
region, and cue scores are fused with grid-searched convex weights.
"""

from .cca import DEFAULT_POWER, DEFAULT_REG, CcaEmbedding, projected_cosine
from .config import CueSpec, RunConfig, load_config
from .cues import (
    CueConfig,
    CueScores,
    score_cue_fullimage,
    score_cue_region,
    score_cue_region_per_candidate,
    select_region,
)
from .data import (
    FeatureStore,
    QuestionInstance,
    RegionFeature,
    ValidationProblem,
    load_features,
    load_questions,
    save_features,
    save_questions,
    validate_dataset,
    whole_image_bbox,
)
from .errors import (
    ConfigError,
    DataError,
    McqaError,
    NumericError,
)
from .evaluate import (
    EvalReport,
    LexiconStats,
    Tally,
    TransferReport,
    cue_word_statistics,
    evaluate,
    load_lexicons,
    score_questions,
    single_cue_tally,
    train_shared_embedding,
    training_pairs,
    transfer_matrix,
)
from .fusion import (
    CueScoreTensor,
    FusionWeights,
    decide,
    fuse_scores,
    learn_weights,
    load_weights,
    save_weights,
    simplex_units,
)
from .synthetic import paired_views, write_demo_dataset
from .text import WordVectorTable, tokenize

__version__ = "0.1.0"

__all__ = [
    "CcaEmbedding",
    "ConfigError",
    "CueConfig",
    "CueScoreTensor",
    "CueScores",
    "CueSpec",
    "DataError",
    "DEFAULT_POWER",
    "DEFAULT_REG",
    "EvalReport",
    "FeatureStore",
    "FusionWeights",
    "LexiconStats",
    "McqaError",
    "NumericError",
    "QuestionInstance",
    "RegionFeature",
    "RunConfig",
    "Tally",
    "TransferReport",
    "ValidationProblem",
    "WordVectorTable",
    "cue_word_statistics",
    "decide",
    "evaluate",
    "fuse_scores",
    "learn_weights",
    "load_config",
    "load_features",
    "load_lexicons",
    "load_questions",
    "load_weights",
    "paired_views",
    "projected_cosine",
    "save_features",
    "save_questions",
    "save_weights",
    "score_cue_fullimage",
    "score_cue_region",
    "score_cue_region_per_candidate",
    "score_questions",
    "select_region",
    "simplex_units",
    "single_cue_tally",
    "tokenize",
    "train_shared_embedding",
    "training_pairs",
    "transfer_matrix",
    "validate_dataset",
    "whole_image_bbox",
    "write_demo_dataset",
]
