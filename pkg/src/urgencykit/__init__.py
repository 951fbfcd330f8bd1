"""Low-supervision urgency detection for short crisis messages.

Trains subword skip-gram embeddings on an unlabeled background corpus,
combines them with keyword features and pre-trained general-corpus vectors
in a weighted classifier ensemble, and supports transfer to a new crisis
plus human-in-the-loop active labeling.
"""

__version__ = "0.1.0"

from .preprocess import Message, TokenizedMessage, tokenize
from .features import extract_manual_features, DEFAULT_KEYWORDS
from .embedding import (
    EmbeddingModel,
    SubwordHyperparams,
    train_subword_skipgram,
    word_vector,
    sentence_vector,
    load_pretrained_vectors,
)
from .ensemble import (
    LabeledDataset,
    EnsembleModel,
    Featurizer,
    fit_ensemble,
    ensemble_score,
    classify,
    select_threshold,
    transfer_train,
)
from .linear import ProbabilisticLinearModel, train_probabilistic_linear, predict_proba
from .evaluation import (
    ConfusionCounts,
    compute_metrics,
    stratified_split,
    run_rq1_experiment,
    run_rq2_experiment,
)
from .stats import paired_t_test
from .active import ActiveSession, Schedule
from .config import PipelineConfig

__all__ = [
    "Message",
    "TokenizedMessage",
    "tokenize",
    "extract_manual_features",
    "DEFAULT_KEYWORDS",
    "EmbeddingModel",
    "SubwordHyperparams",
    "train_subword_skipgram",
    "word_vector",
    "sentence_vector",
    "load_pretrained_vectors",
    "LabeledDataset",
    "EnsembleModel",
    "Featurizer",
    "fit_ensemble",
    "ensemble_score",
    "classify",
    "select_threshold",
    "transfer_train",
    "ProbabilisticLinearModel",
    "train_probabilistic_linear",
    "predict_proba",
    "ConfusionCounts",
    "compute_metrics",
    "stratified_split",
    "run_rq1_experiment",
    "run_rq2_experiment",
    "paired_t_test",
    "ActiveSession",
    "Schedule",
    "PipelineConfig",
]
