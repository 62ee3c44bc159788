"""Vocabulary-informed semantic embeddings for supervised, zero-shot and open-set recognition."""

from .core import (LabeledFeatures, NeighborSets, SemanticVocabulary, build_neighbor_sets,
                   nearest_prototypes, project)
from .errors import (ConfigError, DataFormatError, DegenerateSampleError, ModelMismatchError,
                     NumericalError, ShapeError, VocabEmbedError)
from .evaluation import ausuc, evaluate, false_positive_rate, harmonic_mean, openness, topk_accuracy
from .evt import ClassWeights, WeibullFit, compute_all_weights, fit_weibull_min
from .kernels import BACKEND
from .loss import LossConfig, Objective, objective
from .recognition import batch_classify, candidate_set, classify
from .solver import SolverConfig, train

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ClassWeights", "ConfigError", "DataFormatError", "DegenerateSampleError",
    "LabeledFeatures", "LossConfig", "ModelMismatchError", "NeighborSets", "NumericalError",
    "Objective", "SemanticVocabulary", "ShapeError", "SolverConfig", "VocabEmbedError",
    "WeibullFit", "ausuc", "batch_classify", "build_neighbor_sets", "candidate_set", "classify",
    "compute_all_weights", "evaluate", "false_positive_rate", "fit_weibull_min", "harmonic_mean",
    "nearest_prototypes", "objective", "openness", "project", "topk_accuracy", "train",
]
