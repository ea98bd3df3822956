"""nightshift: night-to-day image translation for retrieval-based localization.

The public surface is a set of sklearn-style estimators over a functional
numpy core: dense RootSIFT extraction, VLAD encoding with an optional PCA
projection, brute-force place retrieval with pose-threshold evaluation,
and a small GAN translator trained on unpaired day/night images.
"""

from .features import DenseRootSift, LocalDescriptor, extract_dense, rootsift
from .geoeval import Pose, evaluate_retrieval, pose_error, threshold_accuracy
from .retrieval import Match, PlaceRetriever, build_index, query, query_dual
from .training import NightToDayTranslator, TrainConfig, fit_translator, translate
from .vlad import (
    DescriptorPca,
    PcaModel,
    VladDescriptor,
    VladEncoder,
    Vocabulary,
    kmeans_fit,
    pca_fit,
    pca_project,
    vlad_aggregate,
)

__version__ = "0.1.0"

__all__ = [
    "DenseRootSift",
    "DescriptorPca",
    "LocalDescriptor",
    "Match",
    "NightToDayTranslator",
    "PcaModel",
    "PlaceRetriever",
    "Pose",
    "TrainConfig",
    "VladDescriptor",
    "VladEncoder",
    "Vocabulary",
    "build_index",
    "evaluate_retrieval",
    "extract_dense",
    "fit_translator",
    "kmeans_fit",
    "pca_fit",
    "pca_project",
    "pose_error",
    "query",
    "query_dual",
    "rootsift",
    "threshold_accuracy",
    "translate",
    "vlad_aggregate",
    "__version__",
]
