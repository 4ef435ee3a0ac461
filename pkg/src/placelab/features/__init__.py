"""Per-community feature extraction: text, interaction network, meta, embeddings."""

from .assemble import (
    BLOCK_NAMES,
    EmbeddingWindowError,
    FeatureMatrix,
    WindowFeatureBuilder,
    assemble,
    load_feature_matrix,
    save_feature_matrix,
)
from .graph import InteractionGraph, NETWORK_SCHEMA, build_interaction_graph, network_features
from .meta import META_SCHEMA, meta_features
from .text import TfidfModel, category_features, category_weights, fit_tfidf, tokenize

__all__ = [
    "BLOCK_NAMES",
    "EmbeddingWindowError",
    "FeatureMatrix",
    "InteractionGraph",
    "META_SCHEMA",
    "NETWORK_SCHEMA",
    "TfidfModel",
    "WindowFeatureBuilder",
    "assemble",
    "build_interaction_graph",
    "category_features",
    "category_weights",
    "fit_tfidf",
    "load_feature_matrix",
    "meta_features",
    "network_features",
    "save_feature_matrix",
    "tokenize",
]
