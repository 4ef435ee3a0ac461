"""Feature-matrix assembly with deterministic column order.

Columns are grouped by block in the requested order and sorted by name
within each block. Embedding blocks impute missing communities per policy
(zeros plus a missing-indicator column by default), so downstream models
never see silent absent-as-zero values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..ingest import CategoryDictionary, CommunityMeta, EmbeddingTable
from ..windows import TimeWindow
from .graph import build_interaction_graph, network_features
from .meta import meta_features
from .text import category_weights, fit_tfidf, tokenize

BLOCK_NAMES = ("meta", "network", "bow", "categories", "snap", "com2vec", "graph2vec")
EMBEDDING_BLOCKS = ("snap", "com2vec", "graph2vec")
# Blocks whose weights are fitted on the community population; a static
# matrix holding them cannot be reused across CV folds without leakage.
POPULATION_FITTED_BLOCKS = ("bow",)

SCHEMA_VERSION = 1

IMPUTATION_POLICIES = ("zero_indicator", "mean_indicator")


class EmbeddingWindowError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureMatrix:
    communities: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray = field(repr=False)
    provenance: dict = field(default_factory=dict)

    def column_types(self) -> dict[str, str]:
        return dict(self.provenance.get("column_types", {}))

    def rows_for(self, communities) -> np.ndarray:
        index = {c: i for i, c in enumerate(self.communities)}
        return self.values[[index[c] for c in communities], :]


def assemble(
    communities,
    window: str,
    blocks,
    named_blocks: dict | None = None,
    matrix_blocks: dict | None = None,
    embeddings: dict | None = None,
    imputation: str = "zero_indicator",
) -> FeatureMatrix:
    """Stitch computed blocks into one dense matrix over ``communities``.

    ``named_blocks`` maps block -> community -> feature -> value;
    ``matrix_blocks`` maps block -> (column names, row-aligned array);
    ``embeddings`` maps block -> window key ("bp"/"dp"/"any") -> table.
    """
    if imputation not in IMPUTATION_POLICIES:
        raise ValueError(f"unknown imputation policy: {imputation}")
    named_blocks = named_blocks or {}
    matrix_blocks = matrix_blocks or {}
    embeddings = embeddings or {}
    communities = list(communities)

    columns: list[str] = []
    column_types: dict[str, str] = {}
    parts: list[np.ndarray] = []
    for block in blocks:
        if block in named_blocks:
            names, part = _from_named(communities, block, named_blocks[block])
        elif block in matrix_blocks:
            names, part = _from_matrix(block, *matrix_blocks[block])
        elif block in embeddings:
            names, part = _from_embedding(
                communities, window, block, embeddings[block], imputation
            )
        else:
            raise ValueError(f"block {block!r} requested but no data was provided")
        columns.extend(names)
        column_types.update({n: block for n in names})
        parts.append(part)

    values = np.hstack(parts) if parts else np.zeros((len(communities), 0))
    return FeatureMatrix(
        communities=tuple(communities),
        columns=tuple(columns),
        values=values,
        provenance={
            "window": window,
            "blocks": list(blocks),
            "column_types": column_types,
            "imputation": imputation,
            "schema_version": SCHEMA_VERSION,
        },
    )


def _from_named(communities, block, per_community):
    schema = None
    for c in communities:
        if c in per_community:
            schema = sorted(per_community[c])
            break
    if schema is None:
        raise ValueError(f"block {block!r} has no data for any requested community")
    part = np.zeros((len(communities), len(schema)), dtype=np.float64)
    for row, c in enumerate(communities):
        vector = per_community.get(c)
        if vector is None:
            continue
        if sorted(vector) != schema:
            raise ValueError(f"block {block!r} has an inconsistent schema for {c!r}")
        part[row] = [float(vector[name]) for name in schema]
    return [f"{block}.{name}" for name in schema], part


def _from_matrix(block, names, values):
    order = np.argsort(np.asarray(names, dtype=object), kind="stable")
    names = [str(names[i]) for i in order]
    return [f"{block}.{n}" for n in names], np.asarray(values, dtype=np.float64)[:, order]


def _from_embedding(communities, window, block, tables, imputation):
    table: EmbeddingTable | None = tables.get(window) or tables.get("any")
    if table is None:
        have = sorted(tables)
        raise EmbeddingWindowError(
            f"embedding block {block!r} has no table for window {window!r} "
            f"(available: {have})"
        )
    width = len(str(max(table.dim - 1, 0)))
    names = [f"d{str(i).zfill(max(width, 3))}" for i in range(table.dim)] + ["missing"]
    part = np.zeros((len(communities), table.dim + 1), dtype=np.float64)
    fill = np.zeros(table.dim)
    if imputation == "mean_indicator" and table.vectors:
        fill = np.mean(np.stack(list(table.vectors.values())), axis=0)
    for row, c in enumerate(communities):
        vec = table.vectors.get(c)
        if vec is None:
            part[row, : table.dim] = fill
            part[row, table.dim] = 1.0
        else:
            part[row, : table.dim] = vec
    return [f"{block}.{n}" for n in names], part


def save_feature_matrix(matrix: FeatureMatrix, csv_path) -> None:
    frame = pd.DataFrame(matrix.values, columns=list(matrix.columns))
    frame.insert(0, "community", list(matrix.communities))
    frame.to_csv(csv_path, index=False)
    with open(f"{csv_path}.meta.json", "w", encoding="utf-8") as handle:
        json.dump(matrix.provenance, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_feature_matrix(csv_path) -> FeatureMatrix:
    frame = pd.read_csv(csv_path)
    with open(f"{csv_path}.meta.json", "r", encoding="utf-8") as handle:
        provenance = json.load(handle)
    communities = tuple(str(c) for c in frame["community"])
    columns = tuple(c for c in frame.columns if c != "community")
    return FeatureMatrix(
        communities=communities,
        columns=columns,
        values=frame[list(columns)].to_numpy(dtype=np.float64),
        provenance=provenance,
    )


class WindowFeatureBuilder:
    """Computes feature blocks for one window with per-fold refitting.

    Per-community blocks (meta, network, categories, embeddings) are pure
    functions of that community's own data and are cached. The bag-of-words
    block is population-fitted, so :meth:`fit` re-derives its vocabulary
    from the given training communities only; cross-validation calls it per
    fold to keep test folds out of every fitted statistic.
    """

    def __init__(
        self,
        window_name: str,
        window: TimeWindow,
        blocks,
        items_by_community: dict[str, list],
        meta: dict[str, CommunityMeta],
        dictionary: CategoryDictionary | None = None,
        embeddings: dict[str, dict[str, EmbeddingTable]] | None = None,
        max_vocab: int = 5000,
        min_df: int = 5,
        imputation: str = "zero_indicator",
    ):
        unknown = set(blocks) - set(BLOCK_NAMES)
        if unknown:
            raise ValueError(f"unknown feature block(s): {sorted(unknown)}")
        if "categories" in blocks and dictionary is None:
            raise ValueError("categories block requested without a dictionary")
        self.window_name = window_name
        self.window = window
        self.blocks = tuple(blocks)
        self.items = items_by_community
        self.meta = meta
        self.dictionary = dictionary
        self.embeddings = embeddings or {}
        self.max_vocab = max_vocab
        self.min_df = min_df
        self.imputation = imputation
        self._tokens: dict[str, list[str]] = {}
        self._named_cache: dict[str, dict[str, dict[str, float]]] = {}
        self._tfidf = None

    def population_fitted(self) -> tuple[str, ...]:
        return tuple(b for b in self.blocks if b in POPULATION_FITTED_BLOCKS)

    def tokens_for(self, community: str) -> list[str]:
        if community not in self._tokens:
            text_tokens: list[str] = []
            for item in self.items.get(community, ()):
                text_tokens.extend(tokenize(item.text))
            self._tokens[community] = text_tokens
        return self._tokens[community]

    def _named_vector(self, block: str, community: str) -> dict[str, float]:
        cache = self._named_cache.setdefault(block, {})
        if community not in cache:
            items = self.items.get(community, [])
            if block == "meta":
                vector = meta_features(items, self.meta.get(community), self.window)
            elif block == "network":
                vector = network_features(build_interaction_graph(items))
            elif block == "categories":
                vector = category_weights(self.tokens_for(community), self.dictionary)
            else:
                raise KeyError(block)
            cache[community] = vector
        return cache[community]

    def fit(self, train_communities) -> "WindowFeatureBuilder":
        if "bow" in self.blocks:
            self._tfidf = fit_tfidf(
                [self.tokens_for(c) for c in train_communities],
                max_vocab=self.max_vocab,
                min_df=self.min_df,
            )
        return self

    def transform(self, communities) -> FeatureMatrix:
        communities = list(communities)
        named = {
            b: {c: self._named_vector(b, c) for c in communities}
            for b in self.blocks
            if b in ("meta", "network", "categories")
        }
        matrix_blocks = {}
        if "bow" in self.blocks:
            if self._tfidf is None:
                raise RuntimeError("fit() must run before transform() when bow is requested")
            weights = self._tfidf.transform([self.tokens_for(c) for c in communities])
            matrix_blocks["bow"] = (list(self._tfidf.vocabulary), weights)
        fm = assemble(
            communities,
            self.window_name,
            self.blocks,
            named_blocks=named,
            matrix_blocks=matrix_blocks,
            embeddings={b: self.embeddings[b] for b in self.blocks if b in self.embeddings},
            imputation=self.imputation,
        )
        if self._tfidf is not None:
            fm.provenance["vocab_size"] = len(self._tfidf.vocabulary)
        return fm

    def fit_transform(self, communities) -> FeatureMatrix:
        return self.fit(communities).transform(communities)
