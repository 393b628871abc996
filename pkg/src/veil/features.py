"""Sparse n-gram features with tf-idf, binary, and character-n-gram options.

Word n-grams and character n-grams share one feature space; keys are
namespaced ("w:" / "c:") so a character hexa-gram can never collide with
a word unigram. Character n-grams are extracted within tokens only, so a
token shorter than the gram length contributes nothing and a token of
exactly that length contributes one gram.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import FeatureError
from .text import Document, LabeledCorpus

WORD_PREFIX = "w:"
CHAR_PREFIX = "c:"


@dataclass(frozen=True)
class FeatureConfig:
    word_ngrams: tuple[int, int] = (1, 2)
    char_ngrams: int | None = None
    weighting: str = "tfidf"          # binary | tfidf
    sublinear_tf: bool = False
    min_df: int = 1
    max_df_fraction: float = 1.0
    l2_normalize: bool = False
    # Grams containing any of these tokens are never indexed (used to keep
    # augmentation marker tokens out of the vocabulary).
    exclude_tokens: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "word_ngrams", tuple(self.word_ngrams))
        object.__setattr__(self, "exclude_tokens", tuple(self.exclude_tokens))
        lo, hi = self.word_ngrams
        if not (1 <= lo <= hi <= 3):
            raise FeatureError(f"word_ngrams must satisfy 1 <= lo <= hi <= 3, got {self.word_ngrams}")
        if self.char_ngrams is not None and self.char_ngrams < 1:
            raise FeatureError(f"char_ngrams must be >= 1, got {self.char_ngrams}")
        if self.weighting not in ("binary", "tfidf"):
            raise FeatureError(f"weighting must be 'binary' or 'tfidf', got {self.weighting!r}")
        if self.min_df < 1:
            raise FeatureError(f"min_df must be >= 1, got {self.min_df}")
        if not 0.0 < self.max_df_fraction <= 1.0:
            raise FeatureError(f"max_df_fraction must be in (0,1], got {self.max_df_fraction}")


@dataclass(frozen=True)
class SparseVector:
    """Pairs of (column, value), strictly increasing by column, no zeros."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    def __len__(self) -> int:
        return len(self.indices)

    def pairs(self):
        return zip(self.indices.tolist(), self.values.tolist())

    def dot(self, weights_row: np.ndarray) -> float:
        if len(self.indices) == 0:
            return 0.0
        return float(weights_row[self.indices] @ self.values)


EMPTY_VECTOR = SparseVector(indices=np.empty(0, dtype=np.int64),
                            values=np.empty(0, dtype=np.float64))


def _gram_counts(tokens, config: FeatureConfig) -> Counter:
    excluded = set(config.exclude_tokens)
    counts: Counter = Counter()
    usable = list(tokens)
    lo, hi = config.word_ngrams
    n_tok = len(usable)
    for n in range(lo, hi + 1):
        for i in range(n_tok - n + 1):
            window = usable[i:i + n]
            if excluded and any(t in excluded for t in window):
                continue
            counts[WORD_PREFIX + " ".join(window)] += 1
    if config.char_ngrams is not None:
        length = config.char_ngrams
        for token in usable:
            if excluded and token in excluded:
                continue
            for i in range(len(token) - length + 1):
                counts[CHAR_PREFIX + token[i:i + length]] += 1
    return counts


@dataclass(frozen=True)
class FeatureSpace:
    gram_index: dict[str, int]
    idf: np.ndarray
    config: FeatureConfig
    n_docs_fit: int

    def __post_init__(self):
        idf = np.asarray(self.idf, dtype=np.float64)
        idf.setflags(write=False)
        object.__setattr__(self, "idf", idf)

    @property
    def n_columns(self) -> int:
        return len(self.gram_index)

    @property
    def grams(self) -> list[str]:
        """Gram strings in column order."""
        ordered = [""] * len(self.gram_index)
        for gram, col in self.gram_index.items():
            ordered[col] = gram
        return ordered


def fit(corpus: LabeledCorpus, config: FeatureConfig) -> FeatureSpace:
    """Build the gram inventory and smoothed idf weights.

    Grams with document frequency < min_df or > max_df_fraction * N are
    dropped; idf = ln((1+N)/(1+df)) + 1. Column order is lexicographic
    over the namespaced gram strings.
    """
    if len(corpus) == 0:
        raise FeatureError("cannot fit features on an empty corpus")
    n_docs = len(corpus)
    df: Counter = Counter()
    for doc in corpus.documents:
        for gram in _gram_counts(doc.tokens, config).keys():
            df[gram] += 1
    max_df = config.max_df_fraction * n_docs
    survivors = sorted(g for g, d in df.items() if d >= config.min_df and d <= max_df)
    if not survivors:
        raise FeatureError("effective vocabulary is empty after df filtering")
    gram_index = {gram: col for col, gram in enumerate(survivors)}
    idf = np.array([math.log((1 + n_docs) / (1 + df[g])) + 1.0 for g in survivors])
    return FeatureSpace(gram_index=gram_index, idf=idf, config=config, n_docs_fit=n_docs)


def transform(space: FeatureSpace, doc: Document) -> SparseVector:
    """Map a document onto the fitted space; unknown grams are ignored."""
    config = space.config
    counts = _gram_counts(doc.tokens, config)
    cols = []
    vals = []
    for gram, tf in counts.items():
        col = space.gram_index.get(gram)
        if col is None:
            continue
        if config.weighting == "binary":
            value = 1.0
        else:
            tf_term = 1.0 + math.log(tf) if config.sublinear_tf else float(tf)
            value = tf_term * float(space.idf[col])
        if value != 0.0:
            cols.append(col)
            vals.append(value)
    if not cols:
        return EMPTY_VECTOR
    order = np.argsort(np.array(cols))
    indices = np.array(cols, dtype=np.int64)[order]
    values = np.array(vals, dtype=np.float64)[order]
    if config.l2_normalize:
        norm = float(np.linalg.norm(values))
        if norm > 0.0:
            values = values / norm
    return SparseVector(indices=indices, values=values)
