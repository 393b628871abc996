"""Synthetic two-class corpora with planted embedding neighbors.

Stands in for the non-redistributable social-media corpora: documents
mix a shared filler vocabulary with class-marker words, and a companion
embedding table plants synonyms next to each marker. Geometry is fully
controlled: every marker owns a 2-D plane whose rotations are its
synonyms, and every filler owns its own axis, so markers are the only
tokens with nearest neighbors above the usual cosine threshold.

The ``cross_class_synonym_rate`` knob mixes rank-1 synonyms of one
class's markers into the *other* class's documents. Substituting a
marker with its planted synonym then actively pushes a classifier
toward the opposite label, which is what makes the synonym attack bite
on substitute and target models alike. Set it to 0 for augmentation
experiments where synonyms should start out unseen.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .candidates import EmbeddingTable
from .errors import VeilError
from .text import Document, LabeledCorpus

SYNONYM_ANGLES = (0.32, 0.5, 0.64)   # cos: ~0.949, ~0.878, ~0.802


@dataclass(frozen=True)
class FixtureSpec:
    n_docs: int = 400
    n_filler_words: int = 60
    n_marker_words: int = 8            # per class
    noise_rate: float = 0.0            # chance of an other-class marker
    seed: int = 13
    labels: tuple[str, str] = ("a", "b")
    min_filler_tokens: int = 12
    max_filler_tokens: int = 16
    two_marker_rate: float = 0.3
    synonyms_per_marker: int = 3
    cross_class_synonym_rate: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.n_docs < 4 or self.n_filler_words < 1 or self.n_marker_words < 1:
            raise VeilError("fixture needs n_docs >= 4 and positive vocab sizes")
        if len(self.labels) != 2 or self.labels[0] >= self.labels[1]:
            raise VeilError("fixture labels must be two distinct sorted strings")
        if not 1 <= self.synonyms_per_marker <= len(SYNONYM_ANGLES):
            raise VeilError(f"synonyms_per_marker must be 1..{len(SYNONYM_ANGLES)}")

    def marker_words(self, label: str) -> list[str]:
        return [f"m{label}{i}" for i in range(self.n_marker_words)]

    def synonym_words(self, label: str, marker_index: int) -> list[str]:
        return [f"s{label}{marker_index}r{r}" for r in range(self.synonyms_per_marker)]

    def filler_words(self) -> list[str]:
        return [f"f{i:03d}" for i in range(self.n_filler_words)]


def make_fixture(spec: FixtureSpec) -> LabeledCorpus:
    """Deterministic two-class corpus; every document carries one or two
    own-class markers inside shared filler text."""
    rng = random.Random(spec.seed)
    fillers = spec.filler_words()
    markers = {label: spec.marker_words(label) for label in spec.labels}

    docs = []
    for i in range(spec.n_docs):
        label = spec.labels[i % 2]
        other = spec.labels[1 - i % 2]
        n_markers = 2 if rng.random() < spec.two_marker_rate else 1
        n_fill = rng.randint(spec.min_filler_tokens, spec.max_filler_tokens)
        if n_markers == 2:
            # Keep the worst-case change rate of a full-marker rewrite low.
            n_fill = max(n_fill, 13)
        tokens = [rng.choice(fillers) for _ in range(n_fill)]
        for _ in range(n_markers):
            tokens.insert(rng.randint(0, len(tokens)), rng.choice(markers[label]))
        if rng.random() < spec.noise_rate:
            tokens.insert(rng.randint(0, len(tokens)), rng.choice(markers[other]))
        if rng.random() < spec.cross_class_synonym_rate:
            # A rank-1 synonym of an *other*-class marker occurs naturally
            # here, giving classifiers an opposite-label anchor for it.
            marker_index = rng.randrange(spec.n_marker_words)
            tokens.insert(rng.randint(0, len(tokens)),
                          spec.synonym_words(other, marker_index)[0])
        docs.append(Document(id=f"d{i}", tokens=tuple(tokens),
                             raw=" ".join(tokens), label=label))
    return LabeledCorpus(documents=tuple(docs), labels=spec.labels)


def make_fixture_embeddings(spec: FixtureSpec) -> EmbeddingTable:
    """Companion table: marker m sits on its own plane's first axis, its
    synonyms are rotations within that plane (cosines ~0.95/0.88/0.80),
    fillers sit on dedicated axes. All cross-word cosines are 0."""
    n_markers_total = 2 * spec.n_marker_words
    dim = 2 * n_markers_total + spec.n_filler_words
    vectors: dict[str, np.ndarray] = {}

    plane = 0
    for label in spec.labels:
        for marker_index, marker in enumerate(spec.marker_words(label)):
            axis_a = 2 * plane
            axis_b = 2 * plane + 1
            vec = np.zeros(dim)
            vec[axis_a] = 1.0
            vectors[marker] = vec
            for rank, synonym in enumerate(spec.synonym_words(label, marker_index)):
                angle = SYNONYM_ANGLES[rank]
                svec = np.zeros(dim)
                svec[axis_a] = math.cos(angle)
                svec[axis_b] = math.sin(angle)
                vectors[synonym] = svec
            plane += 1

    for filler_index, filler in enumerate(spec.filler_words()):
        vec = np.zeros(dim)
        vec[2 * n_markers_total + filler_index] = 1.0
        vectors[filler] = vec
    return EmbeddingTable(vectors=vectors, dim=dim)


def write_fixture_files(spec: FixtureSpec, corpus_path, embeddings_path) -> LabeledCorpus:
    """Write the corpus as jsonl and the companion embeddings as text."""
    import json
    from pathlib import Path

    corpus = make_fixture(spec)
    with Path(corpus_path).open("w", encoding="utf-8") as handle:
        for doc in corpus.documents:
            handle.write(json.dumps({"id": doc.id, "text": doc.raw,
                                     "label": doc.label}, sort_keys=True) + "\n")
    make_fixture_embeddings(spec).save(embeddings_path)
    return corpus
