"""Omission-score saliency and target-word selection.

A token's importance is the logit drop its deletion causes on the
substitute model. Deletion is literal: the reduced document is
materialized and re-featurized, so adjacent n-grams change exactly as
they would for real text. When the deletion flips the prediction away
from the protected label, the gain of the new label is added on top
(flips reward the deletion). When the model already predicts another
label before any deletion, the plain logit difference is reported and
the mismatch is visible through pre_label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelError
from .models import ClassifierModel
from .text import Document


@dataclass(frozen=True)
class ImportanceScore:
    token_index: int
    token: str
    score: float
    pre_label: str
    post_label: str


@dataclass(frozen=True)
class TargetSet:
    indices: tuple[int, ...]
    scores: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(self.indices))
        object.__setattr__(self, "scores", tuple(self.scores))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)


def delete_token(doc: Document, index: int) -> Document:
    tokens = doc.tokens[:index] + doc.tokens[index + 1:]
    return Document(id=doc.id, tokens=tokens, raw=doc.raw, label=doc.label)


def omission_scores(model: ClassifierModel, doc: Document, y: str) -> list[ImportanceScore]:
    """Score every token position of ``doc`` by deleting it and rescoring."""
    if len(doc.tokens) == 0:
        raise ModelError("cannot compute omission scores for an empty document")
    y_index = model.label_index(y)
    base = model.logits(doc)
    pre_label = model.labels[int(np.argmax(base))]

    scores = []
    for i, token in enumerate(doc.tokens):
        reduced_logits = model.logits(delete_token(doc, i))
        post_index = int(np.argmax(reduced_logits))
        post_label = model.labels[post_index]
        score = float(base[y_index] - reduced_logits[y_index])
        if pre_label == y and post_label != y:
            score += float(reduced_logits[post_index] - base[post_index])
        scores.append(ImportanceScore(token_index=i, token=token, score=score,
                                      pre_label=pre_label, post_label=post_label))
    return scores


def select_targets(scores, k: int, min_score: float = 0.0) -> TargetSet:
    """Indices with score >= min_score, descending by score (ties keep the
    lower token index first), truncated to k."""
    if k < 1:
        raise ModelError(f"k must be >= 1, got {k}")
    kept = [s for s in scores if s.score >= min_score]
    kept.sort(key=lambda s: (-s.score, s.token_index))
    kept = kept[:k]
    return TargetSet(indices=tuple(s.token_index for s in kept),
                     scores=tuple(s.score for s in kept))
