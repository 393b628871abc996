"""Shared hand-built models and fixture corpora."""

import numpy as np
import pytest

from veil.candidates import EmbeddingTable
from veil.features import FeatureConfig, FeatureSpace
from veil.models import ClassifierModel
from veil.text import Document


def build_hand_model(vocab, weights, bias, labels=("a", "b"), config=None):
    """Linear model over binary unigram features with explicit weights.

    ``weights`` maps label -> {token: weight}; anything unlisted is 0.
    """
    config = config or FeatureConfig(word_ngrams=(1, 1), weighting="binary")
    grams = sorted(f"w:{tok}" for tok in vocab)
    space = FeatureSpace(gram_index={g: i for i, g in enumerate(grams)},
                         idf=np.ones(len(grams)), config=config, n_docs_fit=1)
    w = np.zeros((len(labels), len(grams)))
    for row, label in enumerate(labels):
        for token, weight in weights.get(label, {}).items():
            w[row, space.gram_index[f"w:{token}"]] = weight
    b = np.array([bias.get(label, 0.0) for label in labels])
    return ClassifierModel(kind="logreg", space=space, weights=w, bias=b,
                           labels=tuple(labels), role="substitute")


@pytest.fixture
def ugly_model():
    """w_b('ugly') = +1, everything else 0: deleting 'ugly' flips b -> a."""
    return build_hand_model(vocab=("you", "are", "ugly", "plain"),
                            weights={"b": {"ugly": 1.0}}, bias={})


@pytest.fixture
def attack_model():
    """w_b('ugly') = +2, bias_a = 0.5: 'you are ugly' scores o=(0.5, 2.0)."""
    return build_hand_model(vocab=("you", "are", "ugly", "plain"),
                            weights={"b": {"ugly": 2.0}}, bias={"a": 0.5})


@pytest.fixture
def ugly_doc():
    return Document(id="t1", tokens=("you", "are", "ugly"), raw="you are ugly",
                    label="b")


@pytest.fixture
def plain_embeddings():
    """cos(ugly, plain) = 0.8; 'you'/'are' orthogonal to both."""
    return EmbeddingTable(vectors={
        "ugly": np.array([1.0, 0.0, 0.0]),
        "plain": np.array([0.8, 0.6, 0.0]),
        "you": np.array([0.0, 0.0, 1.0]),
        "are": np.array([0.0, 0.0, 1.0]),
    }, dim=3)
