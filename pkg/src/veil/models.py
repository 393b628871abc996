"""Linear classifiers over sparse n-gram features.

Logistic regression and linear SVM are trained with a seeded SGD
(per-epoch learning-rate decay, fixed shuffling) so that identical
corpus/config/seed yields byte-identical models without an external
solver. Naive Bayes variants are closed-form. All kinds share one linear
prediction contract: o[c] = weights[c] . x + bias[c].

Gaussian NB note: per-class diagonal Gaussians are quadratic in x, which
cannot be expressed as a single linear row per class. We therefore pool
the (smoothed) per-class variances across classes, which drops the
class-invariant quadratic term and yields the linear discriminant
w[c][j] = mean[c][j] / var[j].
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ModelError, ModelFormatError
from .features import FeatureConfig, FeatureSpace, SparseVector, fit, transform
from .text import Document, LabeledCorpus

MODEL_FORMAT_VERSION = 1

KINDS = ("logreg", "linsvm", "nb_multinomial", "nb_gaussian", "nbsvm")
LOSSES = ("log", "hinge", "squared_hinge")


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    loss: str = "log"                  # log | hinge | squared_hinge
    class_weight: str = "uniform"      # uniform | balanced
    epochs: int = 50
    learning_rate: float = 0.1
    seed: int = 0
    lr_decay: float = 0.9              # multiplicative, per epoch

    def __post_init__(self):
        if self.C <= 0 or self.epochs <= 0 or self.learning_rate <= 0:
            raise ModelError("C, epochs, and learning_rate must be positive")
        if self.loss not in LOSSES:
            raise ModelError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.class_weight not in ("uniform", "balanced"):
            raise ModelError(f"class_weight must be 'uniform' or 'balanced', got {self.class_weight!r}")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ModelError(f"lr_decay must be in (0,1], got {self.lr_decay}")


@dataclass(frozen=True)
class ClassifierModel:
    kind: str
    space: FeatureSpace
    weights: np.ndarray                # shape (n_labels, n_columns)
    bias: np.ndarray                   # shape (n_labels,)
    labels: tuple[str, ...]
    role: str = "unspecified"          # substitute | target | unspecified

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "labels", tuple(self.labels))
        if w.shape != (len(self.labels), self.space.n_columns):
            raise ModelError(f"weights shape {w.shape} does not match "
                             f"{len(self.labels)} labels x {self.space.n_columns} columns")

    def logits_vector(self, vec: SparseVector) -> np.ndarray:
        if len(vec) == 0:
            return self.bias.copy()
        return self.weights[:, vec.indices] @ vec.values + self.bias

    def logits(self, doc: Document) -> np.ndarray:
        return self.logits_vector(transform(self.space, doc))

    def predict(self, doc: Document) -> str:
        return self.labels[int(np.argmax(self.logits(doc)))]

    def label_index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ModelError(f"unknown label {label!r}; model labels are {list(self.labels)}")

    def with_role(self, role: str) -> "ClassifierModel":
        return replace(self, role=role)


def predict_logits(model: ClassifierModel, doc: Document) -> np.ndarray:
    return model.logits(doc)


def predict(model: ClassifierModel, doc: Document) -> str:
    return model.predict(doc)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    exp = np.exp(shifted)
    return exp / exp.sum()


# ---------------------------------------------------------------------------
# Loss gradients (shared between the trainer and the gradient check).

def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def logloss_value_grad(z: float, target: float) -> tuple[float, float]:
    """Binary cross-entropy at logit z; returns (loss, dloss/dz)."""
    loss = float(np.logaddexp(0.0, z)) - target * z
    return loss, _sigmoid(z) - target


def hinge_value_grad(z: float, sign: float) -> tuple[float, float]:
    margin = sign * z
    if margin >= 1.0:
        return 0.0, 0.0
    return 1.0 - margin, -sign


def squared_hinge_value_grad(z: float, sign: float) -> tuple[float, float]:
    margin = sign * z
    if margin >= 1.0:
        return 0.0, 0.0
    gap = 1.0 - margin
    return gap * gap, -2.0 * gap * sign


def logistic_loss(weights_row: np.ndarray, bias: float, x: np.ndarray, target: float):
    """Per-instance log loss and its analytic gradient over dense features.

    This wraps the same z -> (loss, dloss/dz) map used by the SGD trainer,
    so a finite-difference check of this function checks the trainer's
    gradient.
    """
    z = float(weights_row @ x) + bias
    loss, g = logloss_value_grad(z, target)
    return loss, g * x, g


def class_weights(labels: tuple[str, ...], y: list[int], scheme: str) -> np.ndarray:
    """Per-class loss multipliers; 'balanced' is N / (n_labels * count_c)."""
    n_labels = len(labels)
    counts = np.bincount(np.array(y), minlength=n_labels).astype(np.float64)
    if scheme == "uniform":
        return np.ones(n_labels)
    if np.any(counts == 0):
        raise ModelError("balanced class weights need at least one document per label")
    return len(y) / (n_labels * counts)


def _train_sgd(vectors, y, labels, tconfig: TrainConfig, n_columns: int,
               loss_name: str) -> tuple[np.ndarray, np.ndarray]:
    n_labels = len(labels)
    n = len(vectors)
    w = np.zeros((n_labels, n_columns))
    b = np.zeros(n_labels)
    cw = class_weights(labels, y, tconfig.class_weight)
    lam = 1.0 / (tconfig.C * n)
    rng = random.Random(tconfig.seed)
    order = list(range(n))

    if loss_name == "log":
        value_grad = lambda z, pos: logloss_value_grad(z, 1.0 if pos else 0.0)
    elif loss_name == "hinge":
        value_grad = lambda z, pos: hinge_value_grad(z, 1.0 if pos else -1.0)
    else:
        value_grad = lambda z, pos: squared_hinge_value_grad(z, 1.0 if pos else -1.0)

    lr = tconfig.learning_rate
    for _epoch in range(tconfig.epochs):
        rng.shuffle(order)
        for i in order:
            vec = vectors[i]
            sample_weight = cw[y[i]]
            for c in range(n_labels):
                z = vec.dot(w[c]) + b[c]
                _loss, g = value_grad(z, y[i] == c)
                w[c] *= 1.0 - lr * lam
                if g != 0.0 and len(vec) > 0:
                    w[c, vec.indices] -= lr * sample_weight * g * vec.values
                if g != 0.0:
                    b[c] -= lr * sample_weight * g
        lr *= tconfig.lr_decay
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
        raise ModelError("training diverged to non-finite weights")
    return w, b


def _train_nb_multinomial(vectors, y, n_labels, n_columns, alpha=1.0):
    counts = np.full((n_labels, n_columns), alpha)
    priors = np.zeros(n_labels)
    for vec, label in zip(vectors, y):
        priors[label] += 1
        if len(vec):
            counts[label, vec.indices] += vec.values
    w = np.log(counts) - np.log(counts.sum(axis=1, keepdims=True))
    b = np.log(priors / priors.sum())
    return w, b


def _train_nb_gaussian(vectors, y, n_labels, n_columns):
    n = len(vectors)
    dense = np.zeros((n, n_columns))
    for row, vec in enumerate(vectors):
        if len(vec):
            dense[row, vec.indices] = vec.values
    y_arr = np.array(y)
    means = np.zeros((n_labels, n_columns))
    variances = np.zeros((n_labels, n_columns))
    priors = np.zeros(n_labels)
    for c in range(n_labels):
        members = dense[y_arr == c]
        priors[c] = len(members) / n
        means[c] = members.mean(axis=0)
        variances[c] = members.var(axis=0)
    eps = 1e-9 * float(variances.max()) + 1e-12
    variances += eps
    pooled = (priors[:, None] * variances).sum(axis=0)
    w = means / pooled
    b = np.log(priors) - 0.5 * (means ** 2 / pooled).sum(axis=1)
    return w, b


def train(corpus: LabeledCorpus, fconfig: FeatureConfig, tconfig: TrainConfig,
          kind: str = "logreg", role: str = "unspecified") -> ClassifierModel:
    """Fit a feature space on the corpus and train a classifier of the
    given kind. Label order of the model equals the corpus label order."""
    if kind not in KINDS:
        raise ModelError(f"unknown classifier kind {kind!r}; expected one of {KINDS}")
    if len(corpus.labels) < 2:
        raise ModelError(f"need >=2 labels to train, corpus has {list(corpus.labels)}")
    for label, indices in corpus.by_label().items():
        if not indices:
            raise ModelError(f"label {label!r} has no documents")
    if kind == "nbsvm":
        return train_nbsvm(corpus, fconfig, tconfig, role=role)

    space = fit(corpus, fconfig)
    vectors = [transform(space, doc) for doc in corpus.documents]
    label_pos = {label: i for i, label in enumerate(corpus.labels)}
    y = [label_pos[doc.label] for doc in corpus.documents]

    if kind == "logreg":
        w, b = _train_sgd(vectors, y, corpus.labels, tconfig, space.n_columns, "log")
    elif kind == "linsvm":
        loss = tconfig.loss if tconfig.loss in ("hinge", "squared_hinge") else "hinge"
        w, b = _train_sgd(vectors, y, corpus.labels, tconfig, space.n_columns, loss)
    elif kind == "nb_multinomial":
        w, b = _train_nb_multinomial(vectors, y, len(corpus.labels), space.n_columns)
    else:
        w, b = _train_nb_gaussian(vectors, y, len(corpus.labels), space.n_columns)
    return ClassifierModel(kind=kind, space=space, weights=w, bias=b,
                           labels=corpus.labels, role=role)


def nb_log_count_ratio(vectors, y, positive_index: int, n_columns: int,
                       alpha: float = 1.0) -> np.ndarray:
    """r = ln((p/|p|1) / (q/|q|1)) with p = alpha + sum of positive rows,
    q = alpha + sum of negative rows."""
    p = np.full(n_columns, alpha)
    q = np.full(n_columns, alpha)
    for vec, label in zip(vectors, y):
        target = p if label == positive_index else q
        if len(vec):
            target[vec.indices] += vec.values
    return np.log((p / p.sum()) / (q / q.sum()))


def train_nbsvm(corpus: LabeledCorpus, fconfig: FeatureConfig, tconfig: TrainConfig,
                role: str = "unspecified") -> ClassifierModel:
    """Linear model over features rescaled by NB log-count ratios; the
    ratio is folded into the stored weights so prediction stays x -> w.x+b.
    Positive class is the lexicographically second label."""
    if len(corpus.labels) != 2:
        raise ModelError(f"nbsvm needs a binary label set, got {list(corpus.labels)}")
    space = fit(corpus, fconfig)
    vectors = [transform(space, doc) for doc in corpus.documents]
    label_pos = {label: i for i, label in enumerate(corpus.labels)}
    y = [label_pos[doc.label] for doc in corpus.documents]
    r = nb_log_count_ratio(vectors, y, positive_index=1, n_columns=space.n_columns)
    scaled = [SparseVector(indices=vec.indices, values=vec.values * r[vec.indices])
              if len(vec) else vec for vec in vectors]
    loss = tconfig.loss if tconfig.loss in ("hinge", "squared_hinge") else "hinge"
    w, b = _train_sgd(scaled, y, corpus.labels, tconfig, space.n_columns, loss)
    return ClassifierModel(kind="nbsvm", space=space, weights=w * r[None, :], bias=b,
                           labels=corpus.labels, role=role)


# ---------------------------------------------------------------------------
# Evaluation helpers and grid search.

def f1_score(preds, gold, positive_label) -> float:
    tp = sum(1 for p, g in zip(preds, gold) if p == positive_label and g == positive_label)
    fp = sum(1 for p, g in zip(preds, gold) if p == positive_label and g != positive_label)
    fn = sum(1 for p, g in zip(preds, gold) if p != positive_label and g == positive_label)
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def scoring_f1(preds, gold, labels) -> float:
    """Positive-class F1 for binary label sets (positive = second sorted
    label), macro-averaged F1 otherwise."""
    if len(labels) == 2:
        return f1_score(preds, gold, labels[1])
    return sum(f1_score(preds, gold, lab) for lab in labels) / len(labels)


@dataclass(frozen=True)
class GridSpec:
    configs: tuple[tuple[FeatureConfig, TrainConfig], ...]
    inner_folds: int = 3
    outer_folds: int = 3
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "configs", tuple(self.configs))
        if not self.configs:
            raise ModelError("grid must contain at least one configuration")
        if self.inner_folds < 2 or self.outer_folds < 2:
            raise ModelError("inner_folds and outer_folds must be >= 2")


def stratified_folds(corpus: LabeledCorpus, n_folds: int, seed: int) -> list[list[int]]:
    """Deal each label's (seed-shuffled) documents round-robin into folds."""
    per_label = corpus.by_label()
    smallest = min(len(idx) for idx in per_label.values())
    if n_folds > smallest:
        raise ModelError(f"{n_folds} folds infeasible: smallest class has {smallest} documents")
    rng = random.Random(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for label in corpus.labels:
        indices = list(per_label[label])
        rng.shuffle(indices)
        for pos, idx in enumerate(indices):
            folds[pos % n_folds].append(idx)
    return [sorted(fold) for fold in folds]


def _cv_score(corpus: LabeledCorpus, fconfig: FeatureConfig, tconfig: TrainConfig,
              kind: str, folds: list[list[int]]) -> float:
    scores = []
    all_idx = set(range(len(corpus)))
    for fold in folds:
        train_corpus = corpus.subset(sorted(all_idx - set(fold)))
        model = train(train_corpus, fconfig, tconfig, kind)
        held = [corpus.documents[i] for i in fold]
        preds = [model.predict(doc) for doc in held]
        gold = [doc.label for doc in held]
        scores.append(scoring_f1(preds, gold, corpus.labels))
    return sum(scores) / len(scores)


def grid_search(corpus: LabeledCorpus, grid: GridSpec, kind: str = "logreg"):
    """Score every configuration by mean positive-class F1 over stratified
    inner folds; ties keep the earlier configuration. The winner is refit
    on the full corpus; an outer-fold estimate of the winner is reported
    alongside the per-config scores."""
    inner = stratified_folds(corpus, grid.inner_folds, grid.seed)
    results = []
    best_index = 0
    best_score = -1.0
    for i, (fconfig, tconfig) in enumerate(grid.configs):
        score = _cv_score(corpus, fconfig, tconfig, kind, inner)
        results.append({"config_index": i, "inner_f1": score})
        if score > best_score:
            best_score = score
            best_index = i
    best_fconfig, best_tconfig = grid.configs[best_index]
    outer = stratified_folds(corpus, grid.outer_folds, grid.seed + 1)
    outer_f1 = _cv_score(corpus, best_fconfig, best_tconfig, kind, outer)
    model = train(corpus, best_fconfig, best_tconfig, kind)
    summary = {"best_index": best_index, "best_inner_f1": best_score,
               "outer_f1_best": outer_f1, "per_config": results}
    return model, summary


# ---------------------------------------------------------------------------
# Serialization: versioned self-describing json container.

def _config_to_dict(config: FeatureConfig) -> dict:
    return {
        "word_ngrams": list(config.word_ngrams),
        "char_ngrams": config.char_ngrams,
        "weighting": config.weighting,
        "sublinear_tf": config.sublinear_tf,
        "min_df": config.min_df,
        "max_df_fraction": config.max_df_fraction,
        "l2_normalize": config.l2_normalize,
        "exclude_tokens": list(config.exclude_tokens),
    }


def _config_from_dict(payload: dict) -> FeatureConfig:
    return FeatureConfig(
        word_ngrams=tuple(payload["word_ngrams"]),
        char_ngrams=payload["char_ngrams"],
        weighting=payload["weighting"],
        sublinear_tf=payload["sublinear_tf"],
        min_df=payload["min_df"],
        max_df_fraction=payload["max_df_fraction"],
        l2_normalize=payload.get("l2_normalize", False),
        exclude_tokens=tuple(payload.get("exclude_tokens", ())),
    )


def save_model(model: ClassifierModel, path) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "role": model.role,
        "labels": list(model.labels),
        "feature_config": _config_to_dict(model.space.config),
        "grams": model.space.grams,
        "idf": model.space.idf.tolist(),
        "n_docs_fit": model.space.n_docs_fit,
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n",
                          encoding="utf-8")


def load_model(path) -> ClassifierModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"corrupt model file {path}: {exc}") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise ModelFormatError(f"corrupt model file {path}: not a model container")
    version = payload["format_version"]
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"model format version {version} not supported "
                               f"(this build reads version {MODEL_FORMAT_VERSION})")
    try:
        config = _config_from_dict(payload["feature_config"])
        grams = payload["grams"]
        space = FeatureSpace(gram_index={g: i for i, g in enumerate(grams)},
                             idf=np.array(payload["idf"], dtype=np.float64),
                             config=config, n_docs_fit=payload["n_docs_fit"])
        return ClassifierModel(kind=payload["kind"], space=space,
                               weights=np.array(payload["weights"], dtype=np.float64),
                               bias=np.array(payload["bias"], dtype=np.float64),
                               labels=tuple(payload["labels"]),
                               role=payload.get("role", "unspecified"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt model file {path}: {exc}") from exc
