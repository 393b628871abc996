"""Experiment orchestration: transfer matrices and robustness runs.

Plans are TOML files with [substitute.*], [target], [attack.*] (or
[augmenter.*]) and [sample] sections. The transfer runner trains the
substitute on each row corpus, attacks the shared test sample through
the substitute only, and scores every target model on the attacked
sample; the target models are instrumented so the report can prove they
were never queried while the attack ran. The robustness runner emits
the three-experiment structure: target scores on perturbed positives,
retrained-on-augmented scores on the original test split, and the
delta-TPR matrix across augmenters.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .attack import AttackConfig, augment, obfuscate
from .candidates import EmbeddingTable, SynonymConfig, load_pos_lexicon, load_synonym_lexicon
from .encoder import EncoderClient
from .errors import PlanError, VeilError
from .features import FeatureConfig
from .metrics import majority_baseline, meteor_lite, change_rate, tpr
from .models import ClassifierModel, TrainConfig, scoring_f1, train
from .text import LabeledCorpus, SplitSpec, author_key, load_corpus, split

DEFAULT_SAMPLE_SIZE = 200


class CountingModel:
    """Wraps a classifier and counts logit queries; used to certify that
    target models are never consulted while attacks are constructed."""

    def __init__(self, model: ClassifierModel):
        self._model = model
        self.calls = 0

    def logits(self, doc):
        self.calls += 1
        return self._model.logits(doc)

    def predict(self, doc):
        import numpy as np
        return self._model.labels[int(np.argmax(self.logits(doc)))]

    def __getattr__(self, name):
        return getattr(self._model, name)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    kind: str
    fconfig: FeatureConfig
    tconfig: TrainConfig


@dataclass(frozen=True)
class SubstituteSpec:
    name: str
    corpus: str
    format: str
    model: ModelSpec


@dataclass(frozen=True)
class TargetSpec:
    corpus: str
    format: str
    train_fraction: float
    seed: int
    models: tuple[ModelSpec, ...]


@dataclass(frozen=True)
class ExperimentPlan:
    mode: str                                   # transfer | robustness
    target: TargetSpec
    substitutes: tuple[SubstituteSpec, ...]
    attacks: tuple[tuple[str, AttackConfig], ...]
    sample_size: int
    seed: int
    positive_label: str | None
    echo: dict


# ---------------------------------------------------------------------------
# Plan parsing.

def _feature_config(table: dict, where: str) -> FeatureConfig:
    try:
        return FeatureConfig(
            word_ngrams=tuple(table.get("word_ngrams", (1, 2))),
            char_ngrams=table.get("char_ngrams"),
            weighting=table.get("weighting", "tfidf"),
            sublinear_tf=table.get("sublinear_tf", False),
            min_df=table.get("min_df", 1),
            max_df_fraction=table.get("max_df_fraction", 1.0),
            l2_normalize=table.get("l2_normalize", False),
        )
    except VeilError as exc:
        raise PlanError(str(exc), key=where) from exc


def _train_config(table: dict, where: str, seed: int) -> TrainConfig:
    try:
        return TrainConfig(
            C=table.get("C", 1.0),
            loss=table.get("loss", "log"),
            class_weight=table.get("class_weight", "uniform"),
            epochs=table.get("epochs", 50),
            learning_rate=table.get("learning_rate", 0.1),
            seed=table.get("seed", seed),
        )
    except VeilError as exc:
        raise PlanError(str(exc), key=where) from exc


def _model_spec(name: str, table: dict, where: str, seed: int) -> ModelSpec:
    kind = table.get("kind", "logreg")
    return ModelSpec(name=name, kind=kind,
                     fconfig=_feature_config(table, where),
                     tconfig=_train_config(table, where, seed))


def _attack_config(table: dict, where: str, mode: str, seed: int,
                   base_dir: Path) -> AttackConfig:
    resources: dict = {}
    if "embeddings" in table:
        resources["embeddings"] = EmbeddingTable.load(base_dir / table["embeddings"])
    if "lexicon" in table:
        resources["lexicon"] = load_synonym_lexicon(base_dir / table["lexicon"])
    if "pos_lexicon" in table:
        resources["pos_lexicon"] = load_pos_lexicon(base_dir / table["pos_lexicon"])
    if "encoder_endpoint" in table:
        resources["encoder"] = EncoderClient(table["encoder_endpoint"])
    try:
        synonym_config = SynonymConfig(n=table.get("n", 50), delta=table.get("delta", 0.7))
        return AttackConfig(
            mode=table.get("mode", mode),
            generators=tuple(table.get("generators", ("synonym",))),
            k=table.get("k", 50),
            min_score=table.get("min_score"),
            top_k_per_word=table.get("top_k", 10),
            checks=table.get("checks", False),
            similarity_ranker=table.get("ranker", "none"),
            sim_threshold=table.get("sim_threshold", 0.84),
            sanitize=table.get("sanitize"),
            max_samples=table.get("max_samples", 5),
            mark_token=table.get("mark_token"),
            dropout_p=table.get("dropout_p"),
            seed=table.get("seed", seed),
            synonym_config=synonym_config,
            **resources,
        )
    except VeilError as exc:
        raise PlanError(str(exc), key=where) from exc


def load_plan(path) -> ExperimentPlan:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise PlanError(f"invalid toml: {exc}", key=str(path)) from exc
    base_dir = path.parent
    mode = raw.get("mode", "transfer")
    if mode not in ("transfer", "robustness"):
        raise PlanError(f"mode must be 'transfer' or 'robustness', got {mode!r}", key="mode")

    sample = raw.get("sample", {})
    seed = sample.get("seed", 0)
    sample_size = sample.get("size", DEFAULT_SAMPLE_SIZE)
    positive_label = sample.get("positive_label")

    if "target" not in raw:
        raise PlanError("missing [target] section", key="target")
    target_table = raw["target"]
    if "corpus" not in target_table:
        raise PlanError("target needs a corpus path", key="target.corpus")
    model_tables = target_table.get("models")
    if not model_tables:
        raise PlanError("target needs at least one model under [target.models.*]",
                        key="target.models")
    models = tuple(_model_spec(name, table, f"target.models.{name}", seed)
                   for name, table in model_tables.items())
    target = TargetSpec(corpus=str(base_dir / target_table["corpus"]),
                        format=target_table.get("format", "jsonl"),
                        train_fraction=target_table.get("train_fraction", 0.8),
                        seed=target_table.get("seed", seed),
                        models=models)

    substitutes = []
    for name, table in raw.get("substitute", {}).items():
        where = f"substitute.{name}"
        if "corpus" not in table:
            raise PlanError("substitute needs a corpus path", key=f"{where}.corpus")
        substitutes.append(SubstituteSpec(
            name=name, corpus=str(base_dir / table["corpus"]),
            format=table.get("format", "jsonl"),
            model=_model_spec(name, table, where, seed)))
    if not substitutes:
        raise PlanError("plan needs at least one [substitute.*] section", key="substitute")

    attack_mode = "augment" if mode == "robustness" else "targeted"
    section = "augmenter" if mode == "robustness" and "augmenter" in raw else "attack"
    attacks = tuple((name, _attack_config(table, f"{section}.{name}", attack_mode, seed, base_dir))
                    for name, table in raw.get(section, {}).items())
    if not attacks:
        raise PlanError(f"plan needs at least one [{section}.*] section", key=section)

    return ExperimentPlan(mode=mode, target=target, substitutes=tuple(substitutes),
                          attacks=attacks, sample_size=sample_size, seed=seed,
                          positive_label=positive_label, echo=raw)


# ---------------------------------------------------------------------------
# Transfer experiment.

@dataclass(frozen=True)
class TransferRow:
    substitute: str | None
    attack: str
    target_accuracy: dict[str, float]
    substitute_accuracy: float | None
    success_rate: float | None
    meteor_mean: float | None
    change_rate_mean: float | None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class TransferMatrix:
    rows: tuple[TransferRow, ...]
    targets: tuple[str, ...]
    chance_p: float
    sample_size: int
    target_queries_during_attack: int
    echo: dict

    def to_dict(self) -> dict:
        return {
            "mode": "transfer",
            "chance_p": self.chance_p,
            "sample_size": self.sample_size,
            "targets": list(self.targets),
            "target_queries_during_attack": self.target_queries_during_attack,
            "rows": [row.to_dict() for row in self.rows],
            "plan": self.echo,
        }


def _accuracy(model, docs, gold) -> float:
    preds = [model.predict(doc) for doc in docs]
    return sum(1 for p, g in zip(preds, gold) if p == g) / len(gold)


def attack_sample(corpus: LabeledCorpus, sample_size: int) -> list:
    """The last ``sample_size`` documents of the (unshuffled) test split."""
    if sample_size > len(corpus):
        raise PlanError(f"sample size {sample_size} exceeds test split size "
                        f"{len(corpus)}", key="sample.size")
    return list(corpus.documents[-sample_size:])


def warn_author_spillover(train: LabeledCorpus, test: LabeledCorpus, log) -> None:
    shared = ({author_key(d.id) for d in train.documents}
              & {author_key(d.id) for d in test.documents})
    if shared:
        log.warning("author keys appear in both train and test splits "
                    "(%d shared); attack samples may leak author style",
                    len(shared))


def run_transfer(plan: ExperimentPlan) -> TransferMatrix:
    if plan.mode != "transfer":
        raise PlanError("run_transfer needs a transfer-mode plan", key="mode")
    import logging
    log = logging.getLogger("veil.harness")

    corpus = load_corpus(plan.target.corpus, plan.target.format)
    train_split, test_split = split(corpus, SplitSpec(
        train_fraction=plan.target.train_fraction, seed=plan.target.seed))
    warn_author_spillover(train_split, test_split, log)
    sample = attack_sample(test_split, plan.sample_size)
    gold = [doc.label for doc in sample]
    chance_p = majority_baseline(gold)

    targets = {}
    for spec in plan.target.models:
        log.info("training target %s (%s) on %s", spec.name, spec.kind, plan.target.corpus)
        targets[spec.name] = CountingModel(train(
            train_split, spec.fconfig, spec.tconfig, spec.kind, role="target"))

    rows = [TransferRow(
        substitute=None, attack="none",
        target_accuracy={name: _accuracy(model, sample, gold)
                         for name, model in targets.items()},
        substitute_accuracy=None, success_rate=None,
        meteor_mean=None, change_rate_mean=None)]

    attack_queries = 0
    for sub_spec in plan.substitutes:
        sub_corpus = load_corpus(sub_spec.corpus, sub_spec.format)
        log.info("training substitute %s (%s) on %s", sub_spec.name,
                 sub_spec.model.kind, sub_spec.corpus)
        fprime = train(sub_corpus, sub_spec.model.fconfig, sub_spec.model.tconfig,
                       sub_spec.model.kind, role="substitute")
        for attack_name, cfg in plan.attacks:
            before = sum(model.calls for model in targets.values())
            advs = []
            successes = 0
            for doc in sample:
                result = obfuscate(fprime, doc, doc.label, cfg)
                advs.append(result.adv_doc)
                successes += int(result.success)
            attack_queries += sum(model.calls for model in targets.values()) - before

            meteor = sum(meteor_lite(adv.tokens, doc.tokens)
                         for doc, adv in zip(sample, advs)) / len(sample)
            rate = sum(change_rate(doc, adv)
                       for doc, adv in zip(sample, advs)) / len(sample)
            rows.append(TransferRow(
                substitute=sub_spec.name, attack=attack_name,
                target_accuracy={name: _accuracy(model, advs, gold)
                                 for name, model in targets.items()},
                substitute_accuracy=_accuracy(fprime, advs, gold),
                success_rate=successes / len(sample),
                meteor_mean=meteor, change_rate_mean=rate))

    return TransferMatrix(rows=tuple(rows),
                          targets=tuple(spec.name for spec in plan.target.models),
                          chance_p=chance_p, sample_size=len(sample),
                          target_queries_during_attack=attack_queries,
                          echo=plan.echo)


# ---------------------------------------------------------------------------
# Robustness / augmentation experiment.

def _augment_corpus(docs, fprime, cfg: AttackConfig):
    samples = []
    for doc in docs:
        samples.extend(augment(fprime, doc, doc.label, cfg))
    return samples


def run_robustness(plan: ExperimentPlan) -> dict:
    """Three-experiment report: (1) target scores on perturbed positives,
    (2) augmented-retrained scores on the original test split, (3) the
    delta-TPR matrix of every f_aug against every augmenter's perturbed
    test positives."""
    if plan.mode != "robustness":
        raise PlanError("run_robustness needs a robustness-mode plan", key="mode")
    import logging
    log = logging.getLogger("veil.harness")

    corpus = load_corpus(plan.target.corpus, plan.target.format)
    train_split, test_split = split(corpus, SplitSpec(
        train_fraction=plan.target.train_fraction, seed=plan.target.seed))
    model_spec = plan.target.models[0]
    base_model = train(train_split, model_spec.fconfig, model_spec.tconfig,
                       model_spec.kind, role="target")

    positive = plan.positive_label or corpus.labels[-1]
    if positive not in corpus.labels:
        raise PlanError(f"positive label {positive!r} not in corpus labels "
                        f"{list(corpus.labels)}", key="sample.positive_label")

    sub_spec = plan.substitutes[0]
    sub_corpus = load_corpus(sub_spec.corpus, sub_spec.format)
    fprime = train(sub_corpus, sub_spec.model.fconfig, sub_spec.model.tconfig,
                   sub_spec.model.kind, role="substitute")

    test_pos = [doc for doc in test_split.documents if doc.label == positive]
    train_pos = [doc for doc in train_split.documents if doc.label == positive]
    if not test_pos or not train_pos:
        raise PlanError(f"no positive instances for label {positive!r}",
                        key="sample.positive_label")
    gold_test = [doc.label for doc in test_split.documents]
    preds_plain = [base_model.predict(doc) for doc in test_split.documents]
    tpr_plain_originals = tpr(preds_plain, gold_test, positive)

    perturbed_test: dict[str, list] = {}
    augmented_models: dict[str, ClassifierModel] = {}
    experiment1 = {}
    experiment2 = {"plain": {
        "f1": scoring_f1(preds_plain, gold_test, corpus.labels),
        "accuracy": sum(1 for p, g in zip(preds_plain, gold_test) if p == g) / len(gold_test),
    }}

    for name, cfg in plan.attacks:
        log.info("augmenter %s: perturbing test positives", name)
        eval_cfg = dataclasses.replace(cfg, mark_token="")
        perturbed = _augment_corpus(test_pos, fprime, eval_cfg)
        perturbed_test[name] = perturbed

        if perturbed:
            preds = [base_model.predict(doc) for doc in perturbed]
            gold = [doc.label for doc in perturbed]
            sources = {doc.id: doc for doc in test_pos}
            experiment1[name] = {
                "n_samples": len(perturbed),
                "tpr": tpr(preds, gold, positive),
                "tpr_originals": tpr_plain_originals,
                "meteor_mean": sum(meteor_lite(adv.tokens, sources[adv.source_id].tokens)
                                   for adv in perturbed) / len(perturbed),
            }
        else:
            experiment1[name] = {"n_samples": 0, "tpr": None,
                                 "tpr_originals": tpr_plain_originals,
                                 "meteor_mean": None}

        log.info("augmenter %s: retraining on augmented train split", name)
        train_samples = _augment_corpus(train_pos, fprime, cfg)
        mark = cfg.effective_mark_token
        fconfig = model_spec.fconfig
        if mark:
            fconfig = dataclasses.replace(
                fconfig, exclude_tokens=tuple(set(fconfig.exclude_tokens) | {mark}))
        augmented_corpus = LabeledCorpus(
            documents=train_split.documents + tuple(train_samples),
            labels=train_split.labels)
        f_aug = train(augmented_corpus, fconfig, model_spec.tconfig,
                      model_spec.kind, role="target")
        augmented_models[name] = f_aug

        aug_preds = [f_aug.predict(doc) for doc in test_split.documents]
        experiment2[name] = {
            "f1": scoring_f1(aug_preds, gold_test, corpus.labels),
            "accuracy": sum(1 for p, g in zip(aug_preds, gold_test) if p == g) / len(gold_test),
            "n_train_samples": len(train_samples),
        }

    # Experiment 3: rows = plain f + every f_aug, columns = plain positives
    # + every augmenter's perturbed positives; cells are TPR, plus deltas
    # of each f_aug row against the plain-f row.
    columns = ["plain"] + [name for name, _ in plan.attacks]
    col_docs = {"plain": test_pos}
    col_docs.update(perturbed_test)
    matrix_tpr: dict[str, dict[str, float | None]] = {}
    for row_name, model in [("plain", base_model)] + list(augmented_models.items()):
        row = {}
        for col in columns:
            docs = col_docs[col]
            if docs:
                preds = [model.predict(doc) for doc in docs]
                row[col] = tpr(preds, [d.label for d in docs], positive)
            else:
                row[col] = None
        matrix_tpr[row_name] = row
    delta_tpr = {
        row_name: {col: (None if value is None else value - matrix_tpr["plain"][col])
                   for col, value in row.items()}
        for row_name, row in matrix_tpr.items() if row_name != "plain"
    }

    return {
        "mode": "robustness",
        "positive_label": positive,
        "labels": list(corpus.labels),
        "n_train": len(train_split), "n_test": len(test_split),
        "experiment1_perturbed_positives": experiment1,
        "experiment2_augmented_training": experiment2,
        "experiment3_tpr_matrix": matrix_tpr,
        "experiment3_delta_tpr": delta_tpr,
        "plan": plan.echo,
    }
