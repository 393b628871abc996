"""Command-line surface.

Subcommands: train, attack, augment, eval, serve, fixture. Every command
is deterministic under --seed; payload files carry no timestamps. Exit
codes: 0 success, 1 runtime error, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import logging
import os
import sys
from pathlib import Path

from .attack import AttackConfig, augment, obfuscate
from .candidates import (EmbeddingTable, SynonymConfig, load_pos_lexicon,
                         load_synonym_lexicon)
from .encoder import EncoderClient
from .errors import PlanError, VeilError
from .features import FeatureConfig
from .fixtures import FixtureSpec, write_fixture_files
from .harness import load_plan, run_robustness, run_transfer
from .metrics import change_rate, majority_baseline, meteor_lite
from .models import (GridSpec, TrainConfig, grid_search, load_model, save_model,
                     scoring_f1, train)
from .report import (write_attack_report, write_json, write_robustness_report,
                     write_transfer_report)
from .text import SplitSpec, load_corpus, split

logger = logging.getLogger("veil")

ENCODER_ENV = "VEIL_ENCODER_ENDPOINT"


class UsageError(Exception):
    """Flag combination errors; exits with status 2 like argparse."""


def _resolve_out(args, default_name: str | None = None) -> Path:
    """--out wins; otherwise fall back to the global --output-dir."""
    if args.out:
        return Path(args.out)
    if args.output_dir:
        base = Path(args.output_dir)
        return base / default_name if default_name else base
    raise UsageError("one of --out or the global --output-dir is required")


def _parse_ngrams(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) == 1:
        parts = [parts[0], parts[0]]
    try:
        lo, hi = int(parts[0]), int(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi' integers, got {text!r}")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="veil",
        description="Adversarial stylometry toolkit: substitute classifiers, "
                    "omission-score attacks, augmentation, and transfer evaluation.")
    parser.add_argument("--seed", type=int, default=0, help="global RNG seed")
    parser.add_argument("--quiet", action="store_true", help="suppress progress logging")
    parser.add_argument("--output-dir", default=None,
                        help="default directory for commands run without --out")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a classifier and write a model file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=("jsonl", "tsv"), default="jsonl")
    p.add_argument("--classifier", choices=("logreg", "linsvm", "nb-multinomial",
                                            "nb-gaussian", "nbsvm"), default="logreg")
    p.add_argument("--word-ngrams", type=_parse_ngrams, default=(1, 2),
                   metavar="LO,HI")
    p.add_argument("--char-ngrams", type=int, default=None, metavar="LEN")
    p.add_argument("--weighting", choices=("binary", "tfidf"), default="tfidf")
    p.add_argument("--sublinear-tf", action="store_true")
    p.add_argument("--min-df", type=int, default=1)
    p.add_argument("--max-df", type=float, default=1.0)
    p.add_argument("--c", type=float, default=1.0, help="inverse regularization")
    p.add_argument("--loss", choices=("log", "hinge", "squared_hinge"), default="log")
    p.add_argument("--class-weight", choices=("uniform", "balanced"), default="uniform")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--eval-split", type=float, default=None, metavar="FRACTION",
                   help="hold out this fraction and report F1 on it")
    p.add_argument("--grid", default=None, metavar="JSON",
                   help="grid-search spec file; overrides single-config flags")
    p.add_argument("--role", choices=("substitute", "target", "unspecified"),
                   default="unspecified")
    p.add_argument("--out", default=None, help="model file to write")

    p = sub.add_parser("attack", help="run targeted obfuscation over a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("jsonl", "tsv"), default="jsonl")
    p.add_argument("--label", default="gold",
                   help="protected label, or 'gold' to use each record's label")
    p.add_argument("--embeddings", default=None)
    p.add_argument("--generator", default="synonym",
                   help="comma-separated generator list")
    p.add_argument("--delta", type=float, default=0.7, help="synonym cosine threshold")
    p.add_argument("--n", type=int, default=50, help="max synonym candidates")
    p.add_argument("--k", type=int, default=50, help="max target words")
    p.add_argument("--top-k", type=int, default=10, help="external generator top-k")
    p.add_argument("--min-score", type=float, default=None)
    p.add_argument("--checks", action="store_true",
                   help="POS + sentence-similarity filtering")
    p.add_argument("--ranker", choices=("none", "sentence", "contextual"), default="none")
    p.add_argument("--sim-threshold", type=float, default=0.84)
    p.add_argument("--sanitize", action="store_true")
    p.add_argument("--pos-lexicon", default=None)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--encoder-endpoint", default=None)
    p.add_argument("--dropout-p", type=float, default=None)
    p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("augment", help="untargeted augmentation of a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("jsonl", "tsv"), default="jsonl")
    p.add_argument("--only-label", default=None,
                   help="augment only documents with this label")
    p.add_argument("--embeddings", default=None)
    p.add_argument("--generator", default="synonym")
    p.add_argument("--delta", type=float, default=0.7)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--min-score", type=float, default=0.005)
    p.add_argument("--max-samples", type=int, default=5)
    p.add_argument("--mark-token", default="<A>",
                   help="provenance marker; pass '' to disable")
    p.add_argument("--lexicon", default=None)
    p.add_argument("--encoder-endpoint", default=None)
    p.add_argument("--dropout-p", type=float, default=None)
    p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("eval", help="run a transfer or robustness plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("serve", help="serve the interactive session API")
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--pos-lexicon", default=None)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--encoder-endpoint", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8470)
    p.add_argument("--static-dir", default=None,
                   help="directory with the built web UI")
    p.add_argument("--session-ttl", type=float, default=3600.0)

    p = sub.add_parser("fixture", help="write the synthetic benchmark corpus")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--n-docs", type=int, default=400)
    p.add_argument("--n-markers", type=int, default=8)
    p.add_argument("--n-fillers", type=int, default=60)
    p.add_argument("--noise-rate", type=float, default=0.0)
    p.add_argument("--cross-class-synonym-rate", type=float, default=0.3)
    p.add_argument("--prefix", default="fixture")
    return parser


# ---------------------------------------------------------------------------


def _feature_config(args) -> FeatureConfig:
    return FeatureConfig(word_ngrams=args.word_ngrams, char_ngrams=args.char_ngrams,
                         weighting=args.weighting, sublinear_tf=args.sublinear_tf,
                         min_df=args.min_df, max_df_fraction=args.max_df)


def _train_config(args, seed: int) -> TrainConfig:
    return TrainConfig(C=args.c, loss=args.loss, class_weight=args.class_weight,
                       epochs=args.epochs, learning_rate=args.learning_rate, seed=seed)


def _grid_from_file(path: str, base_f: FeatureConfig, base_t: TrainConfig) -> GridSpec:
    spec = json.loads(Path(path).read_text(encoding="utf-8"))
    axes = {
        "word_ngrams": [tuple(v) for v in spec.get("word_ngrams", [base_f.word_ngrams])],
        "char_ngrams": spec.get("char_ngrams", [base_f.char_ngrams]),
        "weighting": spec.get("weighting", [base_f.weighting]),
        "sublinear_tf": spec.get("sublinear_tf", [base_f.sublinear_tf]),
        "min_df": spec.get("min_df", [base_f.min_df]),
        "C": spec.get("C", [base_t.C]),
        "loss": spec.get("loss", [base_t.loss]),
        "class_weight": spec.get("class_weight", [base_t.class_weight]),
    }
    configs = []
    keys = list(axes)
    for combo in itertools.product(*(axes[k] for k in keys)):
        values = dict(zip(keys, combo))
        fconfig = dataclasses.replace(base_f, word_ngrams=values["word_ngrams"],
                                      char_ngrams=values["char_ngrams"],
                                      weighting=values["weighting"],
                                      sublinear_tf=values["sublinear_tf"],
                                      min_df=values["min_df"])
        tconfig = dataclasses.replace(base_t, C=values["C"], loss=values["loss"],
                                      class_weight=values["class_weight"])
        configs.append((fconfig, tconfig))
    return GridSpec(configs=tuple(configs),
                    inner_folds=spec.get("inner_folds", 3),
                    outer_folds=spec.get("outer_folds", 3))


def cmd_train(args) -> int:
    corpus = load_corpus(args.corpus, args.format)
    kind = args.classifier.replace("-", "_")
    fconfig = _feature_config(args)
    tconfig = _train_config(args, args.seed)

    eval_corpus = None
    if args.eval_split is not None:
        corpus, eval_corpus = split(corpus, SplitSpec(
            train_fraction=1.0 - args.eval_split, seed=args.seed))

    if args.grid:
        grid = _grid_from_file(args.grid, fconfig, tconfig)
        model, summary = grid_search(corpus, grid, kind)
        best_f, best_t = grid.configs[summary["best_index"]]
        print(json.dumps({"grid_best": {
            "config_index": summary["best_index"],
            "inner_f1": summary["best_inner_f1"],
            "outer_f1": summary["outer_f1_best"],
            "word_ngrams": list(best_f.word_ngrams),
            "char_ngrams": best_f.char_ngrams,
            "weighting": best_f.weighting,
            "sublinear_tf": best_f.sublinear_tf,
            "min_df": best_f.min_df,
            "C": best_t.C,
            "loss": best_t.loss,
            "class_weight": best_t.class_weight,
        }}, sort_keys=True))
    else:
        model = train(corpus, fconfig, tconfig, kind)
    model = model.with_role(args.role)
    out = _resolve_out(args, "model.json")
    save_model(model, out)
    logger.info("model written to %s (%d features, labels %s)",
                out, model.space.n_columns, list(model.labels))

    if eval_corpus is not None:
        preds = [model.predict(doc) for doc in eval_corpus.documents]
        gold = [doc.label for doc in eval_corpus.documents]
        accuracy = sum(1 for p, g in zip(preds, gold) if p == g) / len(gold)
        f1 = scoring_f1(preds, gold, eval_corpus.labels)
        print(json.dumps({"held_out": {"n": len(gold), "accuracy": accuracy,
                                       "f1": f1}}, sort_keys=True))
    return 0


def _attack_config_from_args(args, mode: str) -> AttackConfig:
    generators = tuple(g.strip() for g in args.generator.split(",") if g.strip())
    embeddings = EmbeddingTable.load(args.embeddings) if args.embeddings else None
    if "synonym" in generators and embeddings is None:
        raise VeilError("the synonym generator needs --embeddings")
    lexicon = load_synonym_lexicon(args.lexicon) if args.lexicon else None
    pos_lexicon = None
    if getattr(args, "pos_lexicon", None):
        pos_lexicon = load_pos_lexicon(args.pos_lexicon)
    if getattr(args, "checks", False) and pos_lexicon is None:
        logger.warning("--checks without --pos-lexicon: POS check is a no-op")
    endpoint = args.encoder_endpoint or os.environ.get(ENCODER_ENV)
    encoder = EncoderClient(endpoint) if endpoint else None
    if any(g.startswith("external_") for g in generators) and encoder is None:
        raise VeilError(f"external generators need --encoder-endpoint or ${ENCODER_ENV}")
    return AttackConfig(
        mode=mode, generators=generators, k=args.k,
        min_score=args.min_score, top_k_per_word=args.top_k,
        checks=getattr(args, "checks", False),
        similarity_ranker=getattr(args, "ranker", "none"),
        sim_threshold=getattr(args, "sim_threshold", 0.84),
        sanitize=True if mode == "augment" else (args.sanitize or None),
        max_samples=getattr(args, "max_samples", 5),
        mark_token=getattr(args, "mark_token", None),
        dropout_p=args.dropout_p, seed=args.seed,
        embeddings=embeddings,
        synonym_config=SynonymConfig(n=args.n, delta=args.delta),
        lexicon=lexicon, pos_lexicon=pos_lexicon, encoder=encoder)


def cmd_attack(args) -> int:
    model = load_model(args.model)
    corpus = load_corpus(args.input, args.format,
                         default_label=None if args.label == "gold" else args.label)
    cfg = _attack_config_from_args(args, mode="targeted")
    out_dir = _resolve_out(args)
    out_dir.mkdir(parents=True, exist_ok=True)

    records = []
    change_rates = []
    meteors = []
    successes = 0
    preds = []
    gold = []
    for doc in corpus.documents:
        y = doc.label if args.label == "gold" else args.label
        result = obfuscate(model, doc, y, cfg)
        adv = result.adv_doc
        rate = change_rate(doc, adv)
        meteor = meteor_lite(adv.tokens, doc.tokens)
        change_rates.append(rate)
        meteors.append(meteor)
        successes += int(result.success)
        preds.append(model.labels[max(range(len(model.labels)),
                                      key=lambda i: result.final_logits_fprime[i])])
        gold.append(y)
        records.append({
            "id": adv.id, "source_id": doc.id, "label": y,
            "text": adv.text, "original_text": doc.text,
            "success": result.success, "change_count": result.change_count,
            "change_rate": rate, "meteor": meteor,
            "final_logits": {label: v for label, v in
                             zip(model.labels, result.final_logits_fprime)},
            "steps": [{"index": s.token_index, "old": s.old, "new": s.new,
                       "generator": s.generator, "o_y_before": s.o_y_before,
                       "o_y_after": s.o_y_after} for s in result.steps],
        })

    with (out_dir / "attacked.jsonl").open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True) + "\n")

    n = len(records)
    chance = majority_baseline(gold)
    accuracy = sum(1 for p, g in zip(preds, gold) if p == g) / n
    summary = {
        "n": n,
        "success_rate": successes / n,
        "substitute_accuracy": accuracy,
        "chance_p": chance,
        "delta_accuracy": accuracy - chance,
        "mean_change_rate": sum(change_rates) / n,
        "mean_change_count": sum(r["change_count"] for r in records) / n,
        "mean_meteor": sum(meteors) / n,
        "generators": list(cfg.generators),
    }
    write_attack_report(summary, change_rates, meteors, out_dir)
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_augment(args) -> int:
    model = load_model(args.model)
    corpus = load_corpus(args.input, args.format)
    if args.only_label is not None and args.only_label not in corpus.labels:
        raise VeilError(f"--only-label {args.only_label!r} not in corpus labels "
                        f"{list(corpus.labels)}")
    cfg = _attack_config_from_args(args, mode="augment")
    out_dir = _resolve_out(args)
    out_dir.mkdir(parents=True, exist_ok=True)

    n_inputs = 0
    samples = []
    for doc in corpus.documents:
        if args.only_label is not None and doc.label != args.only_label:
            continue
        n_inputs += 1
        samples.extend(augment(model, doc, doc.label, cfg))

    with (out_dir / "augmented.jsonl").open("w", encoding="utf-8") as handle:
        for sample in samples:
            handle.write(json.dumps({
                "id": sample.id, "source_id": sample.source_id, "rank": sample.rank,
                "text": sample.text, "label": sample.label,
                "steps": [{"index": s.token_index, "old": s.old, "new": s.new,
                           "generator": s.generator} for s in sample.steps],
            }, sort_keys=True) + "\n")

    summary = {"n_inputs": n_inputs, "n_samples": len(samples),
               "max_samples": cfg.max_samples,
               "mark_token": cfg.effective_mark_token or "",
               "generators": list(cfg.generators)}
    write_json(summary, out_dir / "summary.json")
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    plan = load_plan(args.plan)
    out_dir = _resolve_out(args)
    if plan.mode == "transfer":
        matrix = run_transfer(plan)
        written = write_transfer_report(matrix, out_dir)
    else:
        report = run_robustness(plan)
        written = write_robustness_report(report, out_dir)
    print(json.dumps({"written": {k: str(v) for k, v in written.items()}},
                     sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    from .server import ObfuscationService, serve_forever

    model = load_model(args.model)
    endpoint = args.encoder_endpoint or os.environ.get(ENCODER_ENV)
    service = ObfuscationService(
        model=model,
        embeddings=EmbeddingTable.load(args.embeddings) if args.embeddings else None,
        lexicon=load_synonym_lexicon(args.lexicon) if args.lexicon else None,
        pos_lexicon=load_pos_lexicon(args.pos_lexicon) if args.pos_lexicon else None,
        encoder=EncoderClient(endpoint) if endpoint else None,
        space_seed=args.seed,
        session_ttl=args.session_ttl)
    serve_forever(service, args.host, args.port, args.static_dir)
    return 0


def cmd_fixture(args) -> int:
    spec = FixtureSpec(n_docs=args.n_docs, n_filler_words=args.n_fillers,
                       n_marker_words=args.n_markers, noise_rate=args.noise_rate,
                       cross_class_synonym_rate=args.cross_class_synonym_rate,
                       seed=args.seed)
    out_dir = _resolve_out(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus_path = out_dir / f"{args.prefix}.jsonl"
    embeddings_path = out_dir / f"{args.prefix}_embeddings.txt"
    corpus = write_fixture_files(spec, corpus_path, embeddings_path)
    print(json.dumps({"corpus": str(corpus_path), "embeddings": str(embeddings_path),
                      "n_docs": len(corpus), "labels": list(corpus.labels)},
                     sort_keys=True))
    return 0


COMMANDS = {
    "train": cmd_train,
    "attack": cmd_attack,
    "augment": cmd_augment,
    "eval": cmd_eval,
    "serve": cmd_serve,
    "fixture": cmd_fixture,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except VeilError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
