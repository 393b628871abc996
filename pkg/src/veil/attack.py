"""Targeted obfuscation loop and untargeted augmentation.

The targeted mode walks targets in omission-score order and, per target,
evaluates candidate substitutions against the substitute model only:
the first candidate that flips the prediction ends the attack (with
checks on, the flipping candidate closest to the original sentence is
preferred); otherwise a candidate is kept iff it strictly lowers the
protected label's logit on the running adversarial document. The target
model is never consulted here.

The augmentation mode is untargeted: no candidate is ever tested against
a classifier. All targets above the omission threshold are substituted
simultaneously, pairing sample j with every target's j-th ranked
candidate while any target still has one, up to max_samples.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .candidates import (Candidate, EmbeddingTable, StaticEncoder, SynonymConfig,
                         external_candidates, heuristic_flip, heuristic_leet,
                         heuristic_space, lexicon_candidates, pos_filter, sanitize,
                         sentence_similarity, synonym_candidates, contextual_sim)
from .errors import EncoderError, VeilError
from .importance import omission_scores, select_targets
from .models import ClassifierModel
from .text import Document

logger = logging.getLogger("veil.attack")

DEFAULT_MARK_TOKEN = "<A>"
ATTACK_DROPOUT_P = 0.3
AUGMENT_DROPOUT_P = 0.2
AUGMENT_MIN_SCORE = 0.005


@dataclass(frozen=True)
class AttackConfig:
    mode: str = "targeted"                     # targeted | augment
    generators: tuple[str, ...] = ("synonym",)
    k: int = 50
    min_score: float | None = None             # None -> 0.0 targeted / 0.005 augment
    top_k_per_word: int = 10                   # top-k asked of external generators
    checks: bool = False
    similarity_ranker: str = "none"            # none | sentence | contextual
    sim_threshold: float = 0.84
    sanitize: bool | None = None               # None -> off targeted / on augment
    max_samples: int = 5
    mark_token: str | None = None              # None -> "<A>" in augment; "" disables
    dropout_p: float | None = None             # None -> 0.3 targeted / 0.2 augment
    seed: int = 0
    # When true, external/contextual generators see the original document
    # rather than the partially perturbed one (semantic-drift guard).
    context_originals: bool = False
    # Resource handles; generators without their resource are skipped.
    embeddings: EmbeddingTable | None = None
    synonym_config: SynonymConfig = field(default_factory=SynonymConfig)
    lexicon: dict | None = None
    pos_lexicon: dict | None = None
    encoder: object | None = None              # EncoderClient-compatible
    contextual_encoder: object | None = None   # .encode(tokens, target_index)

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if self.mode not in ("targeted", "augment"):
            raise VeilError(f"mode must be 'targeted' or 'augment', got {self.mode!r}")
        if self.k < 1 or self.max_samples < 1:
            raise VeilError("k and max_samples must be >= 1")
        if self.similarity_ranker not in ("none", "sentence", "contextual"):
            raise VeilError(f"unknown similarity_ranker {self.similarity_ranker!r}")

    @property
    def effective_min_score(self) -> float:
        if self.min_score is not None:
            return self.min_score
        return AUGMENT_MIN_SCORE if self.mode == "augment" else 0.0

    @property
    def effective_sanitize(self) -> bool:
        if self.sanitize is not None:
            return self.sanitize
        return self.mode == "augment"

    @property
    def effective_mark_token(self) -> str | None:
        if self.mode != "augment":
            return self.mark_token or None
        token = DEFAULT_MARK_TOKEN if self.mark_token is None else self.mark_token
        return token or None

    @property
    def effective_dropout_p(self) -> float:
        if self.dropout_p is not None:
            return self.dropout_p
        return AUGMENT_DROPOUT_P if self.mode == "augment" else ATTACK_DROPOUT_P


@dataclass(frozen=True)
class SubstitutionStep:
    token_index: int
    old: str
    new: str
    generator: str
    o_y_before: float
    o_y_after: float
    accepted: bool


@dataclass(frozen=True)
class PerturbedDocument(Document):
    source_id: str = ""
    rank: int = 0
    steps: tuple[SubstitutionStep, ...] = ()


@dataclass(frozen=True)
class AttackResult:
    adv_doc: PerturbedDocument
    steps: tuple[SubstitutionStep, ...]
    success: bool
    final_logits_fprime: tuple[float, ...]
    change_count: int


def _space_seed(cfg: AttackConfig, target_index: int) -> int:
    return cfg.seed * 1_000_003 + target_index


def generate_candidates(cfg: AttackConfig, doc: Document, context_tokens,
                        target_index: int) -> list[Candidate]:
    """Run the configured generators in declaration order against one
    target position. A generator whose resource is missing or whose
    service call fails is skipped with a warning."""
    token = doc.tokens[target_index]
    context_doc = doc.with_tokens(context_tokens)
    out: list[Candidate] = []
    for name in cfg.generators:
        try:
            if name == "synonym":
                if cfg.embeddings is None:
                    logger.warning("synonym generator skipped: no embeddings loaded")
                    continue
                out.extend(synonym_candidates(token, cfg.embeddings, cfg.synonym_config))
            elif name == "leet":
                out.append(heuristic_leet(token))
            elif name == "flip":
                out.append(heuristic_flip(token))
            elif name == "space":
                out.append(heuristic_space(token, seed=_space_seed(cfg, target_index)))
            elif name == "lexicon":
                if cfg.lexicon is None:
                    logger.warning("lexicon generator skipped: no lexicon loaded")
                    continue
                out.extend(lexicon_candidates(token, cfg.lexicon))
            elif name in ("external_masked", "external_dropout"):
                if cfg.encoder is None:
                    logger.warning("%s generator skipped: no encoder endpoint", name)
                    continue
                mode = name.removeprefix("external_")
                out.extend(external_candidates(context_doc, target_index, mode=mode,
                                               top_k=cfg.top_k_per_word,
                                               dropout_p=cfg.effective_dropout_p,
                                               endpoint=cfg.encoder))
            else:
                raise VeilError(f"unknown generator {name!r}")
        except EncoderError as exc:
            logger.warning("%s generator failed (%s); continuing with remaining "
                           "generators", name, exc)
    # One evaluation per surface form; first generator keeps priority.
    seen: set[str] = set()
    unique = []
    for cand in out:
        if cand.token in seen:
            continue
        seen.add(cand.token)
        unique.append(cand)
    return unique


def _contextual_encoder(cfg: AttackConfig):
    if cfg.contextual_encoder is not None:
        return cfg.contextual_encoder
    if cfg.embeddings is not None:
        return StaticEncoder(cfg.embeddings)
    return None


def filter_and_rank(cfg: AttackConfig, original: Document, base_tokens,
                    target_index: int, cands: list[Candidate]) -> list[Candidate]:
    """Apply POS / sentence-similarity checks and the configured
    similarity re-ranking; order is preserved where scores tie."""
    if cfg.checks:
        kept = [c for c in cands if pos_filter(original, target_index, c.token,
                                               cfg.pos_lexicon)]
        if cfg.embeddings is not None:
            filtered = []
            for cand in kept:
                perturbed = _substituted(original, base_tokens, target_index, cand.token)
                if sentence_similarity(original, perturbed, cfg.embeddings) >= cfg.sim_threshold:
                    filtered.append(cand)
            kept = filtered
        cands = kept

    if cfg.similarity_ranker == "sentence" and cfg.embeddings is not None:
        cands = sorted(cands, key=lambda c: -sentence_similarity(
            original, _substituted(original, base_tokens, target_index, c.token),
            cfg.embeddings))
    elif cfg.similarity_ranker == "contextual":
        encoder = _contextual_encoder(cfg)
        if encoder is None:
            logger.warning("contextual ranker skipped: no encoder or embeddings")
        else:
            context = original.tokens if cfg.context_originals else tuple(base_tokens)
            enc_base = encoder.encode(context, target_index)
            def sim_of(cand: Candidate) -> float:
                perturbed = list(context)
                perturbed[target_index] = cand.token
                return contextual_sim(enc_base, encoder.encode(tuple(perturbed),
                                                               target_index), target_index)
            cands = sorted(cands, key=lambda c: -sim_of(c))
    return cands


def _substituted(doc: Document, base_tokens, index: int, token: str) -> Document:
    tokens = list(base_tokens)
    tokens[index] = token
    return doc.with_tokens(tokens)


def obfuscate(fprime: ClassifierModel, doc: Document, y: str,
              cfg: AttackConfig) -> AttackResult:
    """Greedy lexical replacement against the substitute model: walk
    targets by importance, flip early or keep strict logit reductions."""
    if cfg.mode != "targeted":
        raise VeilError("obfuscate requires a targeted-mode config")
    y_index = fprime.label_index(y)
    scores = omission_scores(fprime, doc, y)
    targets = select_targets(scores, cfg.k, cfg.effective_min_score)

    current = list(doc.tokens)
    steps: list[SubstitutionStep] = []
    o_y_current = float(fprime.logits(doc)[y_index])

    for target_index in targets:
        original_token = doc.tokens[target_index]
        context = doc.tokens if cfg.context_originals else current
        cands = generate_candidates(cfg, doc, context, target_index)
        if cfg.effective_sanitize:
            cands = sanitize(cands, original_token)
        cands = filter_and_rank(cfg, doc, current, target_index, cands)
        if not cands:
            continue

        evaluated = []
        for cand in cands:
            trial = _substituted(doc, current, target_index, cand.token)
            logits = fprime.logits(trial)
            flips = int(np.argmax(logits)) != y_index
            evaluated.append((cand, trial, logits, flips))
            if flips and not cfg.checks:
                break

        flipping = [entry for entry in evaluated if entry[3]]
        if flipping:
            if cfg.checks and cfg.embeddings is not None and len(flipping) > 1:
                chosen = max(flipping, key=lambda e: sentence_similarity(
                    doc, e[1], cfg.embeddings))
            else:
                chosen = flipping[0]
            cand, trial, logits, _ = chosen
            steps.append(SubstitutionStep(
                token_index=target_index, old=original_token, new=cand.token,
                generator=cand.generator, o_y_before=o_y_current,
                o_y_after=float(logits[y_index]), accepted=True))
            current[target_index] = cand.token
            return _result(doc, current, steps, logits, y_index)

        for cand, trial, logits, _ in evaluated:
            o_y_trial = float(logits[y_index])
            if o_y_trial < o_y_current:
                steps.append(SubstitutionStep(
                    token_index=target_index, old=original_token, new=cand.token,
                    generator=cand.generator, o_y_before=o_y_current,
                    o_y_after=o_y_trial, accepted=True))
                current[target_index] = cand.token
                o_y_current = o_y_trial

    final_logits = fprime.logits(doc.with_tokens(current))
    return _result(doc, current, steps, final_logits, y_index)


def _result(doc: Document, tokens, steps, final_logits, y_index: int) -> AttackResult:
    adv = PerturbedDocument(id=doc.id, tokens=tuple(tokens), raw=doc.raw,
                            label=doc.label, source_id=doc.id, rank=0,
                            steps=tuple(steps))
    change_count = sum(1 for a, b in zip(doc.tokens, adv.tokens) if a != b)
    success = int(np.argmax(final_logits)) != y_index
    return AttackResult(adv_doc=adv, steps=tuple(steps), success=success,
                        final_logits_fprime=tuple(float(v) for v in final_logits),
                        change_count=change_count)


def augment(fprime: ClassifierModel, doc: Document, y: str,
            cfg: AttackConfig) -> list[PerturbedDocument]:
    """Untargeted simultaneous substitution: sample j replaces every
    target that still has a j-th ranked candidate; no classifier gates
    acceptance. The optional marker token is prepended to each sample
    (it is the caller's job to keep it out of any fitted vocabulary)."""
    if cfg.mode != "augment":
        raise VeilError("augment requires an augment-mode config")
    fprime.label_index(y)
    scores = omission_scores(fprime, doc, y)
    targets = select_targets(scores, cfg.k, cfg.effective_min_score)

    candidate_lists: dict[int, list[Candidate]] = {}
    for target_index in targets:
        cands = generate_candidates(cfg, doc, doc.tokens, target_index)
        if cfg.effective_sanitize:
            cands = sanitize(cands, doc.tokens[target_index])
        cands = filter_and_rank(cfg, doc, doc.tokens, target_index, cands)
        if cands:
            candidate_lists[target_index] = cands

    if not candidate_lists:
        return []

    y_index = fprime.label_index(y)
    o_y_base = float(fprime.logits(doc)[y_index])
    mark = cfg.effective_mark_token
    deepest = max(len(c) for c in candidate_lists.values())
    samples = []
    for rank in range(1, min(cfg.max_samples, deepest) + 1):
        tokens = list(doc.tokens)
        steps = []
        for target_index, cands in candidate_lists.items():
            if len(cands) < rank:
                continue
            cand = cands[rank - 1]
            # Informational trace only: nothing gates on these logits.
            single = _substituted(doc, doc.tokens, target_index, cand.token)
            o_y_single = float(fprime.logits(single)[y_index])
            steps.append(SubstitutionStep(
                token_index=target_index, old=doc.tokens[target_index],
                new=cand.token, generator=cand.generator,
                o_y_before=o_y_base, o_y_after=o_y_single, accepted=True))
            tokens[target_index] = cand.token
        if mark:
            tokens = [mark] + tokens
        samples.append(PerturbedDocument(
            id=f"{doc.id}#aug{rank}", tokens=tuple(tokens),
            raw=" ".join(tokens), label=doc.label, source_id=doc.id,
            rank=rank, steps=tuple(steps)))
    return samples
