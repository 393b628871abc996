"""Obfuscation and semantic-consistency metrics.

meteor_lite is a deliberately reduced METEOR: exact-match unigram
alignment only (no stemming or synonym stages), leftmost-greedy with
each token matched at most once, Fmean = 10PR/(R+9P), and the standard
fragmentation penalty 0.5*(chunks/matches)^3. Absolute values are not
comparable with other METEOR implementations, but the metric moves in
the same direction.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import VeilError
from .text import Document


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    delta_accuracy: float
    chance_p: float
    tpr: float | None
    meteor_mean: float | None
    change_rate_mean: float | None
    n: int
    per_label: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "delta_accuracy": self.delta_accuracy,
            "chance_p": self.chance_p,
            "tpr": self.tpr,
            "meteor_mean": self.meteor_mean,
            "change_rate_mean": self.change_rate_mean,
            "n": self.n,
            "per_label": dict(self.per_label),
        }


def accuracy(preds, gold) -> float:
    if len(preds) != len(gold) or not gold:
        raise VeilError("predictions and gold labels must align and be non-empty")
    return sum(1 for p, g in zip(preds, gold) if p == g) / len(gold)


def majority_baseline(gold) -> float:
    """Chance level p: relative frequency of the most common gold label."""
    if not gold:
        raise VeilError("cannot compute a majority baseline on empty input")
    counts: dict[str, int] = {}
    for label in gold:
        counts[label] = counts.get(label, 0) + 1
    return max(counts.values()) / len(gold)


def delta_accuracy(preds, gold, p: float) -> float:
    """accuracy - p; negative means the adversary dropped below chance."""
    if not 0.0 <= p <= 1.0:
        raise VeilError(f"majority baseline p must be in [0,1], got {p}")
    return accuracy(preds, gold) - p


def tpr(preds, gold, positive_label: str) -> float:
    """TP / gold positives."""
    positives = sum(1 for g in gold if g == positive_label)
    if positives == 0:
        raise VeilError(f"no gold-positive instances for label {positive_label!r}")
    true_positives = sum(1 for p, g in zip(preds, gold)
                         if g == positive_label and p == positive_label)
    return true_positives / positives


def tpr_decrease(before: float, after: float) -> float:
    return before - after


def _align(hyp, ref) -> list[tuple[int, int]]:
    """Leftmost-greedy exact unigram alignment, each token matched once."""
    used = [False] * len(ref)
    pairs = []
    for i, token in enumerate(hyp):
        for j, ref_token in enumerate(ref):
            if not used[j] and ref_token == token:
                used[j] = True
                pairs.append((i, j))
                break
    return pairs


def _chunks(pairs) -> int:
    """Maximal runs of adjacent hypothesis positions mapped to adjacent
    reference positions in order."""
    if not pairs:
        return 0
    count = 1
    for (h0, r0), (h1, r1) in zip(pairs, pairs[1:]):
        if h1 != h0 + 1 or r1 != r0 + 1:
            count += 1
    return count


def meteor_lite(hypothesis, reference) -> float:
    hyp = list(hypothesis)
    ref = list(reference)
    if not ref:
        raise VeilError("meteor_lite needs a non-empty reference")
    if not hyp:
        return 0.0
    pairs = _align(hyp, ref)
    m = len(pairs)
    if m == 0:
        return 0.0
    precision = m / len(hyp)
    recall = m / len(ref)
    fmean = 10 * precision * recall / (recall + 9 * precision)
    penalty = 0.5 * (_chunks(pairs) / m) ** 3
    return fmean * (1.0 - penalty)


def change_rate(doc: Document, adv_doc: Document) -> float:
    """Changed positions over token count. Substitution-only accounting:
    a space split stays at its origin index, so lengths must match."""
    if len(doc.tokens) != len(adv_doc.tokens):
        raise VeilError(f"documents differ in token count ({len(doc.tokens)} vs "
                        f"{len(adv_doc.tokens)}); change_rate is substitution-only")
    if not doc.tokens:
        raise VeilError("change_rate needs non-empty documents")
    changed = sum(1 for a, b in zip(doc.tokens, adv_doc.tokens) if a != b)
    return changed / len(doc.tokens)


def evaluate(preds, gold, chance_p: float | None = None,
             positive_label: str | None = None,
             doc_pairs=None) -> EvalReport:
    """Aggregate report over a document set; METEOR and change rate are
    means over (original, perturbed) pairs when provided."""
    p = majority_baseline(gold) if chance_p is None else chance_p
    acc = accuracy(preds, gold)
    per_label: dict[str, int] = {}
    for g in gold:
        per_label[g] = per_label.get(g, 0) + 1
    rate = None
    meteor = None
    if doc_pairs:
        meteor = sum(meteor_lite(adv.tokens, orig.tokens)
                     for orig, adv in doc_pairs) / len(doc_pairs)
        rate = sum(change_rate(orig, adv) for orig, adv in doc_pairs) / len(doc_pairs)
    tp_rate = tpr(preds, gold, positive_label) if positive_label is not None else None
    return EvalReport(accuracy=acc, delta_accuracy=acc - p, chance_p=p,
                      tpr=tp_rate, meteor_mean=meteor, change_rate_mean=rate,
                      n=len(gold), per_label=per_label)
