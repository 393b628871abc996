"""Candidate generation, sanitization, filtering, and re-ranking.

Generators: embedding nearest-neighbor synonyms, the three lexical
heuristics (leetspeak, middle-character flip, random space split), a
user-supplied synonym lexicon, and the external contextual encoder
(masked or dropout mode). Filtering covers the sanitization rules,
POS compatibility, and sentence-level similarity; re-ranking covers
attention-weighted contextual similarity with a static-embedding
fallback when no encoder service is configured.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoder import EncoderClient
from .errors import EmbeddingError, VeilError
from .text import Document

POS_TAGS = frozenset({"NOUN", "VERB", "ADJ", "ADV", "OTHER"})

GENERATORS = ("synonym", "leet", "flip", "space", "lexicon",
              "external_masked", "external_dropout")

LEET_MAP = {"a": "4", "e": "3", "i": "1", "l": "1", "o": "0", "s": "5", "t": "7"}

WORDPIECE_MARKER = "##"


@dataclass(frozen=True)
class Candidate:
    token: str
    score: float
    generator: str


@dataclass(frozen=True)
class SynonymConfig:
    n: int = 50
    delta: float = 0.7

    def __post_init__(self):
        if self.n < 1:
            raise VeilError(f"synonym N must be >= 1, got {self.n}")
        if not -1.0 <= self.delta <= 1.0:
            raise VeilError(f"delta must be in [-1,1], got {self.delta}")


class EmbeddingTable:
    """word -> dense vector store; words lowercased at load time."""

    def __init__(self, vectors: dict[str, np.ndarray], dim: int):
        self.vectors = vectors
        self.dim = dim

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, word: str):
        return self.vectors.get(word)

    @classmethod
    def load(cls, path) -> "EmbeddingTable":
        """Text format: optional '<count> <dim>' first line, then
        'word v1 ... vd' per line. First occurrence of a word wins."""
        vectors: dict[str, np.ndarray] = {}
        dim = None
        with Path(path).open(encoding="utf-8") as handle:
            first = handle.readline().split()
            lines = []
            if len(first) == 2 and all(_is_int(x) for x in first):
                dim = int(first[1])
            elif first:
                lines.append(first)
            for line in handle:
                cells = line.split()
                if cells:
                    lines.append(cells)
        for line_no, cells in enumerate(lines, start=1):
            word = cells[0].lower()
            try:
                vec = np.array([float(x) for x in cells[1:]], dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingError(f"embedding line {line_no}: {exc}") from exc
            if dim is None:
                dim = len(vec)
            if len(vec) != dim:
                raise EmbeddingError(f"embedding line {line_no}: expected {dim} "
                                     f"dimensions, got {len(vec)}")
            vectors.setdefault(word, vec)
        if not vectors:
            raise EmbeddingError(f"{path}: no embeddings found")
        return cls(vectors=vectors, dim=dim)

    def save(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as handle:
            handle.write(f"{len(self.vectors)} {self.dim}\n")
            for word, vec in self.vectors.items():
                handle.write(word + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def _is_int(text: str) -> bool:
    try:
        int(text)
        return True
    except ValueError:
        return False


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    denom = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return float(np.dot(a, b) / denom)


def synonym_candidates(token: str, table: EmbeddingTable,
                       config: SynonymConfig = SynonymConfig()) -> list[Candidate]:
    """All words w != token with cos(token, w) > delta, best first,
    truncated to N. Unknown tokens yield no candidates."""
    anchor = table.get(token)
    if anchor is None:
        return []
    scored = []
    for word, vec in table.vectors.items():
        if word == token:
            continue
        sim = cosine(anchor, vec)
        if sim > config.delta:
            scored.append((word, sim))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return [Candidate(token=w, score=s, generator="synonym") for w, s in scored[:config.n]]


def heuristic_leet(token: str) -> Candidate:
    """a/e/i/l/o/s/t mapped to digits (case-insensitively), rest kept."""
    out = "".join(LEET_MAP.get(ch.lower(), ch) for ch in token)
    return Candidate(token=out, score=1.0, generator="leet")


def heuristic_flip(token: str) -> Candidate:
    """Swap the two characters straddling the middle; tokens shorter than
    4 characters are left unchanged."""
    if len(token) < 4:
        return Candidate(token=token, score=1.0, generator="flip")
    mid = (len(token) + 1) // 2      # ceil(len/2)
    chars = list(token)
    chars[mid - 1], chars[mid] = chars[mid], chars[mid - 1]
    return Candidate(token="".join(chars), score=1.0, generator="flip")


def heuristic_space(token: str, seed: int = 0, split: int | None = None) -> Candidate:
    """Split into two at a seeded-uniform position in 1..len-1 (or at the
    explicit position); tokens shorter than 2 characters are unchanged."""
    if len(token) < 2:
        return Candidate(token=token, score=1.0, generator="space")
    if split is None:
        split = random.Random(seed).randint(1, len(token) - 1)
    if not 1 <= split <= len(token) - 1:
        raise VeilError(f"split position {split} outside 1..{len(token) - 1}")
    return Candidate(token=token[:split] + " " + token[split:], score=1.0,
                     generator="space")


def lexicon_candidates(token: str, lexicon: dict[str, list[str]]) -> list[Candidate]:
    """Lexicon entries in file order, scored 1/rank, de-duplicated."""
    entries = lexicon.get(token, [])
    seen = set()
    out = []
    for synonym in entries:
        if synonym in seen:
            continue
        seen.add(synonym)
        out.append(Candidate(token=synonym, score=1.0 / (len(out) + 1), generator="lexicon"))
    return out


def external_candidates(doc: Document, target_index: int, mode: str,
                        top_k: int = 10, dropout_p: float = 0.3,
                        endpoint: str | EncoderClient = "") -> list[Candidate]:
    """Ask the external encoder for masked/dropout candidates at the
    target position; server ranking and scores are passed through."""
    client = endpoint if isinstance(endpoint, EncoderClient) else EncoderClient(endpoint)
    pairs = client.candidates(doc.tokens, target_index, mode=mode,
                              top_k=top_k, dropout_p=dropout_p)
    generator = f"external_{mode}"
    return [Candidate(token=tok, score=score, generator=generator)
            for tok, score in pairs[:top_k]]


def sanitize(candidates, target: str) -> list[Candidate]:
    """Drop identities, single characters, plural/de-pluralized forms of
    the target, word-piece fragments, and case-folded duplicates."""
    t = target.lower()
    blocked = {t, t + "s", t + "es"}
    if t.endswith("es"):
        blocked.add(t[:-2])
    if t.endswith("s"):
        blocked.add(t[:-1])
    seen: set[str] = set()
    out = []
    for cand in candidates:
        token = cand.token
        folded = token.lower()
        if folded in blocked or len(token) == 1:
            continue
        if token.startswith(WORDPIECE_MARKER):
            continue
        if folded in seen:
            continue
        seen.add(folded)
        out.append(cand)
    return out


# ---------------------------------------------------------------------------
# Filtering and similarity ranking.

def load_pos_lexicon(path) -> dict[str, frozenset[str]]:
    """tsv 'word<TAB>TAG1|TAG2' with coarse tags NOUN/VERB/ADJ/ADV/OTHER."""
    lexicon: dict[str, frozenset[str]] = {}
    with Path(path).open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != 2:
                raise EmbeddingError(f"pos lexicon line {line_no}: expected 'word<TAB>tags'")
            tags = frozenset(cells[1].split("|"))
            unknown = tags - POS_TAGS
            if unknown:
                raise EmbeddingError(f"pos lexicon line {line_no}: unknown tags {sorted(unknown)}")
            lexicon[cells[0].lower()] = tags
    return lexicon


def load_synonym_lexicon(path) -> dict[str, list[str]]:
    """tsv 'word<TAB>syn1,syn2,...'."""
    lexicon: dict[str, list[str]] = {}
    with Path(path).open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != 2:
                raise EmbeddingError(f"synonym lexicon line {line_no}: expected 'word<TAB>list'")
            lexicon[cells[0].lower()] = [s for s in cells[1].split(",") if s]
    return lexicon


def pos_filter(doc: Document, target_index: int, candidate: str,
               tagger_lexicon: dict[str, frozenset[str]] | None = None) -> bool:
    """Keep the candidate iff its coarse tag set intersects the target's.
    Without a lexicon this is a documented no-op (always keep); words
    missing from the lexicon tag as OTHER."""
    if tagger_lexicon is None:
        return True
    target_tags = tagger_lexicon.get(doc.tokens[target_index].lower(), frozenset({"OTHER"}))
    candidate_tags = tagger_lexicon.get(candidate.lower(), frozenset({"OTHER"}))
    return bool(target_tags & candidate_tags)


def _mean_vector(tokens, table: EmbeddingTable) -> np.ndarray:
    total = np.zeros(table.dim)
    for token in tokens:
        vec = table.get(token)
        if vec is not None:
            total += vec
    return total / len(tokens)


def sentence_similarity(doc: Document, perturbed: Document, table: EmbeddingTable) -> float:
    """Cosine of mean static token vectors (unknown tokens contribute
    zero vectors); 0 when either mean is all-zero."""
    if not doc.tokens or not perturbed.tokens:
        raise VeilError("sentence_similarity needs non-empty documents")
    return cosine(_mean_vector(doc.tokens, table), _mean_vector(perturbed.tokens, table))


@dataclass(frozen=True)
class ContextualEncoding:
    """Per-token contextual vectors plus attention-to-target weights."""

    vectors: np.ndarray                 # (n_tokens, d)
    attention_to_target: np.ndarray     # (n_tokens,), non-negative, sums to 1

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        attention = np.asarray(self.attention_to_target, dtype=np.float64)
        if len(vectors) != len(attention):
            raise VeilError("encoding vectors and attention weights differ in length")
        if np.any(attention < 0) or abs(float(attention.sum()) - 1.0) > 1e-6:
            raise VeilError("attention weights must be non-negative and sum to 1")
        vectors.setflags(write=False)
        attention.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "attention_to_target", attention)

    def __len__(self) -> int:
        return len(self.attention_to_target)


def contextual_sim(enc_doc: ContextualEncoding, enc_perturbed: ContextualEncoding,
                   target_index: int) -> float:
    """Attention-weighted mean cosine between aligned token vectors:
    SIM = sum_i w[i,target] * cos(h(D_i), h(D'_i))."""
    if len(enc_doc) != len(enc_perturbed):
        raise VeilError(f"encodings differ in token count "
                        f"({len(enc_doc)} vs {len(enc_perturbed)})")
    if not 0 <= target_index < len(enc_doc):
        raise VeilError(f"target index {target_index} out of range")
    total = 0.0
    for i in range(len(enc_doc)):
        weight = float(enc_doc.attention_to_target[i])
        if weight == 0.0:
            continue
        total += weight * cosine(enc_doc.vectors[i], enc_perturbed.vectors[i])
    return total


class StaticEncoder:
    """Fallback encoder: static word vectors with uniform attention.
    Substitutes for the external service when none is configured."""

    def __init__(self, table: EmbeddingTable):
        self.table = table

    def encode(self, tokens, target_index: int) -> ContextualEncoding:
        n = len(tokens)
        vectors = np.zeros((n, self.table.dim))
        for i, token in enumerate(tokens):
            vec = self.table.get(token)
            if vec is not None:
                vectors[i] = vec
        return ContextualEncoding(vectors=vectors,
                                  attention_to_target=np.full(n, 1.0 / n))


class HttpContextualEncoder:
    """Encoder backed by the external service's encode mode."""

    def __init__(self, client: EncoderClient):
        self.client = client

    def encode(self, tokens, target_index: int) -> ContextualEncoding:
        vectors, attention = self.client.encode(tokens, target_index)
        return ContextualEncoding(vectors=vectors, attention_to_target=attention)
