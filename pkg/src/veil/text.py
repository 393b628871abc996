"""Corpus ingestion, tokenization, splitting, and descriptive statistics.

The tokenizer is deliberately rule-based and deterministic so that every
downstream result is reproducible without external models: lowercasing,
``@mention`` -> ``<user>``, URL removal, ``#tag`` split into ``#`` + tag,
punctuation split from words. Angle-bracket specials such as ``<user>``
(and augmentation markers like ``<a>``) survive re-tokenization, which
makes tokenize idempotent on its own space-joined output.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CorpusError

_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
# Order matters: specials and mentions before generic word/punct classes.
_TOKEN_RE = re.compile(r"<[a-z0-9_]+>|@\w+|\w+(?:'\w+)*|#|@|[^\w\s#@]+")

USER_TOKEN = "<user>"


@dataclass(frozen=True)
class Document:
    """A tokenized text with optional class label.

    ``tokens`` joined by single spaces round-trips through tokenize();
    ``raw`` keeps the pre-normalization text and does not.
    """

    id: str
    tokens: tuple[str, ...]
    raw: str
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))

    @property
    def text(self) -> str:
        """Normalized form: tokens joined by single spaces."""
        return " ".join(self.tokens)

    def with_tokens(self, tokens, **extra) -> "Document":
        return Document(id=extra.get("id", self.id), tokens=tuple(tokens),
                        raw=extra.get("raw", self.raw), label=self.label)


@dataclass(frozen=True)
class LabeledCorpus:
    """Documents plus their lexicographically sorted label inventory."""

    documents: tuple[Document, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        object.__setattr__(self, "labels", tuple(self.labels))
        known = set(self.labels)
        for doc in self.documents:
            if doc.label not in known:
                raise CorpusError(f"document {doc.id!r} has label {doc.label!r} "
                                  f"outside the corpus label set {sorted(known)}")

    @classmethod
    def from_documents(cls, documents) -> "LabeledCorpus":
        docs = tuple(documents)
        labels = sorted({d.label for d in docs if d.label is not None})
        return cls(documents=docs, labels=tuple(labels))

    def __len__(self) -> int:
        return len(self.documents)

    def subset(self, indices) -> "LabeledCorpus":
        return LabeledCorpus(documents=tuple(self.documents[i] for i in indices),
                             labels=self.labels)

    def by_label(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {label: [] for label in self.labels}
        for i, doc in enumerate(self.documents):
            out[doc.label].append(i)
        return out


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise CorpusError(f"train_fraction must be in (0,1), got {self.train_fraction}")


def tokenize(text: str) -> list[str]:
    """Lowercase, drop URLs, map @mentions to <user>, split # from tags
    and punctuation from words. Empty input yields an empty list."""
    lowered = _URL_RE.sub(" ", text.lower())
    tokens = []
    for match in _TOKEN_RE.finditer(lowered):
        tok = match.group()
        if tok.startswith("@") and len(tok) > 1:
            tokens.append(USER_TOKEN)
        else:
            tokens.append(tok)
    return tokens


def _coerce_label(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, float)):
        return str(value)
    raise TypeError(f"label must be a string or number, got {type(value).__name__}")


def _record_to_document(record: dict, line_no: int, default_label: str | None) -> Document:
    if "text" not in record:
        raise CorpusError(f"line {line_no}: missing 'text' field")
    raw = record["text"]
    if not isinstance(raw, str):
        raise CorpusError(f"line {line_no}: 'text' must be a string")
    label = record.get("label", default_label)
    if label is None:
        raise CorpusError(f"line {line_no}: missing 'label' field")
    try:
        label = _coerce_label(label)
    except TypeError as exc:
        raise CorpusError(f"line {line_no}: {exc}") from exc
    tokens = tokenize(raw)
    if not tokens:
        raise CorpusError(f"line {line_no}: text tokenizes to zero tokens")
    doc_id = str(record.get("id", line_no))
    return Document(id=doc_id, tokens=tuple(tokens), raw=raw, label=label)


def load_corpus(path, format: str = "jsonl", default_label: str | None = None) -> LabeledCorpus:
    """Read a jsonl ({"text","label","id"?}) or tsv (header text<TAB>label[<TAB>id])
    corpus. Malformed records raise CorpusError with their line number."""
    path = Path(path)
    if format == "jsonl":
        docs = _load_jsonl(path, default_label)
    elif format == "tsv":
        docs = _load_tsv(path, default_label)
    else:
        raise CorpusError(f"unknown corpus format {format!r} (expected jsonl or tsv)")
    if not docs:
        raise CorpusError(f"{path}: corpus is empty")
    return LabeledCorpus.from_documents(docs)


def _load_jsonl(path: Path, default_label) -> list[Document]:
    docs = []
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid json ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise CorpusError(f"line {line_no}: record must be a json object")
            docs.append(_record_to_document(record, line_no, default_label))
    return docs


def _load_tsv(path: Path, default_label) -> list[Document]:
    docs = []
    with path.open(encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n")
        columns = header.split("\t")
        if columns[:2] != ["text", "label"] or len(columns) > 3 or \
                (len(columns) == 3 and columns[2] != "id"):
            raise CorpusError(f"line 1: tsv header must be 'text\\tlabel' "
                              f"(optionally '\\tid'), got {header!r}")
        for line_no, line in enumerate(handle, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != len(columns):
                raise CorpusError(f"line {line_no}: expected {len(columns)} "
                                  f"tab-separated fields, got {len(cells)}")
            record = dict(zip(columns, cells))
            docs.append(_record_to_document(record, line_no, default_label))
    return docs


def author_key(doc_id: str) -> str:
    """Author convention: the id prefix before ':'; ids without ':' are
    treated as one-document authors."""
    return doc_id.split(":", 1)[0]


def chunk_by_author(corpus: LabeledCorpus, max_docs_per_chunk: int) -> LabeledCorpus:
    """Concatenate consecutive documents of one author into chunk documents
    of at most ``max_docs_per_chunk`` source documents each. Order preserved,
    no shuffling; an author carrying mixed labels is an error."""
    if max_docs_per_chunk < 1:
        raise CorpusError("max_docs_per_chunk must be >= 1")
    author_labels: dict[str, str] = {}
    for doc in corpus.documents:
        author = author_key(doc.id)
        seen = author_labels.setdefault(author, doc.label)
        if seen != doc.label:
            raise CorpusError(f"author {author!r} has mixed labels "
                              f"({seen!r} and {doc.label!r})")

    chunks: list[Document] = []
    chunk_counts: dict[str, int] = {}
    run: list[Document] = []

    def flush(author: str):
        for start in range(0, len(run), max_docs_per_chunk):
            members = run[start:start + max_docs_per_chunk]
            index = chunk_counts.get(author, 0)
            chunk_counts[author] = index + 1
            tokens = tuple(tok for m in members for tok in m.tokens)
            chunks.append(Document(id=f"{author}:{index}", tokens=tokens,
                                   raw=" ".join(m.raw for m in members),
                                   label=members[0].label))
        run.clear()

    current: str | None = None
    for doc in corpus.documents:
        author = author_key(doc.id)
        if current is not None and author != current:
            flush(current)
        current = author
        run.append(doc)
    if current is not None:
        flush(current)
    return LabeledCorpus(documents=tuple(chunks), labels=corpus.labels)


def _round_half_up(x: float) -> int:
    return int(x + 0.5)


def split(corpus: LabeledCorpus, spec: SplitSpec) -> tuple[LabeledCorpus, LabeledCorpus]:
    """Deterministic train/test split. Stratified mode keeps each label's
    train count within 1 of the exact proportion; remainders are handed out
    to labels in lexicographic order."""
    n = len(corpus)
    if n < 2:
        raise CorpusError("cannot split a corpus with fewer than 2 documents")
    rng = random.Random(spec.seed)

    if not spec.stratified:
        order = list(range(n))
        rng.shuffle(order)
        n_train = _round_half_up(spec.train_fraction * n)
        n_train = min(max(n_train, 1), n - 1)
        train_idx = sorted(order[:n_train])
        test_idx = sorted(order[n_train:])
        return corpus.subset(train_idx), corpus.subset(test_idx)

    per_label = corpus.by_label()
    for label, indices in per_label.items():
        if len(indices) < 2:
            raise CorpusError(f"stratified split needs >=2 documents per label; "
                              f"label {label!r} has {len(indices)}")

    base = {label: int(spec.train_fraction * len(idx)) for label, idx in per_label.items()}
    deficit = _round_half_up(spec.train_fraction * n) - sum(base.values())
    for label in corpus.labels:
        if deficit <= 0:
            break
        if base[label] < len(per_label[label]) - 1:
            base[label] += 1
            deficit -= 1

    train_idx: list[int] = []
    test_idx: list[int] = []
    for label in corpus.labels:
        indices = list(per_label[label])
        rng.shuffle(indices)
        n_train = min(max(base[label], 1), len(indices) - 1)
        train_idx.extend(indices[:n_train])
        test_idx.extend(indices[n_train:])
    return corpus.subset(sorted(train_idx)), corpus.subset(sorted(test_idx))


def vocabulary(corpus: LabeledCorpus) -> set[str]:
    return {tok for doc in corpus.documents for tok in doc.tokens}


def jaccard(vocab_a: set[str], vocab_b: set[str]) -> float:
    """|A ∩ B| / |A ∪ B|; two empty sets count as identical (1.0)."""
    union = vocab_a | vocab_b
    if not union:
        return 1.0
    return len(vocab_a & vocab_b) / len(union)


def corpus_stats(corpus: LabeledCorpus) -> dict:
    token_count = sum(len(d.tokens) for d in corpus.documents)
    label_counts = {label: 0 for label in corpus.labels}
    for doc in corpus.documents:
        label_counts[doc.label] += 1
    return {
        "n_docs": len(corpus),
        "n_tokens": token_count,
        "n_types": len(vocabulary(corpus)),
        "avg_tokens_per_doc": token_count / len(corpus) if len(corpus) else 0.0,
        "label_counts": label_counts,
    }
