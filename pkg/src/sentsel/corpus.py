"""Data model, ERASER ingestion, the native JSONL format and candidate enumeration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

UNK = "<unk>"
HOP_BUCKETS = ("One", "Two", "Three", "Four", "Five+")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[str, ...]
    index: int

    def __post_init__(self):
        if not self.tokens:
            raise CorpusError(f"sentence {self.index} has no tokens")
        if self.index < 0:
            raise CorpusError("sentence index must be non-negative")


@dataclass(frozen=True)
class Sample:
    """One (query, document) instance.

    ``query`` is the full model input on the query side (claim, or question
    followed by answer). ``answer`` is kept separately so overlap features can
    tell the two parts apart; it is always a suffix of ``query`` when present.
    """

    id: str
    query: tuple[str, ...]
    document: tuple[Sentence, ...]
    label: int
    gold_rationales: frozenset[frozenset[int]] = frozenset()
    answer: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.query:
            raise CorpusError(f"sample {self.id}: empty query")
        if self.label < 0:
            raise CorpusError(f"sample {self.id}: negative label")
        n = len(self.document)
        for pos, sent in enumerate(self.document):
            if sent.index != pos:
                raise CorpusError(f"sample {self.id}: sentence indices must be 0..n-1 in order")
        for gold in self.gold_rationales:
            for idx in gold:
                if not 0 <= idx < n:
                    raise CorpusError(f"sample {self.id}: rationale index {idx} out of range (n={n})")
        if self.answer is not None and tuple(self.query[len(self.query) - len(self.answer):]) != tuple(self.answer):
            raise CorpusError(f"sample {self.id}: answer must be a suffix of the query")

    @property
    def num_sentences(self) -> int:
        return len(self.document)

    @property
    def question(self) -> tuple[str, ...]:
        if not self.answer:
            return self.query
        return self.query[: len(self.query) - len(self.answer)]

    def sentence_offsets(self) -> list[tuple[int, int]]:
        """Token span ``[start, end)`` of every sentence in document coordinates."""
        return _offsets(self.document)


class Vocabulary:
    """Token to dense id mapping with a reserved unknown id (0)."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = [UNK]
        self.stoi: dict[str, int] = {UNK: 0}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self):
        return len(self.itos)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def lookup(self, tokens: Sequence[str]) -> list[int]:
        return [self.stoi.get(t, 0) for t in tokens]

    @classmethod
    def build(cls, samples: Iterable[Sample]) -> "Vocabulary":
        vocab = cls()
        for s in samples:
            for tok in s.query:
                vocab.add(tok)
            for sent in s.document:
                for tok in sent.tokens:
                    vocab.add(tok)
        return vocab


@dataclass
class Dataset:
    samples: list[Sample]
    labels: list[str]
    vocab: Vocabulary = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        t = len(self.labels)
        if t < 1:
            raise CorpusError("dataset needs at least one label")
        for s in self.samples:
            if s.label >= t:
                raise CorpusError(f"sample {s.id}: label {s.label} >= num_labels {t}")
        if self.vocab is None:
            self.vocab = Vocabulary.build(self.samples)

    @property
    def num_labels(self) -> int:
        return len(self.labels)

    def __len__(self):
        return len(self.samples)

    def with_vocab(self, vocab: Vocabulary) -> "Dataset":
        """Same samples, but tokens resolved against another (training) vocabulary."""
        return Dataset(list(self.samples), list(self.labels), vocab)

    def subset(self, samples: list[Sample]) -> "Dataset":
        return Dataset(samples, list(self.labels), self.vocab)


def tokenize(text: str) -> tuple[str, ...]:
    return tuple(text.lower().split())


def segment_document(raw_text: str) -> list[Sentence]:
    out = []
    for line in raw_text.split("\n"):
        toks = tokenize(line)
        if toks:
            out.append(Sentence(toks, len(out)))
    return out


def make_sample(
    id: str,
    query: Sequence[str],
    sentences: Sequence[Sequence[str]],
    label: int,
    rationales: Iterable[Iterable[int]] = (),
    answer: Sequence[str] | None = None,
) -> Sample:
    return Sample(
        id=id,
        query=tuple(query),
        document=tuple(Sentence(tuple(toks), i) for i, toks in enumerate(sentences)),
        label=label,
        gold_rationales=frozenset(frozenset(r) for r in rationales),
        answer=None if answer is None else tuple(answer),
    )


# -- candidates ---------------------------------------------------------------

def enumerate_candidates(sample_or_n: Sample | int, h: int) -> list[tuple[int, ...]]:
    """Query-only candidate first, then singletons, then (h=2) all pairs i<j."""
    if h not in (1, 2):
        raise CorpusError(f"h must be 1 or 2, got {h}")
    n = sample_or_n if isinstance(sample_or_n, int) else sample_or_n.num_sentences
    cands: list[tuple[int, ...]] = [()]
    cands.extend((i,) for i in range(n))
    if h == 2:
        cands.extend(combinations(range(n), 2))
    return cands


def num_candidates(n: int, h: int) -> int:
    return n + 1 + (n * (n - 1) // 2 if h == 2 else 0)


def gold_mask(sample: Sample, candidates: Sequence[tuple[int, ...]]) -> list[bool]:
    """A candidate is a positive rationale target iff it is a non-empty subset of some gold set."""
    golds = sample.gold_rationales
    return [bool(c) and any(set(c) <= g for g in golds) for c in candidates]


# -- statistics ---------------------------------------------------------------

@dataclass
class CorpusStats:
    num_samples: int
    rationales_per_sample: float
    min_hops: dict[str, int]

    def format(self) -> str:
        lines = [
            f"# Samples            {self.num_samples}",
            f"Rationales / Sample  {self.rationales_per_sample:.1f}",
            "Minimum reasoning-hops",
        ]
        lines += [f"  {k:<6} {v}" for k, v in self.min_hops.items()]
        return "\n".join(lines)


def corpus_stats(dataset: Dataset | Sequence[Sample]) -> CorpusStats:
    samples = dataset.samples if isinstance(dataset, Dataset) else list(dataset)
    hist = {k: 0 for k in HOP_BUCKETS}
    for s in samples:
        if not s.gold_rationales:
            continue
        hops = min(len(g) for g in s.gold_rationales)
        hist[HOP_BUCKETS[min(max(hops, 1), 5) - 1]] += 1
    mean = sum(len(s.gold_rationales) for s in samples) / len(samples) if samples else 0.0
    return CorpusStats(len(samples), mean, hist)


# -- native JSONL -------------------------------------------------------------

def sample_to_record(sample: Sample, labels: Sequence[str]) -> dict:
    rec = {
        "id": sample.id,
        "query": list(sample.query),
        "sentences": [list(s.tokens) for s in sample.document],
        "label": labels[sample.label],
        "rationales": sorted(sorted(g) for g in sample.gold_rationales),
    }
    if sample.answer is not None:
        rec["answer"] = list(sample.answer)
    return rec


def dumps_native(dataset: Dataset) -> str:
    return "".join(
        json.dumps(sample_to_record(s, dataset.labels), ensure_ascii=False) + "\n"
        for s in dataset.samples
    )


def labels_path(path: str | Path) -> Path:
    """Sidecar holding the ordered class names, which records alone cannot recover."""
    path = Path(path)
    return path.with_name(path.name + ".labels.json")


def write_native(dataset: Dataset, path: str | Path) -> None:
    Path(path).write_text(dumps_native(dataset), encoding="utf-8")
    labels_path(path).write_text(json.dumps(dataset.labels) + "\n", encoding="utf-8")


def loads_native(text: str, labels: Sequence[str] | None = None) -> Dataset:
    """Parse native JSONL. Labels default to the sorted set of label strings present."""
    records = [json.loads(line) for line in text.splitlines() if line.strip()]
    if labels is None:
        labels = sorted({r["label"] for r in records})
    index = {name: i for i, name in enumerate(labels)}
    samples = []
    for r in records:
        if r["label"] not in index:
            raise CorpusError(f"sample {r['id']}: unknown label {r['label']!r}")
        samples.append(
            make_sample(
                r["id"], r["query"], r["sentences"], index[r["label"]],
                r.get("rationales", []), r.get("answer"),
            )
        )
    return Dataset(samples, list(labels))


def read_native(path: str | Path, labels: Sequence[str] | None = None) -> Dataset:
    """Labels come from the argument, else the sidecar, else the labels present."""
    if labels is None and labels_path(path).exists():
        labels = json.loads(labels_path(path).read_text(encoding="utf-8"))
    return loads_native(Path(path).read_text(encoding="utf-8"), labels)


# -- ERASER -------------------------------------------------------------------

def _offsets(doc: Sequence[Sentence]) -> list[tuple[int, int]]:
    spans, start = [], 0
    for sent in doc:
        spans.append((start, start + len(sent.tokens)))
        start += len(sent.tokens)
    return spans


def _doc_id(record: dict) -> str:
    if record.get("docids"):
        return record["docids"][0]
    for group in record.get("evidences") or []:
        for ev in group:
            return ev["docid"]
    return record["annotation_id"]


def _evidence_sentences(ev: dict, offsets: list[tuple[int, int]], rid: str) -> set[int]:
    n = len(offsets)
    start, end = ev.get("start_sentence", -1), ev.get("end_sentence", -1)
    if start is not None and start >= 0:
        if not (0 <= start < end <= n):
            raise CorpusError(f"record {rid}: sentence range [{start},{end}) out of range (n={n})")
        return set(range(start, end))
    # span-level annotation: every sentence the token span intersects
    ts, te = ev["start_token"], ev["end_token"]
    hit = {i for i, (a, b) in enumerate(offsets) if a < te and ts < b}
    if not hit:
        raise CorpusError(f"record {rid}: token span [{ts},{te}) outside document")
    return hit


def import_eraser(docs_dir: str | Path, annotations: str | Path, label_map: Mapping[str, int]) -> Dataset:
    docs_dir = Path(docs_dir)
    labels = [None] * (max(label_map.values()) + 1)
    for name, idx in label_map.items():
        labels[idx] = name
    if any(lab is None for lab in labels):
        raise CorpusError("label_map ids must be dense from 0")
    cache: dict[str, list[Sentence]] = {}
    samples = []
    with open(annotations, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            rid = rec["annotation_id"]
            docid = _doc_id(rec)
            if docid not in cache:
                path = docs_dir / docid
                if not path.exists():
                    raise CorpusError(f"record {rid}: missing document file for docid {docid!r}")
                cache[docid] = segment_document(path.read_text(encoding="utf-8"))
            doc = cache[docid]
            cls = rec["classification"]
            if cls not in label_map:
                raise CorpusError(f"record {rid}: unknown classification {cls!r}")
            query = rec["query"]
            answer = None
            if "||" in query:
                q, a = query.split("||", 1)
                answer = tokenize(a)
                query_toks = tokenize(q) + answer
            else:
                query_toks = tokenize(query)
            offsets = _offsets(doc)
            golds = set()
            for group in rec.get("evidences") or []:
                sents: set[int] = set()
                for ev in group:
                    sents |= _evidence_sentences(ev, offsets, rid)
                if sents:
                    golds.add(frozenset(sents))
            samples.append(
                Sample(rid, query_toks, tuple(doc), label_map[cls], frozenset(golds), answer or None)
            )
    return Dataset(samples, labels)
