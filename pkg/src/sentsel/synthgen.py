"""Seeded synthetic corpora.

All randomness comes from ``numpy.random.Generator(Philox(seed))``: Philox4x32-10,
a counter-based generator, keyed by the 64-bit seed with a zero counter. Draws
are made in a fixed order per sample, so a config fully determines the corpus.

Token inventory (names are stable strings, so the vocabulary is readable):

* ``ent<i>``       query entities
* ``lab<c>_<j>``   label-pattern tokens (single_evidence)
* ``mid<i>``       intermediate tokens (two_hop)
* ``pa<c>_<j>`` / ``pb<c>_<j>``  first/second-hop parity tokens (two_hop)
* ``pos<j>`` / ``neg<j>``        sentiment tokens (discussion)
* ``verdict<j>``   verdict markers (discussion)
* ``w<i>``         fillers; distractor sentences draw only from these
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Dataset, make_sample

FAMILIES = ("single_evidence", "two_hop", "discussion")


@dataclass(frozen=True)
class SynthConfig:
    family: str = "single_evidence"
    num_samples: int = 1000
    vocab_size: int = 200
    sentences_per_doc: int = 8
    query_len: int = 4
    sentence_len: int = 8
    num_labels: int = 2
    seed: int = 1
    # single_evidence / two_hop
    num_entities: int = 10
    patterns_per_label: int = 3
    # two_hop
    num_intermediates: int = 10
    # discussion: opposing evidence counts drawn uniformly from these ranges
    # (unpadded discussion documents ignore sentences_per_doc)
    num_markers: int = 50
    sentiment_tokens: int = 6
    neg_doc_pos_evidence: tuple[int, int] = (4, 8)
    neg_doc_neg_evidence: tuple[int, int] = (1, 3)
    pos_doc_pos_evidence: tuple[int, int] = (1, 3)
    pos_doc_neg_evidence: tuple[int, int] = (1, 1)
    pad_documents: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        for name in ("num_samples", "vocab_size", "sentences_per_doc", "query_len",
                     "sentence_len", "num_labels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.vocab_size <= self.num_labels:
            raise ValueError("vocab_size must exceed num_labels")
        if self.family == "discussion" and self.num_labels != 2:
            raise ValueError("discussion corpora are binary")
        if self.family in ("two_hop", "discussion") and self.sentence_len < 3:
            raise ValueError("sentence_len must be >= 3 for this family")
        if self.family == "discussion":
            ranges = (self.neg_doc_pos_evidence, self.neg_doc_neg_evidence,
                      self.pos_doc_pos_evidence, self.pos_doc_neg_evidence)
            if any(len(r) != 2 or not 0 <= r[0] <= r[1] for r in ranges):
                raise ValueError("evidence ranges must be (lo, hi) with 0 <= lo <= hi")
            # the verdict supplies one sentence of its own polarity; the other side needs >= 1
            if self.neg_doc_pos_evidence[0] < 1 or self.pos_doc_neg_evidence[0] < 1:
                raise ValueError("every review needs at least one opposing evidence sentence")
            if self.num_markers < 1 or self.sentiment_tokens < 1:
                raise ValueError("num_markers and sentiment_tokens must be >= 1")
            most = max(self.neg_doc_pos_evidence[1] + self.neg_doc_neg_evidence[1],
                       self.pos_doc_pos_evidence[1] + self.pos_doc_neg_evidence[1])
            if self.pad_documents and most + 1 > self.sentences_per_doc:
                raise ValueError("sentences_per_doc too small for the evidence ranges")
        if self.family == "two_hop" and self.sentences_per_doc < 2:
            raise ValueError("two_hop needs at least two sentences per document")

    @property
    def label_names(self) -> list[str]:
        if self.family == "discussion":
            return ["NEG", "POS"]
        if self.family == "single_evidence" and self.num_labels == 2:
            return ["REFUTES", "SUPPORTS"]
        if self.family == "two_hop" and self.num_labels == 2:
            return ["FALSE", "TRUE"]
        return [f"L{c}" for c in range(self.num_labels)]


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def _signal_tokens(config: SynthConfig) -> list[str]:
    f = config.family
    if f == "single_evidence":
        return ([f"ent{i}" for i in range(config.num_entities)]
                + [f"lab{c}_{j}" for c in range(config.num_labels) for j in range(config.patterns_per_label)])
    if f == "two_hop":
        return ([f"ent{i}" for i in range(config.num_entities)]
                + [f"mid{i}" for i in range(config.num_intermediates)]
                + [f"{p}{c}_{j}" for p in ("pa", "pb") for c in range(config.num_labels)
                   for j in range(config.patterns_per_label)])
    return ([f"pos{j}" for j in range(config.sentiment_tokens)]
            + [f"neg{j}" for j in range(config.sentiment_tokens)]
            + [f"verdict{j}" for j in range(config.num_markers)]
            + ["review", "sentiment"])


def fillers(config: SynthConfig) -> list[str]:
    n = config.vocab_size - len(_signal_tokens(config))
    if n < 2:
        raise ValueError(f"vocab_size {config.vocab_size} leaves no room for filler tokens")
    return [f"w{i}" for i in range(n)]


def _balanced_labels(rng: np.random.Generator, n: int, t: int) -> np.ndarray:
    labels = np.arange(n) % t
    rng.shuffle(labels)
    return labels


def _sentence(rng, filler, length, fixed=()):
    """``length`` tokens: the fixed tokens at random positions, fillers elsewhere."""
    toks = [filler[i] for i in rng.integers(0, len(filler), size=length)]
    pos = rng.permutation(length)[: len(fixed)]
    for p, tok in zip(pos, fixed):
        toks[p] = tok
    return toks


def gen_single_evidence(config: SynthConfig) -> Dataset:
    """One evidence sentence per document holding the query entity and a label token."""
    if config.family != "single_evidence":
        raise ValueError("config.family must be single_evidence")
    rng = _rng(config.seed)
    filler = fillers(config)
    labels = _balanced_labels(rng, config.num_samples, config.num_labels)
    n, L = config.sentences_per_doc, config.sentence_len
    samples = []
    for k, y in enumerate(labels):
        ent = f"ent{rng.integers(config.num_entities)}"
        query = _sentence(rng, filler, config.query_len, (ent,))
        pattern = f"lab{y}_{rng.integers(config.patterns_per_label)}"
        ev = int(rng.integers(n))
        sents = []
        for i in range(n):
            if i == ev:
                sents.append(_sentence(rng, filler, L, (ent, pattern) if L >= 2 else (pattern,)))
            else:
                sents.append(_sentence(rng, filler, L))
        samples.append(make_sample(f"se-{k}", query, sents, int(y), [[ev]]))
    return Dataset(samples, config.label_names)


def gen_two_hop(config: SynthConfig) -> Dataset:
    """Label = (first-hop parity token + second-hop parity token) mod t.

    The bridge sentence holds the query entity, an intermediate token and a
    first-hop parity token; the second sentence repeats the intermediate token
    next to a second-hop parity token. Both parity tokens are uniform and
    independent, so each sentence alone carries no label information.
    """
    if config.family != "two_hop":
        raise ValueError("config.family must be two_hop")
    rng = _rng(config.seed)
    filler = fillers(config)
    t = config.num_labels
    labels = _balanced_labels(rng, config.num_samples, t)
    n, L = config.sentences_per_doc, config.sentence_len
    samples = []
    for k, y in enumerate(labels):
        ent = f"ent{rng.integers(config.num_entities)}"
        mid = f"mid{rng.integers(config.num_intermediates)}"
        a = int(rng.integers(t))
        b = (int(y) - a) % t
        pa = f"pa{a}_{rng.integers(config.patterns_per_label)}"
        pb = f"pb{b}_{rng.integers(config.patterns_per_label)}"
        i, j = (int(x) for x in rng.choice(n, size=2, replace=False))
        query = _sentence(rng, filler, config.query_len, (ent,))
        sents = []
        for s in range(n):
            if s == i:
                sents.append(_sentence(rng, filler, L, (ent, mid, pa)))
            elif s == j:
                sents.append(_sentence(rng, filler, L, (mid, pb)))
            else:
                sents.append(_sentence(rng, filler, L))
        samples.append(make_sample(f"th-{k}", query, sents, int(y), [[i, j]]))
    return Dataset(samples, config.label_names)


def gen_discussion(config: SynthConfig) -> Dataset:
    """Reviews that argue both sides before a single verdict sentence.

    Evidence sentences carry one sentiment token each; the verdict sentence
    carries a verdict marker next to the sentiment token of the label. NEG
    reviews contain positive evidence built from exactly the same tokens as
    POS evidence, so isolated sentences point in conflicting directions.

    Documents hold only sentiment-bearing sentences, so their length varies
    with the evidence counts; ``pad_documents`` pads every review to
    ``sentences_per_doc`` with filler sentences. Padding makes the number of
    fillers depend on the label, which leaks label information.
    """
    if config.family != "discussion":
        raise ValueError("config.family must be discussion")
    rng = _rng(config.seed)
    filler = fillers(config)
    labels = _balanced_labels(rng, config.num_samples, 2)
    n, L, S = config.sentences_per_doc, config.sentence_len, config.sentiment_tokens
    samples = []
    for k, y in enumerate(labels):
        if y == 0:
            kp = int(rng.integers(config.neg_doc_pos_evidence[0], config.neg_doc_pos_evidence[1] + 1))
            kn = int(rng.integers(config.neg_doc_neg_evidence[0], config.neg_doc_neg_evidence[1] + 1))
        else:
            kp = int(rng.integers(config.pos_doc_pos_evidence[0], config.pos_doc_pos_evidence[1] + 1))
            kn = int(rng.integers(config.pos_doc_neg_evidence[0], config.pos_doc_neg_evidence[1] + 1))
        roles = ["v"] + ["p"] * kp + ["n"] * kn
        if config.pad_documents:
            roles += ["f"] * (n - len(roles))
        roles = [roles[r] for r in rng.permutation(len(roles))]
        sents = []
        for role in roles:
            if role == "v":
                senti = f"{'pos' if y == 1 else 'neg'}{rng.integers(S)}"
                sents.append(_sentence(rng, filler, L, (f"verdict{rng.integers(config.num_markers)}", senti)))
            elif role == "p":
                sents.append(_sentence(rng, filler, L, (f"pos{rng.integers(S)}",)))
            elif role == "n":
                sents.append(_sentence(rng, filler, L, (f"neg{rng.integers(S)}",)))
            else:
                sents.append(_sentence(rng, filler, L))
        query = ["review", "sentiment"][: config.query_len] or ["review"]
        samples.append(make_sample(f"di-{k}", query, sents, int(y), [[roles.index("v")]]))
    return Dataset(samples, config.label_names)


def generate(config: SynthConfig) -> Dataset:
    return {
        "single_evidence": gen_single_evidence,
        "two_hop": gen_two_hop,
        "discussion": gen_discussion,
    }[config.family](config)
