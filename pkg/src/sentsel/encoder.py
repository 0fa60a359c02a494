"""Reference candidate encoder with hand-derived gradients.

Every candidate of a sample is encoded independently of the others:

    q  = mean(E[query])                      shared by all candidates
    v  = mean(E[sentence])  or  null         per base unit (query-only, each sentence)
    h  = tanh([q, v] @ W1 + b1)              per base unit
    h  = max(h_a, h_b)                       pair candidates, elementwise
    z  = h @ W2 + b2                         one logit row per candidate
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Sample, Vocabulary

PARAM_ORDER = ("embedding", "null_sentence", "W1", "b1", "W2", "b2")
CHECKPOINT_FORMAT = "sentsel-checkpoint"
CHECKPOINT_VERSION = 1


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    num_labels: int
    embed_dim: int = 16
    hidden_dim: int = 16
    h: int = 1

    def shapes(self) -> dict[str, tuple[int, ...]]:
        d, dh, t = self.embed_dim, self.hidden_dim, self.num_labels
        return {
            "embedding": (self.vocab_size, d),
            "null_sentence": (d,),
            "W1": (2 * d, dh),
            "b1": (dh,),
            "W2": (dh, t),
            "b2": (t,),
        }


@dataclass
class ModelParams:
    embedding: np.ndarray
    null_sentence: np.ndarray
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, f.name) for f in fields(self)]

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def copy(self) -> "ModelParams":
        return ModelParams(*(a.copy() for a in self.arrays()))

    def zeros_like(self) -> "ModelParams":
        return ModelParams(*(np.zeros_like(a) for a in self.arrays()))

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(*(a.astype(dtype) for a in self.arrays()))

    def check(self, config: EncoderConfig) -> None:
        for name, shape in config.shapes().items():
            got = getattr(self, name).shape
            if got != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {got}")

    @property
    def embed_dim(self) -> int:
        return self.embedding.shape[1]

    @property
    def num_labels(self) -> int:
        return self.W2.shape[1]


def init_params(config: EncoderConfig, rng: np.random.Generator, scale: float = 0.1,
                dtype=np.float32) -> ModelParams:
    """Weights and embeddings uniform in [-scale, scale]; biases zero."""
    arrays = {}
    for name, shape in config.shapes().items():
        if name in ("b1", "b2"):
            arrays[name] = np.zeros(shape, dtype=dtype)
        else:
            arrays[name] = rng.uniform(-scale, scale, size=shape).astype(dtype)
    return ModelParams(**arrays)


@dataclass
class EncodedSample:
    """Token ids of one sample resolved against a vocabulary."""

    query: np.ndarray
    sentences: list[np.ndarray]

    @classmethod
    def from_sample(cls, sample: Sample, vocab: Vocabulary) -> "EncodedSample":
        return cls(
            np.asarray(vocab.lookup(sample.query), dtype=np.intp),
            [np.asarray(vocab.lookup(s.tokens), dtype=np.intp) for s in sample.document],
        )


@dataclass
class ForwardCache:
    inputs: EncodedSample
    candidates: list[tuple[int, ...]]
    units: np.ndarray        # (n+1, 2d) concatenated [q, v] per base unit
    hidden: np.ndarray       # (n+1, dh) tanh activations per base unit
    cand_hidden: np.ndarray  # (C, dh) representation fed to the head
    pair_first: np.ndarray   # (P, dh) bool, True where the first sentence won the max
    pair_rows: np.ndarray    # candidate rows that are pairs
    pair_units: np.ndarray   # (P, 2) base-unit indices of those pairs
    single_rows: np.ndarray
    single_units: np.ndarray


def aggregate_pair(h_a: np.ndarray, h_b: np.ndarray) -> np.ndarray:
    h_a, h_b = np.asarray(h_a), np.asarray(h_b)
    if h_a.shape != h_b.shape:
        raise ShapeError(f"cannot max-pool shapes {h_a.shape} and {h_b.shape}")
    return np.maximum(h_a, h_b)


def encode_candidates(params: ModelParams, inputs: EncodedSample,
                      candidates: Sequence[tuple[int, ...]]) -> tuple[np.ndarray, ForwardCache]:
    """Logits ``z`` of shape (len(candidates), t) plus the cache for :func:`backward`."""
    E = params.embedding
    d = E.shape[1]
    if params.W1.shape[0] != 2 * d or params.W2.shape[0] != params.W1.shape[1]:
        raise ShapeError("parameter shapes are inconsistent")
    n = len(inputs.sentences)
    if inputs.query.size and inputs.query.max() >= E.shape[0]:
        raise ShapeError("token id outside embedding table")

    q = E[inputs.query].mean(axis=0)
    units = np.empty((n + 1, 2 * d), dtype=E.dtype)
    units[:, :d] = q
    units[0, d:] = params.null_sentence
    for i, ids in enumerate(inputs.sentences):
        units[i + 1, d:] = E[ids].mean(axis=0)
    hidden = np.tanh(units @ params.W1 + params.b1)

    single_rows, single_units, pair_rows, pair_units = [], [], [], []
    for row, cand in enumerate(candidates):
        if len(cand) <= 1:
            single_rows.append(row)
            single_units.append(cand[0] + 1 if cand else 0)
        elif len(cand) == 2:
            pair_rows.append(row)
            pair_units.append((cand[0] + 1, cand[1] + 1))
        else:
            raise ShapeError(f"candidate {cand} has more than two sentences")
    single_rows = np.asarray(single_rows, dtype=np.intp)
    single_units = np.asarray(single_units, dtype=np.intp)
    pair_rows = np.asarray(pair_rows, dtype=np.intp)
    pair_units = np.asarray(pair_units, dtype=np.intp).reshape(-1, 2)

    cand_hidden = np.empty((len(candidates), hidden.shape[1]), dtype=hidden.dtype)
    cand_hidden[single_rows] = hidden[single_units]
    ha, hb = hidden[pair_units[:, 0]], hidden[pair_units[:, 1]]
    cand_hidden[pair_rows] = aggregate_pair(ha, hb)
    z = cand_hidden @ params.W2 + params.b2

    cache = ForwardCache(inputs, list(candidates), units, hidden, cand_hidden, ha >= hb,
                         pair_rows, pair_units, single_rows, single_units)
    return z, cache


def backward(params: ModelParams, cache: ForwardCache, dz: np.ndarray,
             grads: ModelParams | None = None) -> ModelParams:
    """Gradient of the loss w.r.t. every parameter given ``dL/dz``.

    When ``grads`` is passed the result is accumulated into it in place.
    """
    dz = np.asarray(dz, dtype=params.W2.dtype)
    if dz.shape != (len(cache.candidates), params.W2.shape[1]):
        raise ShapeError(f"dL/dz has shape {dz.shape}, cache expects "
                         f"{(len(cache.candidates), params.W2.shape[1])}")
    if cache.cand_hidden.shape[1] != params.W2.shape[0]:
        raise ShapeError("cache does not match parameters")
    if grads is None:
        grads = params.zeros_like()

    d = params.embedding.shape[1]
    grads.W2 += cache.cand_hidden.T @ dz
    grads.b2 += dz.sum(axis=0)
    dch = dz @ params.W2.T

    dh = np.zeros_like(cache.hidden)
    np.add.at(dh, cache.single_units, dch[cache.single_rows])
    if len(cache.pair_rows):
        dpair = dch[cache.pair_rows]
        m = cache.pair_first
        np.add.at(dh, cache.pair_units[:, 0], np.where(m, dpair, 0.0))
        np.add.at(dh, cache.pair_units[:, 1], np.where(m, 0.0, dpair))

    dpre = dh * (1.0 - cache.hidden ** 2)
    grads.W1 += cache.units.T @ dpre
    grads.b1 += dpre.sum(axis=0)
    dunits = dpre @ params.W1.T

    dq = dunits[:, :d].sum(axis=0)
    qids = cache.inputs.query
    np.add.at(grads.embedding, qids, dq / len(qids))
    grads.null_sentence += dunits[0, d:]
    for i, ids in enumerate(cache.inputs.sentences):
        np.add.at(grads.embedding, ids, dunits[i + 1, d:] / len(ids))
    return grads


# -- checkpoints ----------------------------------------------------------------

def save_checkpoint(path: str | Path, params: ModelParams, config: EncoderConfig,
                    vocab: Vocabulary, labels: Sequence[str]) -> None:
    """JSON container. Key order: format, version, config, labels, vocabulary, params.

    ``params`` holds one flat row-major list per array in the order
    embedding, null_sentence, W1, b1, W2, b2.
    """
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": {
            "embed_dim": config.embed_dim,
            "hidden_dim": config.hidden_dim,
            "num_labels": config.num_labels,
            "vocab_size": config.vocab_size,
            "h": config.h,
        },
        "labels": list(labels),
        "vocabulary": list(vocab.itos),
        "params": {name: np.asarray(arr, dtype=np.float64).ravel().tolist() for name, arr in params.items()},
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path: str | Path, dtype=np.float32):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise ShapeError(f"{path}: not a version {CHECKPOINT_VERSION} {CHECKPOINT_FORMAT} file")
    config = EncoderConfig(**doc["config"])
    vocab = Vocabulary(doc["vocabulary"][1:])
    if len(vocab) != config.vocab_size or vocab.itos != doc["vocabulary"]:
        raise ShapeError(f"{path}: vocabulary does not match header vocab_size={config.vocab_size}")
    if len(doc["labels"]) != config.num_labels:
        raise ShapeError(f"{path}: {len(doc['labels'])} labels but header says {config.num_labels}")
    arrays = {}
    for name, shape in config.shapes().items():
        flat = np.asarray(doc["params"][name], dtype=np.float64)
        if flat.size != int(np.prod(shape)):
            raise ShapeError(f"{path}: {name} has {flat.size} values, expected shape {shape}")
        arrays[name] = flat.reshape(shape).astype(dtype)
    return ModelParams(**arrays), config, vocab, list(doc["labels"])
