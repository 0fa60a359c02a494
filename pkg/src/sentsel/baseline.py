"""Lexical-overlap sentence selection feeding a two-feature logistic regression.

Each sentence is scored by ``r = w_q * q_s + w_a * a_s`` where ``q_s``/``a_s``
are type-level overlaps between the sentence and the non-stopword types of the
question/answer. The best sentence's ``(q_s, a_s)`` is the LR input.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .corpus import Dataset, Sample
from .evalmetrics import per_class_prf

MODES = ("absolute", "relative")
DEFAULT_GRID = tuple(round(0.1 * i, 1) for i in range(11))


def load_stopwords(path: str | None = None) -> frozenset[str]:
    """The shipped list, or one word per line from ``path``; ``#`` starts a comment line."""
    if path is None:
        text = resources.files("sentsel").joinpath("stopwords.txt").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip() and not w.startswith("#"))


def is_punct(token: str) -> bool:
    return all(ch in string.punctuation for ch in token)


def content_types(tokens: Iterable[str], stoplist: frozenset[str]) -> set[str]:
    return {t for t in tokens if t not in stoplist and not is_punct(t)}


@dataclass(frozen=True)
class OverlapFeatures:
    q_s: float
    a_s: float
    mode: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


def _overlap(sent_types: set[str], ref: set[str], mode: str) -> float:
    if not ref:
        return 0.0
    hit = len(ref & sent_types)
    return float(hit) if mode == "absolute" else hit / len(ref)


def overlap_features(sentence: Sequence[str], question: Sequence[str], answer: Sequence[str] | None,
                     stoplist: frozenset[str], mode: str = "absolute") -> OverlapFeatures:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    sent = set(sentence)
    q = content_types(question, stoplist)
    a = content_types(answer or (), stoplist)
    return OverlapFeatures(_overlap(sent, q, mode), _overlap(sent, a, mode), mode)


def sentence_features(sample: Sample, stoplist: frozenset[str], mode: str) -> np.ndarray:
    """(n, 2) matrix of ``(q_s, a_s)`` for every sentence of the document."""
    rows = [overlap_features(s.tokens, sample.question, sample.answer, stoplist, mode) for s in sample.document]
    return np.array([[f.q_s, f.a_s] for f in rows], dtype=float).reshape(-1, 2)


def pick(scores: Sequence[float], lengths: Sequence[int]) -> int:
    """Highest score; ties go to the shorter sentence, then to the lower index."""
    if len(scores) == 0:
        raise ValueError("cannot select from an empty document")
    # rounding absorbs last-bit differences so equal scores stay tied
    key = [(-round(float(r), 9), int(n), i) for i, (r, n) in enumerate(zip(scores, lengths))]
    return min(key)[2]


def _scores(feats: np.ndarray, w_q: float, w_a: float) -> np.ndarray:
    scale = max(abs(w_q), abs(w_a))
    if scale == 0:
        return np.zeros(len(feats))
    # normalized so that (w_q, w_a) and (c*w_q, c*w_a) rank identically
    return feats @ np.array([w_q / scale, w_a / scale])


def select_sentence(sample: Sample, w_q: float, w_a: float, mode: str = "absolute",
                    stoplist: frozenset[str] | None = None) -> int:
    if not sample.document:
        raise ValueError(f"sample {sample.id}: empty document")
    stoplist = load_stopwords() if stoplist is None else stoplist
    feats = sentence_features(sample, stoplist, mode)
    return pick(_scores(feats, w_q, w_a), [len(s.tokens) for s in sample.document])


# -- logistic regression --------------------------------------------------------

@dataclass
class LRModel:
    coef: np.ndarray          # in raw feature space
    bias: float
    w_q: float = 0.0
    w_a: float = 0.0
    mode: str = "absolute"
    iterations: int = 0

    def decision(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float).reshape(-1, 2) @ self.coef + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.decision(X)))

    def predict(self, X) -> np.ndarray:
        return (self.decision(X) > 0).astype(int)

    def to_json(self) -> dict:
        return {"coef": [float(c) for c in self.coef], "bias": float(self.bias), "w_q": self.w_q,
                "w_a": self.w_a, "mode": self.mode, "iterations": self.iterations}


def log_likelihood(coef, bias, X, y) -> float:
    s = np.asarray(X, dtype=float) @ np.asarray(coef, dtype=float) + bias
    return float(np.sum(y * s - np.logaddexp(0.0, s)))


def train_lr(features, labels, lr: float = 1.0, tol: float = 1e-8, max_iter: int = 10_000) -> LRModel:
    """Gradient descent on the mean log-loss from zero init over standardized features."""
    X = np.asarray(features, dtype=float).reshape(-1, 2)
    y = np.asarray(labels, dtype=float)
    if len(X) != len(y):
        raise ValueError("features and labels differ in length")
    if len(X) < 2 or len(np.unique(y)) < 2:
        raise ValueError("logistic regression needs at least two samples from both classes")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    mu, sd = X.mean(axis=0), X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    Xs = np.hstack([(X - mu) / sd, np.ones((len(X), 1))])
    theta = np.zeros(3)
    it = 0
    for it in range(1, max_iter + 1):
        p = 1.0 / (1.0 + np.exp(-(Xs @ theta)))
        g = Xs.T @ (p - y) / len(y)
        if np.linalg.norm(g) < tol:
            break
        theta -= lr * g
    coef = theta[:2] / sd
    return LRModel(coef, float(theta[2] - coef @ mu), iterations=it)


# -- grid search ------------------------------------------------------------------

@dataclass
class GridResult:
    w_q: float
    w_a: float
    mode: str
    model: LRModel
    val_f1a: float


class _Prepared:
    """Per-sentence features of a split, computed once per mode."""

    def __init__(self, samples: Sequence[Sample], stoplist, mode: str):
        self.feats = [sentence_features(s, stoplist, mode) for s in samples]
        self.lengths = [[len(t.tokens) for t in s.document] for s in samples]
        self.labels = np.array([s.label for s in samples])

    def select(self, w_q: float, w_a: float) -> tuple[list[int], np.ndarray]:
        idx = [pick(_scores(f, w_q, w_a), n) for f, n in zip(self.feats, self.lengths)]
        X = np.array([f[i] for f, i in zip(self.feats, idx)]).reshape(-1, 2)
        return idx, X


def f1a(gold, pred, t: int = 2) -> float:
    return float(per_class_prf(gold, pred, t)[2].mean())


def grid_search(train: Dataset | Sequence[Sample], val: Dataset | Sequence[Sample],
                grids: tuple[Sequence[float], Sequence[float]] | None = None,
                modes: Sequence[str] = MODES, stoplist: frozenset[str] | None = None) -> GridResult:
    """Every (mode, w_q, w_a) in iteration order; the first best val F1a wins."""
    train = list(getattr(train, "samples", train))
    val = list(getattr(val, "samples", val))
    gq, ga = grids if grids is not None else (DEFAULT_GRID, DEFAULT_GRID)
    if not gq or not ga or not modes:
        raise ValueError("grids and modes must be non-empty")
    stoplist = load_stopwords() if stoplist is None else stoplist
    best = None
    for mode in modes:
        tr, va = _Prepared(train, stoplist, mode), _Prepared(val, stoplist, mode)
        fits: dict[bytes, LRModel] = {}
        for w_q in gq:
            for w_a in ga:
                _, X = tr.select(w_q, w_a)
                key = X.tobytes()
                if key not in fits:
                    fits[key] = train_lr(X, tr.labels)
                fit = fits[key]
                model = LRModel(fit.coef.copy(), fit.bias, float(w_q), float(w_a), mode, fit.iterations)
                _, Xv = va.select(w_q, w_a)
                score = f1a(va.labels, model.predict(Xv))
                if best is None or score > best.val_f1a:
                    best = GridResult(float(w_q), float(w_a), mode, model, score)
    return best


def evaluate_split(model: LRModel, samples: Sequence[Sample], stoplist: frozenset[str] | None = None) -> dict:
    """F1a, accuracy and the per-sample selections of a fitted pipeline."""
    stoplist = load_stopwords() if stoplist is None else stoplist
    prep = _Prepared(samples, stoplist, model.mode)
    idx, X = prep.select(model.w_q, model.w_a)
    pred = model.predict(X)
    return {
        "f1a": f1a(prep.labels, pred),
        "accuracy": float(np.mean(pred == prep.labels)) if len(pred) else 0.0,
        "selections": [{"id": s.id, "sentence": int(i), "label": int(s.label), "predicted": int(p)}
                       for s, i, p in zip(samples, idx, pred)],
    }
