"""Prediction from candidate weights and the target / rationale metric suite."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import Sample


@dataclass
class PredictionRecord:
    sample_id: str
    predicted_label: int
    selected_candidate: tuple[int, ...]
    weights: np.ndarray
    logits: np.ndarray
    candidates: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def selected_index(self) -> int:
        return self.candidates.index(self.selected_candidate)

    def to_json(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "predicted_label": int(self.predicted_label),
            "selected_candidate": list(self.selected_candidate),
            "weights": [float(x) for x in self.weights],
            "logits": [[float(x) for x in row] for row in self.logits],
            "candidates": [list(c) for c in self.candidates],
        }

    @classmethod
    def from_json(cls, d: dict) -> "PredictionRecord":
        return cls(
            d["sample_id"], int(d["predicted_label"]), tuple(d["selected_candidate"]),
            np.asarray(d["weights"], dtype=float), np.asarray(d["logits"], dtype=float),
            [tuple(c) for c in d["candidates"]],
        )


@dataclass
class MetricReport:
    f1a: float = 0.0
    accuracy: float = 0.0
    rationale_precision: float = 0.0
    rationale_recall: float = 0.0
    rationale_f1: float = 0.0
    acc_full: float = 0.0
    acc_part: float = 0.0
    iou_f1: float = 0.0
    token_f1: float = 0.0
    per_class_recall: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def predict(z: np.ndarray, w: np.ndarray) -> tuple[int, int]:
    """(label, candidate index): highest-weight candidate, then that row's top class."""
    cand = int(np.argmax(w))
    return int(np.argmax(np.asarray(z)[cand])), cand


def set_f1(selected: frozenset | set, gold: frozenset | set) -> float:
    inter = len(set(selected) & set(gold))
    if not selected or not gold or inter == 0:
        return 0.0
    p, r = inter / len(selected), inter / len(gold)
    return 2 * p * r / (p + r)


def best_gold_match(selected, golds) -> frozenset:
    """Gold rationale with the highest sentence-level F1; ties go to the smallest sorted index list."""
    golds = list(golds)
    if not golds:
        raise ValueError("no gold rationales to match against")
    ordered = sorted(golds, key=lambda g: sorted(g))
    best = max(ordered, key=lambda g: set_f1(selected, g))  # max keeps the first maximum
    return frozenset(best)


def _index(samples: Iterable[Sample]) -> dict[str, Sample]:
    return {s.id: s for s in samples}


def sample_prf(selected, gold) -> tuple[float, float, float]:
    inter = len(set(selected) & set(gold))
    p = inter / len(selected) if selected else 0.0
    r = inter / len(gold) if gold else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def rationale_prf(records: Sequence[PredictionRecord], samples: Iterable[Sample]) -> tuple[float, float, float]:
    """Macro-averaged sentence-level P/R/F1 over annotated samples against the best-matching gold."""
    by_id = _index(samples)
    scores = []
    for rec in records:
        s = by_id[rec.sample_id]
        if not s.gold_rationales:
            continue
        sel = set(rec.selected_candidate)
        scores.append(sample_prf(sel, best_gold_match(sel, s.gold_rationales)))
    if not scores:
        return 0.0, 0.0, 0.0
    p, r, f = np.mean(scores, axis=0)
    return float(p), float(r), float(f)


def joint_accuracy(records: Sequence[PredictionRecord], samples: Iterable[Sample]) -> tuple[float, float]:
    """Fractions of all records whose label is right and whose selection
    contains (full) or touches (part) some gold rationale.

    Unannotated samples stay in the denominator and never count as hits, which
    keeps ``acc_full <= acc_part <= accuracy``.
    """
    by_id = _index(samples)
    full = part = 0
    total = len(records)
    for rec in records:
        s = by_id[rec.sample_id]
        if rec.predicted_label != s.label:
            continue
        sel = set(rec.selected_candidate)
        full += any(g <= sel for g in s.gold_rationales)
        part += any(g & sel for g in s.gold_rationales)
    if not total:
        return 0.0, 0.0
    return full / total, part / total


def confusion(gold: Sequence[int], pred: Sequence[int], t: int) -> np.ndarray:
    m = np.zeros((t, t), dtype=np.int64)
    np.add.at(m, (np.asarray(gold, dtype=np.intp), np.asarray(pred, dtype=np.intp)), 1)
    return m


def per_class_prf(gold: Sequence[int], pred: Sequence[int], t: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = confusion(gold, pred, t)
    tp = np.diag(m).astype(float)
    pred_tot, gold_tot = m.sum(axis=0), m.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(pred_tot > 0, tp / pred_tot, 0.0)
        r = np.where(gold_tot > 0, tp / gold_tot, 0.0)
        f = np.where(p + r > 0, 2 * p * r / (p + r), 0.0)
    return p, r, f


def target_metrics(records: Sequence[PredictionRecord], samples: Iterable[Sample],
                   num_labels: int | None = None) -> tuple[float, float]:
    by_id = _index(samples)
    gold = [by_id[r.sample_id].label for r in records]
    pred = [r.predicted_label for r in records]
    if not records:
        return 0.0, 0.0
    t = num_labels or max(max(gold), max(pred)) + 1
    _, _, f = per_class_prf(gold, pred, t)
    acc = float(np.mean(np.asarray(gold) == np.asarray(pred)))
    return float(f.mean()), acc


# -- ERASER-style span and token metrics ---------------------------------------

def sentence_runs(indices) -> list[tuple[int, int]]:
    """Maximal runs of consecutive sentence indices as ``[first, last+1)``."""
    runs = []
    for i in sorted(indices):
        if runs and runs[-1][1] == i:
            runs[-1] = (runs[-1][0], i + 1)
        else:
            runs.append((i, i + 1))
    return runs


def token_spans(indices, offsets: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    return [(offsets[a][0], offsets[b - 1][1]) for a, b in sentence_runs(indices)]


def span_iou(a: tuple[int, int], b: tuple[int, int]) -> float:
    inter = max(0, min(a[1], b[1]) - max(a[0], b[0]))
    if not inter:
        return 0.0
    return inter / (max(a[1], b[1]) - min(a[0], b[0]))


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


def eraser_metrics(records: Sequence[PredictionRecord], samples: Iterable[Sample],
                   all_gold: bool = False, threshold: float = 0.5) -> tuple[float, float]:
    """(IOU F1, Token F1), both micro-averaged over annotated samples.

    Selected sentences become token spans (maximal runs of adjacent
    sentences). By default both metrics compare against the best-matching
    gold rationale; ``all_gold`` compares against the union of all gold sets.
    """
    by_id = _index(samples)
    n_pred = n_gold = pred_hit = gold_hit = 0
    tok_inter = tok_pred = tok_gold = 0
    for rec in records:
        s = by_id[rec.sample_id]
        if not s.gold_rationales:
            continue
        sel = set(rec.selected_candidate)
        if all_gold:
            gold = set().union(*s.gold_rationales)
        else:
            gold = set(best_gold_match(sel, s.gold_rationales))
        offsets = s.sentence_offsets()
        ps, gs = token_spans(sel, offsets), token_spans(gold, offsets)
        n_pred += len(ps)
        n_gold += len(gs)
        pred_hit += sum(any(span_iou(p, g) >= threshold for g in gs) for p in ps)
        gold_hit += sum(any(span_iou(p, g) >= threshold for p in ps) for g in gs)
        pt = {t for a, b in ps for t in range(a, b)}
        gt = {t for a, b in gs for t in range(a, b)}
        tok_inter += len(pt & gt)
        tok_pred += len(pt)
        tok_gold += len(gt)
    iou = _f1(pred_hit / n_pred if n_pred else 0.0, gold_hit / n_gold if n_gold else 0.0)
    tok = _f1(tok_inter / tok_pred if tok_pred else 0.0, tok_inter / tok_gold if tok_gold else 0.0)
    return iou, tok


def evaluate_records(records: Sequence[PredictionRecord], samples: Sequence[Sample],
                     num_labels: int, all_gold: bool = False) -> MetricReport:
    samples = list(samples)
    f1a, acc = target_metrics(records, samples, num_labels)
    p, r, f = rationale_prf(records, samples)
    full, part = joint_accuracy(records, samples)
    iou, tok = eraser_metrics(records, samples, all_gold=all_gold)
    by_id = _index(samples)
    _, rec_c, _ = per_class_prf([by_id[x.sample_id].label for x in records],
                                [x.predicted_label for x in records], num_labels)
    return MetricReport(f1a, acc, p, r, f, full, part, iou, tok, [float(x) for x in rec_c])
