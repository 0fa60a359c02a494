"""Diagnostic exports over prediction records; everything here is raw CSV-ready data."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .baseline import load_stopwords, overlap_features
from .corpus import Sample, gold_mask
from .evalmetrics import MetricReport, PredictionRecord, evaluate_records

CATEGORIES = ("selected-correct", "selected-incorrect", "unselected", "query-only")


@dataclass(frozen=True)
class AnalysisRow:
    sample_id: str
    candidate: tuple[int, ...]
    category: str
    value: float


def _index(samples):
    return {s.id: s for s in samples}


def _selected_category(rec: PredictionRecord, sample: Sample) -> str:
    # valid = a non-empty subset of some gold set; unannotated samples fall back to the label
    if sample.gold_rationales:
        ok = gold_mask(sample, [rec.selected_candidate])[0]
    else:
        ok = rec.predicted_label == sample.label
    return "selected-correct" if ok else "selected-incorrect"


def normalized_logits(records: Sequence[PredictionRecord], samples: Sequence[Sample]) -> list[AnalysisRow]:
    """Row-max logit of every candidate, min-max normalized over the whole split.

    ``query-only`` always wins over the selection categories, so a selected
    query-only candidate is reported as ``query-only``.
    """
    by_id = _index(samples)
    raw = []
    for rec in records:
        z = np.asarray(rec.logits, dtype=float)
        vals = z[np.arange(len(z)), np.argmax(z, axis=1)]
        sel = rec.selected_index
        for i, (cand, v) in enumerate(zip(rec.candidates, vals)):
            if not cand:
                cat = "query-only"
            elif i == sel:
                cat = _selected_category(rec, by_id[rec.sample_id])
            else:
                cat = "unselected"
            raw.append((rec.sample_id, tuple(cand), cat, float(v)))
    if not raw:
        raise ValueError("no logits to normalize")
    values = np.array([r[3] for r in raw])
    lo, hi = values.min(), values.max()
    if not hi > lo:
        raise ValueError("all logits are equal; min-max normalization is undefined")
    return [AnalysisRow(sid, c, cat, float((v - lo) / (hi - lo))) for sid, c, cat, v in raw]


@dataclass(frozen=True)
class OverlapRow:
    sample_id: str
    q_overlap: float
    a_overlap: float
    predicted_label: int
    empty: bool


def overlap_distribution(records: Sequence[PredictionRecord], samples: Sequence[Sample],
                         stoplist: frozenset[str] | None = None) -> list[OverlapRow]:
    """Relative question/answer overlap of each selected rationale (token union for pairs)."""
    stoplist = load_stopwords() if stoplist is None else stoplist
    by_id = _index(samples)
    rows = []
    for rec in records:
        s = by_id[rec.sample_id]
        if not rec.selected_candidate:
            rows.append(OverlapRow(rec.sample_id, 0.0, 0.0, rec.predicted_label, True))
            continue
        toks = [t for i in rec.selected_candidate for t in s.document[i].tokens]
        f = overlap_features(toks, s.question, s.answer, stoplist, "relative")
        rows.append(OverlapRow(rec.sample_id, f.q_s, f.a_s, rec.predicted_label, False))
    return rows


@dataclass
class SolvabilitySplit:
    k: int
    groups: list[list[str]]                      # groups[g] = ids solved by exactly g models
    reports: list[MetricReport | None] = field(default_factory=list)
    full: MetricReport | None = None

    @property
    def sizes(self) -> list[int]:
        return [len(g) for g in self.groups]

    @property
    def delta_f1a(self) -> list[float | None]:
        if self.full is None:
            return [None] * len(self.groups)
        return [None if r is None else r.f1a - self.full.f1a for r in self.reports]


def solvability_split(correctness: Sequence[Sequence[bool]], samples: Sequence[Sample],
                      records: Sequence[PredictionRecord] | None = None,
                      num_labels: int | None = None) -> SolvabilitySplit:
    """Partition samples by how many of the k models got them right.

    With ``records`` (one evaluated model), each non-empty group also gets its
    own MetricReport and the F1a difference to the full split.
    """
    samples = list(samples)
    k = len(correctness)
    for vec in correctness:
        if len(vec) != len(samples):
            raise ValueError(f"correctness vector of length {len(vec)} for {len(samples)} samples")
    counts = np.sum(np.asarray(correctness, dtype=bool), axis=0) if k else np.zeros(len(samples), int)
    groups = [[] for _ in range(k + 1)]
    for s, c in zip(samples, counts):
        groups[int(c)].append(s.id)
    out = SolvabilitySplit(k, groups)
    if records is not None:
        t = num_labels or max(s.label for s in samples) + 1
        by_rec = {r.sample_id: r for r in records}
        by_id = _index(samples)
        out.full = evaluate_records([by_rec[s.id] for s in samples], samples, t)
        for ids in groups:
            if not ids:
                out.reports.append(None)
                continue
            sub = [by_id[i] for i in ids]
            out.reports.append(evaluate_records([by_rec[i] for i in ids], sub, t))
    return out


def correctness_vector(records: Sequence[PredictionRecord], samples: Sequence[Sample]) -> list[bool]:
    by_rec = {r.sample_id: r for r in records}
    return [by_rec[s.id].predicted_label == s.label for s in samples]


@dataclass
class StabilityTable:
    """cells[(which, joint_label)] = [unchanged, total] with which in {shared, new}."""

    cells: dict[tuple[str, int], list[int]] = field(default_factory=dict)
    used: int = 0
    skipped: int = 0

    def fraction(self, which: str, label: int) -> float | None:
        same, total = self.cells.get((which, label), (0, 0))
        return same / total if total else None


def pair_stability(two_sentence_records: Sequence[PredictionRecord],
                   reference_records: Sequence[PredictionRecord],
                   samples: Sequence[Sample] | None = None) -> StabilityTable:
    """Does the joint label survive when only one sentence of a selected pair is scored?

    Only samples whose pair contains the reference model's single selected
    sentence plus one new sentence are used; all others are skipped and counted.
    """
    ref = {r.sample_id: r for r in reference_records}
    keep = None if samples is None else {s.id for s in samples}
    table = StabilityTable()
    for rec in two_sentence_records:
        if keep is not None and rec.sample_id not in keep:
            continue
        other = ref.get(rec.sample_id)
        pair = rec.selected_candidate
        if other is None or len(pair) != 2 or len(other.selected_candidate) != 1 \
                or other.selected_candidate[0] not in pair:
            table.skipped += 1
            continue
        table.used += 1
        shared = other.selected_candidate[0]
        new = pair[0] if pair[1] == shared else pair[1]
        z = np.asarray(rec.logits)
        for which, sent in (("shared", shared), ("new", new)):
            row = z[rec.candidates.index((sent,))]
            cell = table.cells.setdefault((which, rec.predicted_label), [0, 0])
            cell[0] += int(np.argmax(row)) == rec.predicted_label
            cell[1] += 1
    return table


# -- CSV ----------------------------------------------------------------------------

def to_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def logits_csv(rows: Sequence[AnalysisRow]) -> str:
    return to_csv(("sample_id", "candidate", "category", "value"),
                  ((r.sample_id, " ".join(map(str, r.candidate)), r.category, f"{r.value:.6f}") for r in rows))


def overlap_csv(rows: Sequence[OverlapRow]) -> str:
    return to_csv(("sample_id", "q_overlap", "a_overlap", "predicted_label", "empty"),
                  ((r.sample_id, f"{r.q_overlap:.6f}", f"{r.a_overlap:.6f}", r.predicted_label, int(r.empty))
                   for r in rows))


def split_csv(split: SolvabilitySplit) -> str:
    def fmt(x):
        return "" if x is None else f"{x:.6f}"
    rows = []
    for g, (size, rep, delta) in enumerate(zip(split.sizes, split.reports or [None] * (split.k + 1),
                                                split.delta_f1a)):
        rows.append((f"{g}/{split.k}", size, fmt(rep.f1a if rep else None),
                     fmt(rep.accuracy if rep else None), fmt(delta)))
    return to_csv(("group", "size", "f1a", "accuracy", "delta_f1a"), rows)


def stability_csv(table: StabilityTable) -> str:
    rows = []
    for (which, label), (same, total) in sorted(table.cells.items()):
        rows.append((which, label, same, total, f"{same / total:.6f}"))
    rows.append(("skipped", "", "", table.skipped, ""))
    return to_csv(("sentence", "joint_label", "unchanged", "total", "fraction"), rows)
