import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import philox
from sentsel.corpus import make_sample
from sentsel.evalmetrics import (PredictionRecord, best_gold_match, eraser_metrics, evaluate_records,
                                 joint_accuracy, per_class_prf, predict, rationale_prf, sample_prf, span_iou,
                                 target_metrics, token_spans)


def rec(sid, label, sel, t=2):
    cands = [(), tuple(sel)] if sel else [()]
    return PredictionRecord(sid, label, tuple(sel), np.ones(len(cands)) / len(cands), np.zeros((len(cands), t)), cands)


def test_predict_examples():
    z = np.array([[0, 0], [-1, 4], [3, 1]])
    assert predict(z, np.array([0.2, 0.5, 0.3])) == (1, 1)
    assert predict(z, np.ones(3) / 3) == (0, 0)
    rng = philox(1)
    for _ in range(100):
        z = rng.normal(size=(6, 3))
        w = rng.random(6)
        c = max(range(6), key=lambda i: (w[i], -i))
        assert predict(z, w) == (max(range(3), key=lambda k: (z[c][k], -k)), c)


def test_best_gold_match_examples():
    golds = {frozenset({3, 5}), frozenset({7})}
    assert best_gold_match({3}, golds) == {3, 5}
    assert best_gold_match({7}, golds) == {7}
    assert best_gold_match(set(), golds) == {3, 5}
    with pytest.raises(ValueError):
        best_gold_match({1}, set())


def test_rationale_prf_examples():
    assert sample_prf({3}, {3, 5}) == pytest.approx((1.0, 0.5, 2 / 3))
    s = make_sample("a", ["q"], [["x"]] * 8, 0, [[3, 5], [7]])
    assert rationale_prf([rec("a", 0, (3,))], [s]) == pytest.approx((1.0, 0.5, 2 / 3))
    assert rationale_prf([rec("a", 0, (7,))], [s]) == (1.0, 1.0, 1.0)
    assert rationale_prf([rec("a", 0, ())], [s]) == (0.0, 0.0, 0.0)


def test_unannotated_samples_skip_rationale_metrics():
    a = make_sample("a", ["q"], [["x"]] * 3, 0, [[1]])
    b = make_sample("b", ["q"], [["x"]] * 3, 1, [])
    r = [rec("a", 0, (1,)), rec("b", 1, (0,))]
    assert rationale_prf(r, [a, b]) == (1.0, 1.0, 1.0)
    rep = evaluate_records(r, [a, b], 2)
    assert rep.accuracy == 1.0 and rep.acc_full == 0.5


def test_joint_accuracy_examples():
    s = make_sample("a", ["q"], [["x"]] * 4, 1, [[1, 2]])
    assert joint_accuracy([rec("a", 1, (1, 2))], [s]) == (1.0, 1.0)
    assert joint_accuracy([rec("a", 0, (1, 2))], [s]) == (0.0, 0.0)
    assert joint_accuracy([rec("a", 1, (2,))], [s]) == (0.0, 1.0)
    assert joint_accuracy([rec("a", 1, (0, 3))], [s]) == (0.0, 0.0)


def test_target_metrics():
    s = [make_sample(f"s{i}", ["q"], [["x"]], y) for i, y in enumerate([0, 1, 1, 0])]
    assert target_metrics([rec(x.id, x.label, ()) for x in s], s, 2) == (1.0, 1.0)
    # majority-only predictor on a 496/504 split
    s = [make_sample(f"s{i}", ["q"], [["x"]], int(i >= 496)) for i in range(1000)]
    f1a, acc = target_metrics([rec(x.id, 1, ()) for x in s], s, 2)
    assert acc == pytest.approx(0.504)
    assert f1a == pytest.approx(0.5 * 2 * 0.504 / 1.504, abs=1e-9)
    assert round(f1a, 3) == 0.335


def test_absent_class_counts_zero():
    s = [make_sample("a", ["q"], [["x"]], 0)]
    assert target_metrics([rec("a", 0, ())], s, 3)[0] == pytest.approx(1 / 3)


@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=40))
def test_per_class_prf_oracle(pairs):
    gold, pred = zip(*pairs)
    p, r, f = per_class_prf(gold, pred, 3)
    for c in range(3):
        tp = sum(g == c and q == c for g, q in pairs)
        np_ = sum(q == c for q in pred)
        ng = sum(g == c for g in gold)
        pc = tp / np_ if np_ else 0.0
        rc = tp / ng if ng else 0.0
        assert p[c] == pytest.approx(pc) and r[c] == pytest.approx(rc)
        assert f[c] == pytest.approx(2 * pc * rc / (pc + rc) if pc + rc else 0.0)


def test_span_iou_examples():
    assert span_iou((10, 20), (12, 22)) == pytest.approx(8 / 12)
    assert span_iou((3, 7), (3, 7)) == 1.0
    assert span_iou((0, 3), (5, 9)) == 0.0


def test_token_spans_merge_adjacent_sentences():
    offsets = [(0, 3), (3, 5), (5, 9), (9, 10)]
    assert token_spans({0, 1, 3}, offsets) == [(0, 5), (9, 10)]


def test_eraser_identical_and_disjoint():
    s = make_sample("a", ["q"], [["x"] * 3, ["y"] * 4, ["z"] * 2], 0, [[1]])
    assert eraser_metrics([rec("a", 0, (1,))], [s]) == (1.0, 1.0)
    assert eraser_metrics([rec("a", 0, (0,))], [s]) == (0.0, 0.0)


def test_eraser_all_gold_flag():
    s = make_sample("a", ["q"], [["x"] * 2] * 6, 0, [[1], [4]])
    best = eraser_metrics([rec("a", 0, (1,))], [s])
    union = eraser_metrics([rec("a", 0, (1,))], [s], all_gold=True)
    assert best == (1.0, 1.0)
    assert union[0] == pytest.approx(2 / 3) and union[1] == pytest.approx(2 / 3)


def _random_batch(rng, k):
    samples, records = [], []
    for i in range(k):
        n = int(rng.integers(1, 6))
        golds = [sorted(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False).tolist())
                 for _ in range(int(rng.integers(0, 3)))]
        s = make_sample(f"s{i}", ["q"], [["x"] * int(rng.integers(1, 4)) for _ in range(n)], int(rng.integers(2)),
                        golds)
        sel = tuple(sorted(rng.choice(n, size=int(rng.integers(0, min(n, 2) + 1)), replace=False).tolist()))
        samples.append(s)
        records.append(rec(s.id, int(rng.integers(2)), sel))
    return samples, records


@given(st.integers(0, 2**32 - 1))
def test_metrics_permutation_invariant_and_ordered(seed):
    rng = philox(seed)
    samples, records = _random_batch(rng, 12)
    perm = rng.permutation(12)
    a = evaluate_records(records, samples, 2)
    b = evaluate_records([records[i] for i in perm], [samples[i] for i in perm], 2)
    for x, y in zip(a.to_json().values(), b.to_json().values()):
        assert x == pytest.approx(y)
    assert a.acc_full <= a.acc_part <= a.accuracy
    for v in (a.f1a, a.accuracy, a.rationale_f1, a.iou_f1, a.token_f1):
        assert 0 <= v <= 1


@given(st.integers(0, 2**32 - 1))
def test_rationale_f1_extremes(seed):
    rng = philox(seed)
    samples, records = _random_batch(rng, 1)
    s, r = samples[0], records[0]
    if not s.gold_rationales:
        return
    f = rationale_prf([r], [s])[2]
    sel = set(r.selected_candidate)
    assert (f == 1.0) == any(sel == g for g in s.gold_rationales)
    assert (f == 0.0) == (not any(sel & g for g in s.gold_rationales))


def test_prediction_record_json_round_trip():
    r = PredictionRecord("a", 1, (0, 2), np.array([0.25, 0.75]), np.array([[0.1, 0.2], [0.3, -1.0]]), [(), (0, 2)])
    back = PredictionRecord.from_json(r.to_json())
    assert back.selected_candidate == (0, 2) and back.candidates == [(), (0, 2)]
    assert np.array_equal(back.logits, r.logits) and back.selected_index == 1
