from collections import Counter
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sentsel.corpus import corpus_stats, dumps_native, loads_native
from sentsel.synthgen import SynthConfig, fillers, generate


def test_determinism_single_evidence():
    cfg = SynthConfig("single_evidence", num_samples=50, seed=7)
    assert dumps_native(generate(cfg)) == dumps_native(generate(cfg))
    assert dumps_native(generate(cfg)) != dumps_native(generate(replace(cfg, seed=8)))


@pytest.mark.parametrize("family", ["single_evidence", "two_hop", "discussion"])
def test_balance_and_round_trip(family):
    ds = generate(SynthConfig(family, num_samples=100, seed=3))
    assert Counter(s.label for s in ds.samples) == {0: 50, 1: 50}
    assert loads_native(dumps_native(ds), ds.labels).samples == ds.samples


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["single_evidence", "two_hop", "discussion"]), st.integers(0, 2**63 - 1),
       st.integers(1, 40), st.integers(2, 4))
def test_generators_are_pure_and_valid(family, seed, n, t):
    if family == "discussion":
        t = 2
    cfg = SynthConfig(family, num_samples=n, seed=seed, num_labels=t)
    a, b = generate(cfg), generate(cfg)
    assert a.samples == b.samples
    counts = Counter(s.label for s in a.samples)
    assert max(counts.values()) - min(counts.get(c, 0) for c in range(t)) <= 1
    for s in a.samples:
        assert len(s.gold_rationales) == 1


def _chi_square(table):
    table = np.asarray(table, dtype=float)
    expected = table.sum(1, keepdims=True) * table.sum(0, keepdims=True) / table.sum()
    mask = expected > 0
    return float(((table - expected)[mask] ** 2 / expected[mask]).sum()), (table.shape[0] - 1) * (table.shape[1] - 1)


def test_single_evidence_distractors_label_independent():
    ds = generate(SynthConfig("single_evidence", num_samples=4000, seed=5))
    vocab = fillers(SynthConfig("single_evidence"))
    index = {w: i for i, w in enumerate(vocab)}
    table = np.zeros((len(vocab), 2))
    for s in ds.samples:
        (ev,) = next(iter(s.gold_rationales))
        for sent in s.document:
            if sent.index == ev:
                continue
            for tok in sent.tokens:
                assert tok in index  # distractors are pure filler
                table[index[tok], s.label] += 1
    stat, dof = _chi_square(table)
    # 99.9th percentile of chi2(dof) is about dof + 4.4*sqrt(2*dof)
    assert stat < dof + 4.4 * np.sqrt(2 * dof)


def test_single_evidence_evidence_is_informative():
    ds = generate(SynthConfig("single_evidence", num_samples=200, seed=5))
    for s in ds.samples:
        (ev,) = next(iter(s.gold_rationales))
        pats = [t for t in s.document[ev].tokens if t.startswith("lab")]
        assert pats and all(p.startswith(f"lab{s.label}_") for p in pats)


def test_two_hop_structure():
    ds = generate(SynthConfig("two_hop", num_samples=300, seed=9))
    stats = corpus_stats(ds)
    assert stats.min_hops["Two"] == 300 and stats.min_hops["One"] == 0
    for s in ds.samples:
        (gold,) = s.gold_rationales
        i, j = sorted(gold)
        toks = set(s.document[i].tokens) | set(s.document[j].tokens)
        a = next(int(t[2]) for t in toks if t.startswith("pa"))
        b = next(int(t[2]) for t in toks if t.startswith("pb"))
        assert (a + b) % 2 == s.label


def _hop_marginals(ds, prefix):
    # label distribution of the parity token seen in one hop's sentence alone
    c = Counter()
    for s in ds.samples:
        for sent in s.document:
            for t in sent.tokens:
                if t.startswith(prefix):
                    c[(t[2], s.label)] += 1
    return c


def test_two_hop_single_sentences_uninformative():
    ds = generate(SynthConfig("two_hop", num_samples=4000, seed=2))
    for prefix in ("pa", "pb"):
        c = _hop_marginals(ds, prefix)
        table = [[c[(v, y)] for y in (0, 1)] for v in ("0", "1")]
        stat, dof = _chi_square(table)
        assert stat < 10.8  # chi2(1) at 0.999


def test_two_hop_shuffling_second_hop_keeps_marginals():
    ds = generate(SynthConfig("two_hop", num_samples=2000, seed=4))
    rng = np.random.Generator(np.random.Philox(key=1))
    seconds = []
    for s in ds.samples:
        (gold,) = s.gold_rationales
        j = next(k for k in gold if any(t.startswith("pb") for t in s.document[k].tokens))
        seconds.append(s.document[j].tokens)
    perm = rng.permutation(len(seconds))
    before = Counter((t[2], s.label) for s, toks in zip(ds.samples, seconds) for t in toks if t.startswith("pb"))
    after = Counter((t[2], s.label) for s, k in zip(ds.samples, perm) for t in seconds[k] if t.startswith("pb"))
    for key in set(before) | set(after):
        assert abs(before[key] - after[key]) / len(ds.samples) < 0.05


def test_discussion_structure():
    ds = generate(SynthConfig("discussion", num_samples=200, seed=3))
    for s in ds.samples:
        (gold,) = s.gold_rationales
        (v,) = gold
        verdict = s.document[v].tokens
        assert any(t.startswith("verdict") for t in verdict)
        want = "pos" if s.label == 1 else "neg"
        assert any(t.startswith(want) for t in verdict)
        others = [sent.tokens for sent in s.document if sent.index != v]
        has_pos = sum(any(t.startswith("pos") for t in o) for o in others) + (s.label == 1)
        has_neg = sum(any(t.startswith("neg") for t in o) for o in others) + (s.label == 0)
        assert has_pos >= 1 and has_neg >= 1
        if s.label == 0:  # NEG reviews carry sentences matching POS evidence
            assert any(t.startswith("pos") for o in others for t in o)


def test_discussion_verdict_pattern_classifies():
    ds = generate(SynthConfig("discussion", num_samples=200, seed=8))
    for s in ds.samples:
        (v,) = next(iter(s.gold_rationales))
        pred = 1 if any(t.startswith("pos") for t in s.document[v].tokens) else 0
        assert pred == s.label


@pytest.mark.parametrize("kw", [
    dict(family="nope"), dict(num_samples=0), dict(vocab_size=2, num_labels=2),
    dict(family="discussion", num_labels=3), dict(family="discussion", neg_doc_pos_evidence=(0, 2)),
    dict(family="discussion", pos_doc_neg_evidence=(0, 1)), dict(family="discussion", pos_doc_pos_evidence=(3, 1)),
    dict(family="single_evidence", vocab_size=20, num_entities=15),
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        generate(SynthConfig(**kw))
