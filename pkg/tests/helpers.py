"""Independent oracles shared by several test modules."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from sentsel.corpus import enumerate_candidates, gold_mask, make_sample
from sentsel.encoder import EncodedSample, EncoderConfig, ModelParams, backward, encode_candidates, init_params
from sentsel.objective import ObjectiveConfig, total_loss_and_grad


def philox(seed):
    return np.random.Generator(np.random.Philox(key=seed))


# -- encoder oracle: plain loops, no vectorization ------------------------------------

def scalar_forward(params: ModelParams, query_ids, sentence_ids, candidates):
    E = params.embedding.astype(float)
    d = E.shape[1]
    dh = params.W1.shape[1]
    t = params.W2.shape[1]

    def mean_rows(ids):
        return [sum(E[i][k] for i in ids) / len(ids) for k in range(d)]

    def hidden(v):
        u = mean_rows(query_ids) + list(v)
        return [math.tanh(sum(u[a] * params.W1[a][b] for a in range(2 * d)) + params.b1[b]) for b in range(dh)]

    rows = []
    for cand in candidates:
        if not cand:
            h = hidden(params.null_sentence)
        else:
            hs = [hidden(mean_rows(sentence_ids[i])) for i in cand]
            h = [max(col) for col in zip(*hs)]
        rows.append([sum(h[b] * params.W2[b][c] for b in range(dh)) + params.b2[c] for c in range(t)])
    return np.array(rows)


# -- random small instances --------------------------------------------------------------

def random_instance(rng, d=8, dh=8, t=2, n=3, h=1, vocab=12, scale=0.5):
    sents = [[f"t{int(x)}" for x in rng.integers(0, vocab - 1, size=int(rng.integers(1, 5)))] for _ in range(n)]
    query = [f"t{int(x)}" for x in rng.integers(0, vocab - 1, size=int(rng.integers(1, 4)))]
    y = int(rng.integers(t))
    golds = []
    if n >= 1:
        size = min(n, int(rng.integers(1, 3)))
        golds.append(sorted(int(i) for i in rng.choice(n, size=size, replace=False)))
    sample = make_sample("x", query, sents, y, golds)
    vocab_map = {f"t{i}": i + 1 for i in range(vocab - 1)}
    cfg = EncoderConfig(vocab, t, d, dh, h)
    params = init_params(cfg, rng, scale, np.float64)
    params.b1[:] = rng.uniform(-scale, scale, size=dh)
    params.b2[:] = rng.uniform(-scale, scale, size=t)
    inputs = EncodedSample(np.array([vocab_map[x] for x in query]),
                           [np.array([vocab_map[x] for x in s]) for s in sents])
    return sample, params, inputs


def _pattern(params, inputs, cands, mask, y):
    z, cache = encode_candidates(params, inputs, cands)
    amax = tuple(np.argmax(z, axis=1))
    return amax, cache.pair_first.tobytes()


def loss_of(params, sample, inputs, h, objective):
    cands = enumerate_candidates(sample, h)
    z, _ = encode_candidates(params, inputs, cands)
    mask = gold_mask(sample, cands)
    return total_loss_and_grad(z, sample.label, mask, objective).total


def fd_check(params, sample, inputs, h, objective: ObjectiveConfig, step=1e-3):
    """(max elementwise relative error over all parameters, kink_crossed).

    ``kink_crossed`` is True if some perturbation changed a row argmax or a
    pair max-pool winner; the loss is not differentiable there.
    """
    cands = enumerate_candidates(sample, h)
    mask = gold_mask(sample, cands)
    z, cache = encode_candidates(params, inputs, cands)
    lb = total_loss_and_grad(z, sample.label, mask, objective)
    grads = backward(params, cache, lb.dz)
    base = _pattern(params, inputs, cands, mask, sample.label)
    worst = 0.0
    for (name, arr), g in zip(params.items(), grads.arrays()):
        num = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            vals = []
            for s in (step, -step):
                arr[idx] = old + s
                if _pattern(params, inputs, cands, mask, sample.label) != base:
                    arr[idx] = old
                    return None, True
                vals.append(loss_of(params, sample, inputs, h, objective))
            arr[idx] = old
            num[idx] = (vals[0] - vals[1]) / (2 * step)
        denom = np.maximum(np.abs(g), np.abs(num))
        nz = denom > 0
        if nz.any():
            worst = max(worst, float(np.max(np.abs(g - num)[nz] / denom[nz])))
    return worst, False


def checked_instances(seed, count, d=8, dh=8, ts=(2, 3), ns=(1, 2, 3, 4, 5), hs=(1, 2)):
    """``count`` instances whose finite differences never cross a kink."""
    rng = philox(seed)
    out = []
    while len(out) < count:
        k = len(out)
        t, n, h = ts[k % len(ts)], ns[k % len(ns)], hs[(k // 2) % len(hs)]
        sup = k % 4 in (1, 2)
        sample, params, inputs = random_instance(rng, d, dh, t, n, h)
        obj = ObjectiveConfig(tau=float(rng.uniform(0.5, 2.0)), lambda_rationale=float(rng.uniform(0.5, 2.0)),
                              supervised=sup)
        err, crossed = fd_check(params, sample, inputs, h, obj)
        if not crossed:
            out.append(dict(t=t, n=n, h=h, supervised=sup, err=err))
    return out


# -- metric oracle: exact rational arithmetic ----------------------------------------------

def f1_frac(sel, gold):
    inter = len(sel & gold)
    if not sel or not gold or inter == 0:
        return Fraction(0)
    p, r = Fraction(inter, len(sel)), Fraction(inter, len(gold))
    return 2 * p * r / (p + r)


def oracle_best(sel, golds):
    best = None
    for g in sorted(golds, key=sorted):
        if best is None or f1_frac(sel, g) > f1_frac(sel, best):
            best = g
    return best


def runs(indices):
    out = []
    for i in sorted(indices):
        if out and out[-1][-1] == i - 1:
            out[-1].append(i)
        else:
            out.append([i])
    return out


def oracle_metrics(instances, t):
    """instances: (gold_label, pred_label, selected set, golds list, sentence lengths)."""
    P = R = F = Fraction(0)
    annotated = 0
    full = part = 0
    n_pred = n_gold = pred_hit = gold_hit = 0
    ti = tp = tg = 0
    for y, yhat, sel, golds, lens in instances:
        if yhat == y:
            full += any(g <= sel for g in golds)
            part += any(g & sel for g in golds)
        if not golds:
            continue
        annotated += 1
        m = oracle_best(sel, golds)
        inter = len(sel & m)
        p = Fraction(inter, len(sel)) if sel else Fraction(0)
        r = Fraction(inter, len(m))
        P, R = P + p, R + r
        F += 2 * p * r / (p + r) if p + r else 0
        starts = [sum(lens[:i]) for i in range(len(lens))]
        toks = lambda s: {starts[i] + k for i in s for k in range(lens[i])}
        spans = lambda s: [toks(run) for run in runs(s)]
        ps, gs = spans(sel), spans(m)
        iou = lambda a, b: Fraction(len(a & b), len(a | b))
        n_pred += len(ps)
        n_gold += len(gs)
        pred_hit += sum(any(iou(a, b) >= Fraction(1, 2) for b in gs) for a in ps)
        gold_hit += sum(any(iou(a, b) >= Fraction(1, 2) for a in ps) for b in gs)
        ti += len(toks(sel) & toks(m))
        tp += len(toks(sel))
        tg += len(toks(m))
    f1 = lambda p, r: 2 * p * r / (p + r) if p + r else Fraction(0)
    frac = lambda a, b: Fraction(a, b) if b else Fraction(0)
    # F1a from an explicit confusion table
    f1s = []
    for c in range(t):
        tpc = sum(1 for y, yh, *_ in instances if y == c and yh == c)
        pc = sum(1 for _, yh, *_ in instances if yh == c)
        gc = sum(1 for y, *_ in instances if y == c)
        f1s.append(f1(frac(tpc, pc), frac(tpc, gc)))
    N = len(instances)
    return {
        "rationale": tuple(x / annotated if annotated else Fraction(0) for x in (P, R, F)),
        "acc_full": Fraction(full, N), "acc_part": Fraction(part, N),
        "accuracy": Fraction(sum(y == yh for y, yh, *_ in instances), N),
        "f1a": sum(f1s) / t,
        "iou_f1": f1(frac(pred_hit, n_pred), frac(gold_hit, n_gold)),
        "token_f1": f1(frac(ti, tp), frac(ti, tg)),
    }
