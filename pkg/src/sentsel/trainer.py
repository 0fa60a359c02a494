"""Minibatch training where every sample's candidates are scored together."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .corpus import Dataset, enumerate_candidates, gold_mask
from .encoder import (EncodedSample, EncoderConfig, ModelParams, backward, encode_candidates,
                      init_params)
from .evalmetrics import MetricReport, PredictionRecord, evaluate_records, predict
from .objective import ObjectiveConfig, total_loss_and_grad, weights

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    samples_per_step: int = 16
    learning_rate: float = 1e-2
    optimizer: str = "adaptive_moments"
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 1
    h: int = 1
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    embed_dim: int = 16
    hidden_dim: int = 16
    init_scale: float = 0.1
    eval_every: int = 0            # steps; 0 evaluates once per epoch
    early_stop_patience: int | None = None
    keep: str = "best"             # "best" validation params or "final"
    threads: int = 1

    def __post_init__(self):
        if self.epochs < 1 or self.samples_per_step < 1:
            raise ValueError("epochs and samples_per_step must be >= 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if self.optimizer not in ("adaptive_moments", "sgd_momentum"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.h not in (1, 2):
            raise ValueError("h must be 1 or 2")
        if self.keep not in ("best", "final"):
            raise ValueError("keep must be 'best' or 'final'")

    def encoder_config(self, vocab_size: int, num_labels: int) -> EncoderConfig:
        return EncoderConfig(vocab_size, num_labels, self.embed_dim, self.hidden_dim, self.h)


@dataclass
class HistoryRow:
    step: int
    loss: float
    report: MetricReport


@dataclass
class TrainHistory:
    rows: list[HistoryRow] = field(default_factory=list)
    best_step: int | None = None

    COLUMNS = ("step", "loss", "f1a", "acc", "rationale_p", "rationale_r", "rationale_f1",
               "acc_full", "acc_part")

    def to_csv(self) -> str:
        lines = [",".join(self.COLUMNS)]
        for r in self.rows:
            m = r.report
            vals = [r.loss, m.f1a, m.accuracy, m.rationale_precision, m.rationale_recall,
                    m.rationale_f1, m.acc_full, m.acc_part]
            lines.append(f"{r.step}," + ",".join(f"{v:.6f}" for v in vals))
        return "\n".join(lines) + "\n"


class Optimizer:
    """Adam (``adaptive_moments``) or heavy-ball SGD over a ModelParams."""

    def __init__(self, params: ModelParams, config: TrainConfig):
        self.config = config
        self.m = params.zeros_like()
        self.v = params.zeros_like() if config.optimizer == "adaptive_moments" else None
        self.t = 0

    def step(self, params: ModelParams, grads: ModelParams) -> None:
        c = self.config
        self.t += 1
        if c.optimizer == "sgd_momentum":
            for p, g, m in zip(params.arrays(), grads.arrays(), self.m.arrays()):
                m *= c.momentum
                m += g
                p -= c.learning_rate * m
            return
        bc1 = 1 - c.beta1 ** self.t
        bc2 = 1 - c.beta2 ** self.t
        for p, g, m, v in zip(params.arrays(), grads.arrays(), self.m.arrays(), self.v.arrays()):
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            p -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


class Model:
    """Parameters plus everything needed to score a dataset."""

    def __init__(self, params: ModelParams, config: EncoderConfig, vocab, labels: Sequence[str]):
        self.params = params
        self.config = config
        self.vocab = vocab
        self.labels = list(labels)

    def logits(self, sample) -> tuple[np.ndarray, list[tuple[int, ...]]]:
        cands = enumerate_candidates(sample, self.config.h)
        z, _ = encode_candidates(self.params, EncodedSample.from_sample(sample, self.vocab), cands)
        return z, cands

    def predict_records(self, dataset: Dataset, tau: float = 1.0) -> list[PredictionRecord]:
        out = []
        for s in dataset.samples:
            z, cands = self.logits(s)
            z = z.astype(np.float64)
            w = weights(z.max(axis=1), tau)
            label, idx = predict(z, w)
            out.append(PredictionRecord(s.id, label, cands[idx], w, z, cands))
        return out

    def evaluate(self, dataset: Dataset, tau: float = 1.0) -> tuple[MetricReport, list[PredictionRecord]]:
        records = self.predict_records(dataset, tau)
        return evaluate_records(records, dataset.samples, dataset.num_labels), records


def sample_gradient(params: ModelParams, sample, inputs: EncodedSample, h: int,
                    objective: ObjectiveConfig, grads: ModelParams | None = None):
    """Loss and parameter gradient of one sample (accumulated into ``grads`` if given)."""
    cands = enumerate_candidates(sample, h)
    z, cache = encode_candidates(params, inputs, cands)
    mask = gold_mask(sample, cands) if objective.supervised else None
    lb = total_loss_and_grad(z.astype(np.float64), sample.label, mask, objective)
    return lb.total, backward(params, cache, lb.dz, grads)


def _better(a: MetricReport, b: MetricReport | None) -> bool:
    if b is None:
        return True
    return (a.f1a, a.rationale_f1) > (b.f1a, b.rationale_f1)


def train(train_set: Dataset, val_set: Dataset | None, params_init: ModelParams | None,
          config: TrainConfig, dtype=np.float32) -> tuple[ModelParams, TrainHistory]:
    if not train_set.samples:
        raise TrainingError("training set is empty")
    if val_set is not None and val_set.num_labels != train_set.num_labels:
        raise TrainingError("train and validation sets disagree on the number of labels")
    vocab = train_set.vocab
    enc_cfg = config.encoder_config(len(vocab), train_set.num_labels)
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    params = init_params(enc_cfg, rng, config.init_scale, dtype) if params_init is None else params_init.copy()
    params.check(enc_cfg)
    opt = Optimizer(params, config)
    encoded = [EncodedSample.from_sample(s, vocab) for s in train_set.samples]
    val = val_set.with_vocab(vocab) if val_set is not None else None
    N, B = len(encoded), config.samples_per_step
    steps_per_epoch = math.ceil(N / B)
    eval_every = config.eval_every or steps_per_epoch

    history = TrainHistory()
    best, best_params, stale = None, params.copy(), 0
    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    step, running = 0, []
    try:
        for epoch in range(config.epochs):
            order = rng.permutation(N)
            for start in range(0, N, B):
                batch = order[start:start + B]
                grads = params.zeros_like()
                work = lambda k: sample_gradient(params, train_set.samples[k], encoded[k], config.h,
                                                 config.objective)
                # per-sample gradients summed in batch order, so thread count cannot change results
                results = list(map(work, batch) if pool is None else pool.map(work, batch))
                losses = [r[0] for r in results]
                for _, g in results:
                    for acc, part in zip(grads.arrays(), g.arrays()):
                        acc += part
                batch_loss = float(np.mean(losses))
                if not math.isfinite(batch_loss):
                    raise TrainingError(f"non-finite loss {batch_loss} at step {step} (epoch {epoch})")
                for g in grads.arrays():
                    g /= len(batch)
                opt.step(params, grads)
                step += 1
                running.append(batch_loss)

                if step % eval_every == 0 or step == config.epochs * steps_per_epoch:
                    report = MetricReport()
                    if val is not None:
                        report, _ = Model(params, enc_cfg, vocab, train_set.labels).evaluate(
                            val, config.objective.tau)
                    history.rows.append(HistoryRow(step, float(np.mean(running)), report))
                    log.info("step %d loss %.4f val f1a %.4f acc %.4f rat-f1 %.4f", step,
                             np.mean(running), report.f1a, report.accuracy, report.rationale_f1)
                    running = []
                    if val is not None and _better(report, best):
                        best, best_params, stale = report, params.copy(), 0
                        history.best_step = step
                    else:
                        stale += 1
                    if config.early_stop_patience is not None and stale > config.early_stop_patience:
                        raise StopIteration
    except StopIteration:
        log.info("early stop at step %d", step)
    finally:
        if pool is not None:
            pool.shutdown()

    if config.keep == "best" and val is not None and best is not None:
        return best_params, history
    return params, history


def subsample(dataset: Dataset, fraction: float, seed: int) -> Dataset:
    """Label-stratified sample without replacement of ``round(fraction * N)`` items."""
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    N = len(dataset)
    target = round(fraction * N)
    if target == 0:
        raise ValueError(f"fraction {fraction} of {N} samples selects nothing")
    rng = np.random.Generator(np.random.Philox(key=seed))
    by_label: dict[int, list[int]] = {}
    for i, s in enumerate(dataset.samples):
        by_label.setdefault(s.label, []).append(i)
    labels = sorted(by_label)
    # largest-remainder allocation so per-label quotas sum to the target
    exact = {c: len(by_label[c]) * target / N for c in labels}
    quota = {c: math.floor(exact[c]) for c in labels}
    for c in sorted(labels, key=lambda c: (-(exact[c] - quota[c]), c))[: target - sum(quota.values())]:
        quota[c] += 1
    chosen = []
    for c in labels:
        idx = by_label[c]
        pick = rng.permutation(len(idx))[: quota[c]]
        chosen.extend(idx[p] for p in pick)
    chosen = [chosen[p] for p in rng.permutation(len(chosen))]
    return dataset.subset([dataset.samples[i] for i in chosen])


def train_and_evaluate(train_set: Dataset, val_set: Dataset, config: TrainConfig):
    params, history = train(train_set, val_set, None, config)
    model = Model(params, config.encoder_config(len(train_set.vocab), train_set.num_labels),
                  train_set.vocab, train_set.labels)
    report, records = model.evaluate(val_set.with_vocab(train_set.vocab), config.objective.tau)
    return model, history, report, records


def multi_seed(train_set: Dataset, val_set: Dataset, config: TrainConfig, seeds: Sequence[int]):
    """Train once per seed; returns per-seed reports plus mean and std of every metric."""
    reports = [train_and_evaluate(train_set, val_set, replace(config, seed=s))[2] for s in seeds]
    keys = [k for k, v in reports[0].to_json().items() if isinstance(v, float)]
    table = np.array([[r.to_json()[k] for k in keys] for r in reports])
    return reports, dict(zip(keys, table.mean(axis=0))), dict(zip(keys, table.std(axis=0)))
