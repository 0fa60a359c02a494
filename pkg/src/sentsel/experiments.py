"""Reference synthetic setups shared by the scripts and the acceptance tests.

Validation corpora use ``seed + 100`` so they never coincide with training data.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .corpus import Dataset
from .objective import ObjectiveConfig
from .synthgen import SynthConfig, generate
from .trainer import TrainConfig, train_and_evaluate

VAL_SEED_OFFSET = 100


@dataclass(frozen=True)
class Setup:
    data: SynthConfig
    num_val: int
    train: TrainConfig

    def datasets(self) -> tuple[Dataset, Dataset]:
        tr = generate(self.data)
        va = generate(replace(self.data, num_samples=self.num_val, seed=self.data.seed + VAL_SEED_OFFSET))
        return tr, va


SINGLE_EVIDENCE = Setup(
    SynthConfig("single_evidence", num_samples=2000, vocab_size=200, sentences_per_doc=8, seed=1),
    num_val=500,
    train=TrainConfig(epochs=30, h=1, seed=1),
)

TWO_HOP = Setup(
    SynthConfig("two_hop", num_samples=2000, vocab_size=200, sentences_per_doc=8, seed=1),
    num_val=500,
    train=TrainConfig(epochs=10, h=2, seed=1, objective=ObjectiveConfig(supervised=True)),
)

# Opposing evidence dominates NEG reviews (4-8 positive sentences) while POS
# reviews hold one negative sentence; 50 verdict markers keep the verdict
# tokens rare enough that the unsupervised model latches onto sentiment.
DISCUSSION = Setup(
    SynthConfig("discussion", num_samples=800, vocab_size=600, sentences_per_doc=20, seed=1,
                num_markers=50, neg_doc_pos_evidence=(4, 8), neg_doc_neg_evidence=(1, 3),
                pos_doc_pos_evidence=(1, 3), pos_doc_neg_evidence=(1, 1)),
    num_val=500,
    train=TrainConfig(epochs=20, h=1, seed=1, keep="final"),
)

SETUPS = {"single_evidence": SINGLE_EVIDENCE, "two_hop": TWO_HOP, "discussion": DISCUSSION}


def run(setup: Setup, **overrides):
    """Train on the setup's corpus; ``overrides`` replace TrainConfig fields.

    Pass ``supervised=`` / ``tau=`` to change the objective.
    """
    obj_keys = {"supervised", "tau", "lambda_rationale", "stop_grad_weights"}
    obj = {k: overrides.pop(k) for k in list(overrides) if k in obj_keys}
    cfg = replace(setup.train, **overrides)
    if obj:
        cfg = replace(cfg, objective=replace(cfg.objective, **obj))
    tr, va = setup.datasets()
    return train_and_evaluate(tr, va, cfg)
