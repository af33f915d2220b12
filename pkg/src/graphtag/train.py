"""Training loop, optimizers, run configuration, and evaluation.

Runs are deterministic for a fixed config and seed: one generator drives
initialization, epoch shuffling and dropout masks, steps go one sentence
at a time, and the checkpoint kept is the one with the best dev joint F1
(earliest epoch on ties).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .autodiff import Parameter, Tape, backward
from .ingest import Corpus
from .metrics import ScoredResult, spans_from_labels
from .model import Model, ModelConfig, SentencePack

__all__ = [
    "NumericError",
    "RunConfig",
    "Adam",
    "Sgd",
    "make_optimizer",
    "evaluate",
    "train_model",
    "TrainResult",
]


class NumericError(RuntimeError):
    """A non-finite quantity surfaced during optimization."""


@dataclass
class RunConfig:
    """One training run: model hyperparameters plus run-level settings."""

    model: ModelConfig = field(default_factory=ModelConfig)
    seed: int = 7
    train_path: str | None = None
    dev_path: str | None = None
    test_path: str | None = None
    checkpoint_path: str = "checkpoint.json"
    metrics_path: str = "metrics.json"
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    early_stop_f1: float | None = None

    def validate(self) -> None:
        self.model.validate()
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValueError(f"betas must lie in [0, 1), got {self.beta1!r}, {self.beta2!r}")
        if self.adam_eps <= 0.0:
            raise ValueError(f"adam_eps must be positive, got {self.adam_eps!r}")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "train": self.train_path,
            "dev": self.dev_path,
            "test": self.test_path,
            "checkpoint": self.checkpoint_path,
            "metrics": self.metrics_path,
            "optimizer": self.optimizer,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "adam_eps": self.adam_eps,
            "early_stop_f1": self.early_stop_f1,
            "model": self.model.to_dict(),
        }


class Adam:
    """Adam with bias correction; one moment pair per parameter."""

    def __init__(
        self,
        params: Sequence[Parameter],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]
        self._t = 0

    def step(self) -> None:
        self._t += 1
        b1, b2 = self.beta1, self.beta2
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1 ** self._t)
            v_hat = v / (1.0 - b2 ** self._t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class Sgd:
    """Plain gradient descent."""

    def __init__(self, params: Sequence[Parameter], lr: float):
        self.params = list(params)
        self.lr = lr

    def step(self) -> None:
        for p in self.params:
            p.data -= self.lr * p.grad


def make_optimizer(run: RunConfig, params: Sequence[Parameter]):
    if run.optimizer == "adam":
        return Adam(params, run.model.learning_rate, run.beta1, run.beta2, run.adam_eps)
    return Sgd(params, run.model.learning_rate)


def evaluate(model: Model, packs: Sequence[SentencePack]) -> dict[str, ScoredResult]:
    """Micro-averaged segmentation and joint scores over prepared sentences."""
    from .metrics import f1_cws, f1_joint

    cws = ScoredResult.zero()
    joint = ScoredResult.zero()
    for pack in packs:
        labels = [model.alphabet.label(i) for i in model.predict(pack)]
        pred_pairs = spans_from_labels(labels)
        pred_spans = [span for span, _ in pred_pairs]
        cws = cws + f1_cws(pack.gold_spans, pred_spans)
        joint = joint + f1_joint(pack.gold_pairs, pred_pairs)
    return {"cws": cws, "joint": joint}


@dataclass
class TrainResult:
    model: Model
    metrics: dict
    best_epoch: int


def train_model(
    run: RunConfig,
    train_corpus: Corpus,
    dev_corpus: Corpus | None = None,
    log: Callable[[str], None] | None = None,
) -> TrainResult:
    """Train a fresh model; returns it holding the best-dev-epoch weights.

    The dev set defaults to the training set. Metrics hold one row per
    completed epoch plus the run config; a non-finite loss aborts with the
    offending sentence index.
    """
    run.validate()
    rng = np.random.default_rng(run.seed)
    vocab = sorted({c for s in train_corpus.sentences for c in s.chars})
    model = Model(run.model, vocab, train_corpus.pos_tagset, rng)
    packs = [model.pack(s) for s in train_corpus.sentences]
    if not packs:
        raise ValueError("empty training corpus")
    dev_packs = (
        packs
        if dev_corpus is None
        else [model.pack(s) for s in dev_corpus.sentences]
    )
    optimizer = make_optimizer(run, model.parameters())

    best_state = model.state_copy()
    best_f1 = -1.0
    best_epoch = 0
    rows: list[dict] = []
    for epoch in range(1, run.model.epochs + 1):
        order = rng.permutation(len(packs))
        total = 0.0
        for si in order:
            with Tape():
                loss = model.loss(packs[si], train=True, rng=rng)
                value = loss.item()
                if not math.isfinite(value):
                    raise NumericError(
                        f"non-finite loss {value!r} at sentence {int(si)} in epoch {epoch}"
                    )
                model.zero_grad()
                backward(loss)
            optimizer.step()
            total += value
        scores = evaluate(model, dev_packs)
        row = {
            "epoch": epoch,
            "loss": total / len(packs),
            "dev_cws_f1": scores["cws"].f1,
            "dev_joint_f1": scores["joint"].f1,
        }
        rows.append(row)
        if log is not None:
            log(
                f"epoch {epoch}: loss={row['loss']:.4f} "
                f"dev_cws={row['dev_cws_f1']:.4f} dev_joint={row['dev_joint_f1']:.4f}"
            )
        if scores["joint"].f1 > best_f1:
            best_f1 = scores["joint"].f1
            best_state = model.state_copy()
            best_epoch = epoch
        if (
            run.early_stop_f1 is not None
            and scores["joint"].f1 >= run.early_stop_f1
            and scores["cws"].f1 >= run.early_stop_f1
        ):
            break
    model.load_state(best_state)
    metrics = {"config": run.to_dict(), "epochs": rows, "test": None}
    return TrainResult(model=model, metrics=metrics, best_epoch=best_epoch)
