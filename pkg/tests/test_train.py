"""Optimizers, the training loop, and its determinism guarantees."""

import numpy as np
import numpy.testing as npt
import pytest

from graphtag.autodiff import Parameter, Tape, backward, mul, tsum
from graphtag.ingest import Corpus, sentence_from_words
from graphtag.model import ModelConfig
from graphtag.synthetic import make_synthetic_corpus
from graphtag.train import (
    Adam,
    NumericError,
    RunConfig,
    Sgd,
    evaluate,
    make_optimizer,
    train_model,
)


def small_corpus():
    return make_synthetic_corpus(n_sentences=12)


def quick_run(**overrides):
    model_kwargs = {"embed_dim": 8, "gcn_layer_dims": (6, 8), "epochs": 2}
    model_kwargs.update(overrides.pop("model_kwargs", {}))
    return RunConfig(model=ModelConfig(**model_kwargs), **overrides)


class TestOptimizers:
    def _converges(self, make_opt, steps, tol):
        p = Parameter(np.array([5.0, -3.0]), "p")
        opt = make_opt([p])
        for _ in range(steps):
            p.zero_grad()
            with Tape():
                backward(tsum(mul(p, p)))
            opt.step()
        assert np.abs(p.data).max() < tol

    def test_sgd_minimizes_quadratic(self):
        self._converges(lambda ps: Sgd(ps, lr=0.1), steps=50, tol=1e-4)

    def test_adam_minimizes_quadratic(self):
        self._converges(lambda ps: Adam(ps, lr=0.3), steps=200, tol=1e-3)

    def test_adam_first_step_is_lr_sized(self):
        # bias correction makes the first update lr * g/(|g| + eps),
        # near lr for any gradient scale well above eps
        for g0 in (1e-4, 1.0, 1e4):
            p = Parameter(np.array([0.0]), "p")
            opt = Adam([p], lr=0.01)
            p.grad[...] = g0
            opt.step()
            npt.assert_allclose(p.data, [-0.01], rtol=2e-4)

    def test_make_optimizer_honors_choice(self):
        run = quick_run()
        assert isinstance(make_optimizer(run, []), Adam)
        run.optimizer = "sgd"
        assert isinstance(make_optimizer(run, []), Sgd)


class TestRunConfig:
    def test_validation(self):
        with pytest.raises(ValueError, match="optimizer must be adam or sgd"):
            RunConfig(optimizer="rmsprop").validate()
        with pytest.raises(ValueError, match="betas must lie in"):
            RunConfig(beta1=1.0).validate()
        with pytest.raises(ValueError, match="adam_eps must be positive"):
            RunConfig(adam_eps=0.0).validate()

    def test_to_dict_nests_model(self):
        d = quick_run(seed=11).to_dict()
        assert d["seed"] == 11
        assert d["model"]["embed_dim"] == 8


class TestTraining:
    def test_loss_decreases_over_epochs(self):
        result = train_model(quick_run(model_kwargs={"epochs": 3}), small_corpus())
        losses = [row["loss"] for row in result.metrics["epochs"]]
        assert len(losses) == 3
        assert losses[-1] < losses[0]

    def test_same_seed_reproduces_exactly(self):
        a = train_model(quick_run(seed=21), small_corpus())
        b = train_model(quick_run(seed=21), small_corpus())
        assert a.metrics["epochs"] == b.metrics["epochs"]
        for name, p in a.model.params.items():
            npt.assert_array_equal(b.model.params[name].data, p.data)

    def test_different_seeds_diverge(self):
        a = train_model(quick_run(seed=1), small_corpus())
        b = train_model(quick_run(seed=2), small_corpus())
        assert a.metrics["epochs"] != b.metrics["epochs"]

    def test_dropout_stays_deterministic_per_seed(self):
        kwargs = {"model_kwargs": {"dropout": 0.3, "epochs": 2}}
        a = train_model(quick_run(seed=5, **kwargs), small_corpus())
        b = train_model(quick_run(seed=5, **kwargs), small_corpus())
        assert a.metrics["epochs"] == b.metrics["epochs"]

    def test_zero_epochs_returns_initial_model(self):
        result = train_model(quick_run(model_kwargs={"epochs": 0}), small_corpus())
        assert result.metrics["epochs"] == []
        assert result.best_epoch == 0

    def test_early_stop_needs_both_scores(self):
        corpus = make_synthetic_corpus(n_sentences=8)
        run = quick_run(
            model_kwargs={"epochs": 60}, early_stop_f1=1.0, seed=11
        )
        result = train_model(run, corpus)
        rows = result.metrics["epochs"]
        assert len(rows) < 60  # stopped once both scores hit 1.0
        assert rows[-1]["dev_cws_f1"] == 1.0
        assert rows[-1]["dev_joint_f1"] == 1.0

    def test_best_epoch_holds_best_weights(self):
        corpus = small_corpus()
        run = quick_run(model_kwargs={"epochs": 4})
        result = train_model(run, corpus)
        rows = result.metrics["epochs"]
        best = max(rows, key=lambda r: r["dev_joint_f1"])["dev_joint_f1"]
        assert rows[result.best_epoch - 1]["dev_joint_f1"] == best
        packs = [result.model.pack(s) for s in corpus.sentences]
        scores = evaluate(result.model, packs)
        npt.assert_allclose(scores["joint"].f1, best, atol=1e-12)

    def test_separate_dev_corpus_used(self):
        train_part = make_synthetic_corpus(n_sentences=10)
        dev_part = Corpus(
            sentences=train_part.sentences[:3], pos_tagset=train_part.pos_tagset
        )
        result = train_model(quick_run(), train_part, dev_corpus=dev_part)
        assert result.metrics["epochs"]

    def test_empty_corpus_rejected(self):
        empty = Corpus(sentences=[], pos_tagset=["NN"])
        with pytest.raises(ValueError, match="empty training corpus"):
            train_model(quick_run(), empty)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_loss_names_sentence_and_epoch(self):
        corpus = small_corpus()
        run = quick_run(model_kwargs={"epochs": 1, "learning_rate": 1e250})
        with pytest.raises(NumericError, match=r"non-finite loss .* in epoch \d"):
            train_model(run, corpus)

    def test_log_callback_sees_each_epoch(self):
        lines = []
        train_model(quick_run(), small_corpus(), log=lines.append)
        assert len(lines) == 2
        assert lines[0].startswith("epoch 1: loss=")


class TestEvaluate:
    def test_perfect_model_scores_one(self):
        corpus = make_synthetic_corpus(n_sentences=8)
        run = quick_run(model_kwargs={"epochs": 40}, early_stop_f1=1.0, seed=11)
        result = train_model(run, corpus)
        packs = [result.model.pack(s) for s in corpus.sentences]
        scores = evaluate(result.model, packs)
        assert scores["cws"].f1 == 1.0
        assert scores["joint"].f1 == 1.0
