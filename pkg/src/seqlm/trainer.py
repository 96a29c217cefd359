"""AdaDelta training with dev-based model selection and multi-seed runs."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .config import RunConfig
from .data import Corpus, build_vocabularies, encode_corpus, load_pretrained_embeddings, make_batches
from .errors import ShapeError
from .metrics import evaluate
from .model import LM_PARAMS, ModelDims, ModelParams, Tagger, apply_dropout, sentence_loss

__all__ = ["AdaDeltaState", "adadelta_update", "AdaDelta", "apply_dropout", "EpochRecord",
           "TrainHistory", "train", "evaluate_tagger", "SeedRun", "run_seeds", "aggregate"]

log = logging.getLogger(__name__)


@dataclass
class AdaDeltaState:
    eg2: np.ndarray
    edx2: np.ndarray

    @classmethod
    def zeros_like(cls, param: np.ndarray) -> "AdaDeltaState":
        return cls(np.zeros_like(param), np.zeros_like(param))


def adadelta_update(param: np.ndarray, grad: np.ndarray, state: AdaDeltaState,
                    rho: float = 0.95, eps: float = 1e-6, lr: float = 1.0) -> None:
    """One in-place AdaDelta step (Zeiler, 2012)."""
    if param.shape != grad.shape or state.eg2.shape != param.shape:
        raise ShapeError(f"adadelta: param {param.shape}, grad {grad.shape}, state {state.eg2.shape}")
    state.eg2 *= rho
    state.eg2 += (1.0 - rho) * grad * grad
    delta = -np.sqrt(state.edx2 + eps) / np.sqrt(state.eg2 + eps) * grad
    state.edx2 *= rho
    state.edx2 += (1.0 - rho) * delta * delta
    param += lr * delta


class AdaDelta:
    def __init__(self, params: ModelParams, rho: float = 0.95, eps: float = 1e-6, lr: float = 1.0):
        self.params = params
        self.rho, self.eps, self.lr = rho, eps, lr
        self.state = {name: AdaDeltaState.zeros_like(arr) for name, arr in params}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        for name, grad in grads.items():
            adadelta_update(self.params[name], grad, self.state[name], self.rho, self.eps, self.lr)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev: dict
    seconds: float = 0.0

    @property
    def dev_score(self) -> float:
        return self.dev["score"]


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stop_reason: str = ""

    @property
    def best_score(self) -> float:
        return self.epochs[self.best_epoch - 1].dev_score

    def to_records(self, include_time: bool = False, **extra) -> list[dict]:
        """One record per epoch plus a summary record. Wall time is left out by
        default so records from identical runs compare equal."""
        out = []
        for e in self.epochs:
            rec = {"type": "epoch", **extra, "epoch": e.epoch, "train_loss": e.train_loss,
                   "dev_score": e.dev_score, "dev": e.dev}
            if include_time:
                rec["seconds"] = e.seconds
            out.append(rec)
        out.append({"type": "summary", **extra, "best_epoch": self.best_epoch,
                    "best_dev_score": self.best_score, "stop_reason": self.stop_reason,
                    "epochs": len(self.epochs)})
        return out


def evaluate_tagger(tagger: Tagger, corpus: Corpus, metric: str | None = None) -> dict:
    """Metric record for ``corpus`` (already encoded) with dropout in eval mode and no LM heads."""
    metric = metric or tagger.config.dev_metric
    pred = tagger.predict_corpus(corpus)
    return evaluate(pred, corpus.label_strings(), metric, tagger.config.positive_label)


def _rngs(seed: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


def train(config: RunConfig, train_corpus: Corpus, dev_corpus: Corpus,
          seed: int | None = None) -> tuple[Tagger, TrainHistory]:
    """Train one model and return the snapshot with the best dev score."""
    seed = config.seeds[0] if seed is None else seed
    vocabs = build_vocabularies(train_corpus, config.lm_k)
    train_enc = encode_corpus(train_corpus, vocabs, "train")
    dev_enc = encode_corpus(dev_corpus, vocabs, "dev")
    init_rng, shuffle_rng, dropout_rng = _rngs(seed)

    dims = ModelDims.from_config(config, vocabs)
    embeddings = None
    if config.embeddings_path:
        embeddings, matched = load_pretrained_embeddings(config.embeddings_path, vocabs.words,
                                                         config.embedding_dim, init_rng)
        log.info("pretrained vectors found for %d of %d words", matched, len(vocabs.words))
    params = ModelParams.initialize(dims, init_rng, embeddings)
    optimizer = AdaDelta(params, config.rho, config.epsilon, config.learning_rate)
    trainable = [name for name, _ in params if config.gamma > 0 or name not in LM_PARAMS]
    dropout_p = config.effective_dropout

    history = TrainHistory()
    best_params, best_score, bad_epochs = None, -np.inf, 0
    for epoch in range(1, config.max_epochs + 1):
        start = time.perf_counter()
        epoch_loss = 0.0
        batches = make_batches(train_enc, config.batch_size, int(shuffle_rng.integers(2 ** 32)))
        for batch in batches:
            P = params.nodes(requires_grad=True)
            cache: dict = {}
            losses = [sentence_loss(s, P, dims, config.gamma, "train", dropout_p, dropout_rng, cache=cache).total
                      for s in batch]
            batch_loss = ad.add_n(losses)
            ad.backward(batch_loss)
            optimizer.step({name: P[name].grad for name in trainable})
            epoch_loss += float(batch_loss.value)

        dev = evaluate_tagger(Tagger(config, vocabs, params), dev_enc)
        history.epochs.append(EpochRecord(epoch, epoch_loss, dev, time.perf_counter() - start))
        log.info("epoch %d  loss %.4f  dev %s %.4f", epoch, epoch_loss, config.dev_metric, dev["score"])

        if dev["score"] > best_score:
            best_score, best_params, bad_epochs = dev["score"], params.copy(), 0
            history.best_epoch = epoch
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                history.stop_reason = "patience"
                break
    else:
        history.stop_reason = "max_epochs"
    return Tagger(config, vocabs, best_params), history


@dataclass
class SeedRun:
    seed: int
    tagger: Tagger
    history: TrainHistory
    dev: dict
    test: dict | None = None

    def record(self) -> dict:
        rec = {"type": "seed", "seed": self.seed, "best_epoch": self.history.best_epoch, "dev": self.dev}
        if self.test is not None:
            rec["test"] = self.test
        return rec


_NUMERIC = ("precision", "recall", "f", "accuracy", "score")


def aggregate(records: Sequence[dict]) -> dict:
    """Arithmetic mean of each metric field, taken independently."""
    out = {"metric": records[0]["metric"]} if records else {}
    for key in _NUMERIC:
        vals = [r[key] for r in records if key in r]
        if vals:
            out[key] = float(np.mean(vals))
    return out


def _run_one(args):
    config, train_corpus, dev_corpus, test_corpus, seed = args
    tagger, history = train(config, train_corpus, dev_corpus, seed)
    dev = evaluate_tagger(tagger, encode_corpus(dev_corpus, tagger.vocabs, "dev"))
    test = None
    if test_corpus is not None:
        test = evaluate_tagger(tagger, encode_corpus(test_corpus, tagger.vocabs, "test"))
    return SeedRun(seed, tagger, history, dev, test)


def run_seeds(config: RunConfig, train_corpus: Corpus, dev_corpus: Corpus,
              test_corpus: Corpus | None = None, seeds: Sequence[int] | None = None,
              workers: int = 1) -> tuple[list[SeedRun], dict]:
    """Train one model per seed and average dev/test metrics over seeds.

    Returns the per-seed runs and a summary record with the means.
    """
    seeds = list(config.seeds if seeds is None else seeds)
    if not seeds:
        raise ValueError("no seeds given")
    jobs = [(config, train_corpus, dev_corpus, test_corpus, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_one, jobs))
    else:
        runs = [_run_one(j) for j in jobs]
    summary = {"type": "mean", "seeds": seeds, "dev": aggregate([r.dev for r in runs])}
    if test_corpus is not None:
        summary["test"] = aggregate([r.test for r in runs])
    return runs, summary
