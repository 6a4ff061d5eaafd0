"""Pairwise (BPR) training with plain SGD and L2 regularisation."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .graph import TripartiteGraph, build_graph
from .model import (
    ModelConfig,
    ModelParams,
    init_params,
    propagate,
    propagate_backward,
    score_batch,
    score_batch_backward,
)
from .numerics import finite_difference_check

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    l2_lambda: float = 1e-4
    batch_size: int = 256
    epochs: int = 10
    seed: int = 0
    neg_per_positive: int = 1
    init_std: float = 0.1
    eval_k: int = 5

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if self.batch_size < 1 or self.neg_per_positive < 1:
            raise ValueError("batch_size and neg_per_positive must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


class TrainTriplet(NamedTuple):
    user: int
    video: int
    positive: int
    negative: int


# -- sampling ---------------------------------------------------------------

def sample_negative(graph: TripartiteGraph, user: int, video: int, rng: np.random.Generator,
                    max_tries: int = 1000) -> int:
    """Uniform hashtag not used by ``user`` on ``video`` (rejection sampling)."""
    used = graph.hashtags_of_user_video.get((user, video), ())
    if len(used) >= graph.n_hashtags:
        raise TrainingError(f"user {user} used every hashtag on video {video}; no negative exists")
    for _ in range(max_tries):
        j = int(rng.integers(graph.n_hashtags))
        if j not in used:
            return j
    raise TrainingError(f"no negative hashtag found for ({user}, {video}) after {max_tries} draws")


def sample_triplet(graph: TripartiteGraph, rng: np.random.Generator) -> TrainTriplet:
    if not graph.triples or graph.n_hashtags < 2:
        raise TrainingError("need at least one tagging triple and two hashtags")
    t = graph.triples[int(rng.integers(len(graph.triples)))]
    return TrainTriplet(t.user, t.video, t.hashtag, sample_negative(graph, t.user, t.video, rng))


def epoch_triplets(graph: TripartiteGraph, rng: np.random.Generator, neg_per_positive: int = 1) -> list[TrainTriplet]:
    """Every training triple once, shuffled, each paired with fresh negatives."""
    out = []
    for n in rng.permutation(len(graph.triples)):
        t = graph.triples[n]
        for _ in range(neg_per_positive):
            out.append(TrainTriplet(t.user, t.video, t.hashtag, sample_negative(graph, t.user, t.video, rng)))
    return out


# -- objective --------------------------------------------------------------

def bpr_loss(pos_score: float, neg_score: float) -> tuple[float, float, float]:
    """``-ln sigmoid(pos - neg)`` and its gradients w.r.t. ``pos`` and ``neg``."""
    delta = pos_score - neg_score
    loss = float(np.logaddexp(0.0, -delta))
    g = -float(np.exp(-np.logaddexp(0.0, delta)))  # -(1 - sigmoid(delta))
    return loss, g, -g


def _bpr_vec(delta: np.ndarray):
    loss = np.logaddexp(0.0, -delta)
    g = -np.exp(-np.logaddexp(0.0, delta))
    return loss, g


def batch_loss_and_grad(params: ModelParams, graph: TripartiteGraph, features: np.ndarray,
                        config: ModelConfig, triplets: Sequence[TrainTriplet],
                        with_grad: bool = True):
    """Mean BPR loss over ``triplets`` and (optionally) its gradient."""
    if not triplets:
        raise TrainingError("empty batch")
    trip = np.asarray(triplets, dtype=np.int64).reshape(-1, 4)
    B = len(trip)
    trace = propagate(params, graph, features, config)
    users = np.concatenate([trip[:, 0], trip[:, 0]])
    videos = np.concatenate([trip[:, 1], trip[:, 1]])
    hashtags = np.concatenate([trip[:, 2], trip[:, 3]])
    cache = score_batch(params, config, trace.users, trace.hashtags, features, users, videos, hashtags)
    delta = cache.scores[:B] - cache.scores[B:]
    losses, g = _bpr_vec(delta)
    loss = losses.mean()  # stays in the input precision for the gradient checker
    if not with_grad:
        return loss, None
    g = g / B
    grads = params.zeros_like()
    g_users, g_hashtags = score_batch_backward(
        params, config, cache, np.concatenate([g, -g]), graph.n_users, graph.n_hashtags, grads)
    propagate_backward(params, graph, features, config, trace, g_users, g_hashtags, grads)
    return loss, grads


def objective(params: ModelParams, graph: TripartiteGraph, features: np.ndarray, config: ModelConfig,
              triplets: Sequence[TrainTriplet], l2_lambda: float = 0.0, with_grad: bool = True):
    """Mean BPR loss plus ``l2_lambda * ||params||^2``."""
    loss, grads = batch_loss_and_grad(params, graph, features, config, triplets, with_grad)
    loss += l2_lambda * params.squared_norm()
    if grads is not None and l2_lambda:
        for name, value in params.items():
            grads.blocks[name] += 2.0 * l2_lambda * value
    return loss, grads


def step(params: ModelParams, batch: Sequence[TrainTriplet], graph: TripartiteGraph, features: np.ndarray,
         model_config: ModelConfig, train_config: TrainConfig) -> tuple[ModelParams, float]:
    """One SGD update; returns new params and the pre-update mean BPR loss."""
    loss, grads = batch_loss_and_grad(params, graph, features, model_config, batch)
    lr, lam = train_config.learning_rate, train_config.l2_lambda
    new = {}
    for name, value in params.items():
        g = grads[name]
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient in parameter block {name!r}")
        new[name] = value - lr * (g + 2.0 * lam * value)
        if not np.isfinite(new[name]).all():
            raise TrainingError(f"parameter block {name!r} became non-finite")
    return ModelParams(new), loss


# -- fitting ----------------------------------------------------------------

@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_recall: float
    seconds: float

    def format(self) -> str:
        return f"{self.epoch}\t{self.train_loss:.6f}\t{self.val_recall:.6f}\t{self.seconds:.3f}"


@dataclass
class FitResult:
    params: ModelParams
    history: list[EpochLog] = field(default_factory=list)
    best_epoch: int = 0


def fit(graph: TripartiteGraph, features: np.ndarray, model_config: ModelConfig, train_config: TrainConfig,
        validation: Sequence | None = None, on_epoch: Callable[[EpochLog], None] | None = None,
        init: ModelParams | None = None) -> FitResult:
    """Train with per-epoch shuffled, freshly negative-sampled triplets.

    ``validation`` is a list of :class:`~gcnphr.evaluation.EvalQuery`; the
    returned params are those of the epoch with the best validation recall
    (the last epoch when no validation queries are given).
    """
    from .evaluation import evaluate

    if not graph.triples:
        raise TrainingError("training split has no tagging triples")
    init_seq, sample_seq = np.random.SeedSequence(train_config.seed).spawn(2)
    params = init if init is not None else init_params(
        model_config, graph.n_users, graph.n_hashtags, np.random.default_rng(init_seq), train_config.init_std)
    rng = np.random.default_rng(sample_seq)
    best, best_score, best_epoch = params, -np.inf, 0
    history = []
    k = train_config.eval_k
    for epoch in range(1, train_config.epochs + 1):
        t0 = time.perf_counter()
        trips = epoch_triplets(graph, rng, train_config.neg_per_positive)
        total = 0.0
        for start in range(0, len(trips), train_config.batch_size):
            batch = trips[start:start + train_config.batch_size]
            params, loss = step(params, batch, graph, features, model_config, train_config)
            total += loss * len(batch)
        if validation:
            report = evaluate(params, model_config, graph, features, validation, ks=(k,))
            val = report.recall[k]
        else:
            val = float("nan")
        entry = EpochLog(epoch, float(total / len(trips)), float(val), time.perf_counter() - t0)
        history.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
        log.debug("epoch %s", entry.format())
        if not validation or val > best_score:
            best, best_score, best_epoch = params, val, epoch
    return FitResult(best, history, best_epoch)


# -- gradient verification --------------------------------------------------

FIXTURE_UPLOADS = [(0, 0), (0, 1), (1, 2), (2, 3), (2, 4)]
FIXTURE_TRIPLES = [(0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 2), (1, 2, 1),
                   (1, 2, 3), (2, 3, 0), (2, 4, 0), (2, 4, 3), (2, 3, 2)]


def fixture_graph(d_v: int = 6, seed: int = 1) -> tuple[TripartiteGraph, np.ndarray]:
    """3 users, 5 videos, 4 hashtags; multi-video groups and multi-tag pairs on both sides."""
    features = np.random.default_rng(seed).normal(size=(5, d_v))
    return build_graph(FIXTURE_TRIPLES, FIXTURE_UPLOADS), features


def gradient_check(graph: TripartiteGraph, features: np.ndarray, model_config: ModelConfig,
                   eps: float = 1e-5, seed: int = 0, n_triplets: int = 1, l2_lambda: float = 0.0,
                   init_std: float = 0.5, params: ModelParams | None = None) -> float:
    """Max relative error between backprop and central differences over all of Theta."""
    rng = np.random.default_rng(seed)
    if params is None:
        params = init_params(model_config, graph.n_users, graph.n_hashtags, rng, init_std)
    trips = [sample_triplet(graph, rng) for _ in range(n_triplets)]
    _, analytic = objective(params, graph, features, model_config, trips, l2_lambda)

    # The numeric side runs in extended precision: several coordinates have an
    # exactly-zero gradient (softmax shift, shared user term of pos/neg) and
    # float64 roundoff there would dominate the 1e-8 relative-error floor.
    wide = params.astype(np.longdouble)
    wide_features = np.asarray(features, dtype=np.longdouble)

    def f(blocks):
        return objective(_view(blocks), graph, wide_features, model_config, trips, l2_lambda, with_grad=False)[0]

    return float(finite_difference_check(f, wide.blocks, analytic.blocks, eps))


def _view(blocks: dict[str, np.ndarray]) -> ModelParams:
    """Wrap blocks without copying so in-place perturbations are seen."""
    p = ModelParams.__new__(ModelParams)
    p.blocks = blocks
    return p
