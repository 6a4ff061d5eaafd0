"""Reference scorers used as comparison anchors."""

from __future__ import annotations

import numpy as np

from .graph import TripartiteGraph
from .training import TrainConfig, _bpr_vec, epoch_triplets


class PopularityScorer:
    """Global training frequency of each hashtag; ignores user and video."""

    def __init__(self, graph: TripartiteGraph):
        counts = np.zeros(graph.n_hashtags)
        for t in graph.triples:
            counts[t.hashtag] += 1
        self.counts = counts

    def __call__(self, user: int, video: int, candidates: np.ndarray) -> np.ndarray:
        return self.counts[candidates]


class UserHashtagCF:
    """Dot product of user and hashtag ID embeddings, no content or propagation."""

    def __init__(self, user_emb: np.ndarray, hashtag_emb: np.ndarray):
        self.user_emb = user_emb
        self.hashtag_emb = hashtag_emb

    def __call__(self, user: int, video: int, candidates: np.ndarray) -> np.ndarray:
        return self.hashtag_emb[candidates] @ self.user_emb[user]


def train_user_hashtag_cf(graph: TripartiteGraph, dim: int, config: TrainConfig) -> UserHashtagCF:
    """BPR matrix factorisation over (user, hashtag) with the trainer's SGD settings."""
    init_seq, sample_seq = np.random.SeedSequence(config.seed).spawn(2)
    init = np.random.default_rng(init_seq)
    P = init.normal(0.0, config.init_std, (graph.n_users, dim))
    Q = init.normal(0.0, config.init_std, (graph.n_hashtags, dim))
    rng = np.random.default_rng(sample_seq)
    lr, lam = config.learning_rate, config.l2_lambda
    for _ in range(config.epochs):
        trips = np.asarray(epoch_triplets(graph, rng, config.neg_per_positive), dtype=np.int64)
        for start in range(0, len(trips), config.batch_size):
            b = trips[start:start + config.batch_size]
            u, pos, neg = b[:, 0], b[:, 2], b[:, 3]
            delta = np.einsum("ij,ij->i", P[u], Q[pos] - Q[neg])
            _, g = _bpr_vec(delta)
            g = (g / len(b))[:, None]
            gP = np.zeros_like(P)
            gQ = np.zeros_like(Q)
            np.add.at(gP, u, g * (Q[pos] - Q[neg]))
            np.add.at(gQ, pos, g * P[u])
            np.add.at(gQ, neg, -g * P[u])
            P = P - lr * (gP + 2 * lam * P)
            Q = Q - lr * (gQ + 2 * lam * Q)
    return UserHashtagCF(P, Q)
