"""Dataset splitting and the top-K protocol with sampled negative hashtags."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .graph import TripartiteGraph
from .model import ModelConfig, ModelParams, propagate, rank_scores, score_candidates

Scorer = Callable[[int, int, np.ndarray], np.ndarray]


class SplitError(ValueError):
    pass


# -- splitting --------------------------------------------------------------

@dataclass(frozen=True)
class Split:
    train: list[tuple[int, int, int]]
    validation: list[tuple[int, int, int]]
    test: list[tuple[int, int, int]]
    moved_pairs: int = 0


def split(triples: Iterable[tuple[int, int, int]], ratios: Sequence[float] = (0.8, 0.1, 0.1),
          seed: int = 0) -> Split:
    """Random split at (user, video) granularity.

    All hashtags of one (user, video) pair land in the same part.  Held-out
    pairs whose user has no training pair are moved to training.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    by_pair: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
    for u, v, h in sorted(set((int(a), int(b), int(c)) for a, b, c in triples)):
        by_pair.setdefault((u, v), []).append((u, v, h))
    pairs = sorted(by_pair)
    if len(pairs) < 3:
        raise SplitError(f"need at least 3 (user, video) pairs to split, got {len(pairs)}")
    order = np.random.default_rng(seed).permutation(len(pairs))
    n_test = int(round(len(pairs) * ratios[2]))
    n_val = int(round(len(pairs) * ratios[1]))
    test_p = [pairs[n] for n in order[:n_test]]
    val_p = [pairs[n] for n in order[n_test:n_test + n_val]]
    train_p = [pairs[n] for n in order[n_test + n_val:]]

    train_users = {u for u, _ in train_p}
    moved = [p for p in test_p + val_p if p[0] not in train_users]
    if moved:
        warnings.warn(f"moved {len(moved)} held-out (user, video) pairs of users unseen in training "
                      f"into the training split", stacklevel=2)
        moved_set = set(moved)
        train_p += moved
        test_p = [p for p in test_p if p not in moved_set]
        val_p = [p for p in val_p if p not in moved_set]

    def flat(ps):
        return sorted(t for p in ps for t in by_pair[p])

    return Split(flat(train_p), flat(val_p), flat(test_p), len(moved))


# -- queries ----------------------------------------------------------------

@dataclass(frozen=True)
class EvalQuery:
    user: int
    video: int
    ground_truth: tuple[int, ...]
    candidates: tuple[int, ...]

    @property
    def n_negatives(self) -> int:
        return len(self.candidates) - len(self.ground_truth)


def build_queries(held_out: Iterable[tuple[int, int, int]], n_hashtags: int, n_neg: int = 1000,
                  seed: int = 0) -> list[EvalQuery]:
    """One query per held-out (user, video) pair.

    Negatives are drawn uniformly without replacement from the hashtags not
    in the ground truth; when fewer than ``n_neg`` exist, all are used.
    """
    if n_neg < 1:
        raise ValueError("n_neg must be >= 1")
    gt: dict[tuple[int, int], set[int]] = {}
    for u, v, h in held_out:
        gt.setdefault((int(u), int(v)), set()).add(int(h))
    rng = np.random.default_rng(seed)
    everything = np.arange(n_hashtags)
    queries = []
    for (u, v), tags in sorted(gt.items()):
        eligible = everything[~np.isin(everything, list(tags))]
        if len(eligible) <= n_neg:
            negs = eligible
        else:
            negs = rng.choice(eligible, size=n_neg, replace=False)
        queries.append(EvalQuery(u, v, tuple(sorted(tags)), tuple(sorted(set(tags) | set(negs.tolist())))))
    return queries


# -- metrics ----------------------------------------------------------------

def _hits(ranked: Sequence[int], ground_truth: Iterable[int], k: int) -> tuple[int, int]:
    gt = set(ground_truth)
    if not gt:
        raise ValueError("empty ground truth")
    if k < 1:
        raise ValueError("K must be >= 1")
    return len(gt.intersection(ranked[:k])), len(gt)


def precision_at_k(ranked: Sequence[int], ground_truth: Iterable[int], k: int) -> float:
    hits, _ = _hits(ranked, ground_truth, k)
    return hits / k


def recall_at_k(ranked: Sequence[int], ground_truth: Iterable[int], k: int) -> float:
    hits, n = _hits(ranked, ground_truth, k)
    return hits / n


def accuracy_at_k(ranked: Sequence[int], ground_truth: Iterable[int], k: int) -> float:
    """1 when at least one ground-truth hashtag is in the top ``k``."""
    hits, _ = _hits(ranked, ground_truth, k)
    return 1.0 if hits else 0.0


def random_recall_at_k(queries: Sequence[EvalQuery], k: int) -> float:
    """Expected R@K of a uniformly random ranking, averaged over queries."""
    return float(np.mean([min(k, len(q.candidates)) / len(q.candidates) for q in queries]))


@dataclass
class QueryResult:
    user: int
    video: int
    ranked: list[int]
    hits: dict[int, int]
    n_ground_truth: int


@dataclass
class EvalReport:
    ks: tuple[int, ...]
    precision: dict[int, float]
    recall: dict[int, float]
    accuracy: dict[int, float]
    n_queries: int
    n_dropped: int = 0
    rows: list[QueryResult] = field(default_factory=list, repr=False)

    def lines(self) -> list[str]:
        """``metric<TAB>K<TAB>value`` lines."""
        out = []
        for name, table in (("precision", self.precision), ("recall", self.recall), ("accuracy", self.accuracy)):
            for k in self.ks:
                out.append(f"{name}\t{k}\t{table[k]!r}")
        return out


def evaluate_scorer(scorer: Scorer, queries: Sequence[EvalQuery], ks: Sequence[int] = (5, 10),
                    threads: int = 1) -> EvalReport:
    """Rank each query's candidates with ``scorer`` and average P/R/A@K."""
    ks = tuple(ks)
    usable = [q for q in queries if q.ground_truth]
    max_k = max(ks)

    def one(q: EvalQuery) -> QueryResult:
        cands = np.asarray(q.candidates, dtype=np.int64)
        ranked = [h for h, _ in rank_scores(scorer(q.user, q.video, cands), cands, max_k)]
        gt = set(q.ground_truth)
        return QueryResult(q.user, q.video, ranked, {k: len(gt.intersection(ranked[:k])) for k in ks}, len(gt))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(one, usable))
    else:
        rows = [one(q) for q in usable]

    def avg(fn):
        return {k: (float(np.mean([fn(r, k) for r in rows])) if rows else 0.0) for k in ks}

    return EvalReport(
        ks=ks,
        precision=avg(lambda r, k: r.hits[k] / k),
        recall=avg(lambda r, k: r.hits[k] / r.n_ground_truth),
        accuracy=avg(lambda r, k: 1.0 if r.hits[k] else 0.0),
        n_queries=len(rows),
        n_dropped=len(queries) - len(usable),
        rows=rows,
    )


class ModelScorer:
    """Scores candidates from precomputed fused user/hashtag representations."""

    def __init__(self, params: ModelParams, config: ModelConfig, user_reprs: np.ndarray,
                 hashtag_reprs: np.ndarray, features: np.ndarray):
        self.params = params
        self.config = config
        self.user_reprs = user_reprs
        self.hashtag_reprs = hashtag_reprs
        self.features = np.asarray(features, dtype=np.float64)

    @classmethod
    def from_graph(cls, params, config, graph: TripartiteGraph, features) -> "ModelScorer":
        trace = propagate(params, graph, features, config)
        return cls(params, config, trace.users, trace.hashtags, features)

    def __call__(self, user: int, video: int, candidates: np.ndarray) -> np.ndarray:
        return score_candidates(self.params, self.config, self.user_reprs[user], self.features[video],
                                self.hashtag_reprs[candidates])


def evaluate(params: ModelParams, config: ModelConfig, graph: TripartiteGraph, features: np.ndarray,
             queries: Sequence[EvalQuery], ks: Sequence[int] = (5, 10), threads: int = 1) -> EvalReport:
    return evaluate_scorer(ModelScorer.from_graph(params, config, graph, features), queries, ks, threads)
