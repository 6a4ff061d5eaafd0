import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from gcnphr.baselines import PopularityScorer, train_user_hashtag_cf
from gcnphr.data_io import SynthConfig, generate_synthetic
from gcnphr.evaluation import (
    EvalQuery, SplitError, accuracy_at_k, build_queries, evaluate_scorer, precision_at_k, random_recall_at_k,
    recall_at_k, split,
)
from gcnphr.training import TrainConfig


def _triples(rng, n=200):
    return sorted({(int(rng.integers(12)), int(rng.integers(60)), int(rng.integers(9))) for _ in range(n)})


def test_split_partitions_by_user_video_pair():
    tri = _triples(np.random.default_rng(0))
    s = split(tri, (0.6, 0.2, 0.2), seed=1)
    parts = [s.train, s.validation, s.test]
    assert sorted(t for p in parts for t in p) == tri
    pair_sets = [{(u, v) for u, v, _ in p} for p in parts]
    assert not (pair_sets[0] & pair_sets[1]) and not (pair_sets[0] & pair_sets[2]) and not (pair_sets[1] & pair_sets[2])
    train_users = {u for u, _, _ in s.train}
    assert all(u in train_users for u, _, _ in s.validation + s.test)
    assert split(tri, (0.6, 0.2, 0.2), seed=1) == s
    assert split(tri, (0.6, 0.2, 0.2), seed=2) != s


def test_split_moves_pairs_of_unseen_users():
    tri = [(0, v, 0) for v in range(8)] + [(1, 100, 0)]
    moved = []
    for seed in range(20):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            s = split(tri, (0.5, 0.25, 0.25), seed)
        assert (1, 100, 0) in s.train
        assert bool(caught) == (s.moved_pairs > 0)
        moved.append(s.moved_pairs)
    assert any(moved)  # user 1's only pair was drawn into a held-out part at least once


def test_split_errors():
    with pytest.raises(SplitError, match="at least 3"):
        split([(0, 0, 0), (0, 1, 0)])
    with pytest.raises(SplitError, match="ratios"):
        split(_triples(np.random.default_rng(0)), (0.5, 0.5, 0.5))


def test_queries_group_ground_truth_and_exclude_it_from_negatives():
    held = [(0, 1, 2), (0, 1, 5), (3, 4, 0)]
    qs = build_queries(held, 50, n_neg=10, seed=0)
    assert [(q.user, q.video, q.ground_truth) for q in qs] == [(0, 1, (2, 5)), (3, 4, (0,))]
    for q in qs:
        assert q.n_negatives == 10 and set(q.ground_truth) <= set(q.candidates)
    small = build_queries(held, 6, n_neg=1000)
    assert small[0].candidates == tuple(range(6))
    assert build_queries(held, 50, 10, seed=0) == qs


def test_negative_sampling_is_uniform():
    counts = np.zeros(20)
    for seed in range(400):
        (q,) = build_queries([(0, 0, 7)], 20, n_neg=5, seed=seed)
        for h in q.candidates:
            if h != 7:
                counts[h] += 1
    assert counts[7] == 0
    assert stats.chisquare(np.delete(counts, 7)).pvalue > 1e-3


def _brute(ranked, gt, k):
    top = ranked[:k]
    hits = sum(1 for h in top if h in gt)
    return hits / k, hits / len(gt), float(hits > 0)


@given(st.permutations(list(range(15))), st.sets(st.integers(0, 14), min_size=1, max_size=6),
       st.sampled_from([1, 5, 10, 20]))
def test_metrics_match_brute_force(ranked, gt, k):
    assert (precision_at_k(ranked, gt, k), recall_at_k(ranked, gt, k), accuracy_at_k(ranked, gt, k)) == \
        _brute(ranked, gt, k)


def test_metric_errors():
    with pytest.raises(ValueError):
        recall_at_k([1, 2], [], 5)
    with pytest.raises(ValueError):
        precision_at_k([1, 2], [1], 0)


def _queries(rng, n=30, n_h=40):
    out = []
    for _ in range(n):
        gt = tuple(sorted(rng.choice(n_h, size=int(rng.integers(1, 7)), replace=False).tolist()))
        out.append(EvalQuery(int(rng.integers(5)), int(rng.integers(9)), gt, tuple(range(n_h))))
    return out


def test_perfect_and_reversed_scorers_hit_closed_forms():
    qs = _queries(np.random.default_rng(0))
    truth = {}
    for q in qs:
        truth.setdefault((q.user, q.video), q.ground_truth)
    qs = [q for q in qs if truth[(q.user, q.video)] == q.ground_truth]

    def perfect(u, v, cands):
        return np.isin(cands, truth[(u, v)]).astype(float)

    rep = evaluate_scorer(perfect, qs, (5, 10))
    for k in (5, 10):
        assert rep.precision[k] == pytest.approx(np.mean([min(len(q.ground_truth), k) / k for q in qs]), abs=1e-15)
        assert rep.recall[k] == pytest.approx(np.mean([min(len(q.ground_truth), k) / len(q.ground_truth) for q in qs]))
        assert rep.accuracy[k] == 1.0
    worst = evaluate_scorer(lambda u, v, c: -perfect(u, v, c), qs, (5,))
    assert worst.recall[5] == 0.0 and worst.accuracy[5] == 0.0


def test_report_lines_and_threads():
    qs = _queries(np.random.default_rng(1))

    def scorer(u, v, c):
        return np.sin(c * (u + 1.0) + v)

    one = evaluate_scorer(scorer, qs, (5, 10))
    many = evaluate_scorer(scorer, qs, (5, 10), threads=4)
    assert one.lines() == many.lines()
    assert [ln.split("\t")[:2] for ln in one.lines()] == [[m, k] for m in ("precision", "recall", "accuracy")
                                                          for k in ("5", "10")]


def test_random_recall_formula():
    qs = [EvalQuery(0, 0, (1,), tuple(range(40))), EvalQuery(0, 1, (1, 2), tuple(range(4)))]
    assert random_recall_at_k(qs, 5) == pytest.approx((5 / 40 + 1.0) / 2)


def test_baselines_beat_random_on_planted_data():
    ds = generate_synthetic(SynthConfig(seed=0))
    s = split(ds.interactions.triples, seed=0)
    g = ds.interactions.graph(s.train)
    qs = build_queries(s.test, g.n_hashtags, 1000, seed=1)
    rand = random_recall_at_k(qs, 5)
    pop = evaluate_scorer(PopularityScorer(g), qs, (5,)).recall[5]
    cf = train_user_hashtag_cf(g, 16, TrainConfig(learning_rate=0.5, epochs=100, seed=0))
    assert pop > rand
    assert evaluate_scorer(cf, qs, (5,)).recall[5] > 2 * rand
