import numpy as np
import pytest
from hypothesis import given, strategies as st

from gcnphr.graph import GraphError, build_graph, degree_stats


@st.composite
def interaction_sets(draw):
    n_u, n_v, n_h = draw(st.integers(1, 5)), draw(st.integers(1, 6)), draw(st.integers(1, 5))
    uploader = draw(st.lists(st.integers(0, n_u - 1), min_size=n_v, max_size=n_v))
    uploads = [(u, v) for v, u in enumerate(uploader)]
    triples = draw(st.lists(st.tuples(st.integers(0, n_u - 1), st.integers(0, n_v - 1), st.integers(0, n_h - 1)),
                            max_size=25))
    return triples, uploads, n_u, n_v, n_h


@given(interaction_sets())
def test_adjacency_matches_brute_force(data):
    triples, uploads, n_u, n_v, n_h = data
    g = build_graph(triples, uploads, n_users=n_u, n_videos=n_v, n_hashtags=n_h)
    T = set(triples)
    for u in range(n_u):
        assert set(g.hashtags_of_user[u]) == {h for a, _, h in T if a == u}
        assert set(g.videos_of_user[u]) == {v for a, v, _ in T if a == u} | {v for a, v in uploads if a == u}
    for h in range(n_h):
        assert set(g.users_of_hashtag[h]) == {a for a, _, b in T if b == h}
        assert set(g.videos_of_hashtag[h]) == {v for _, v, b in T if b == h}
        for v in range(n_v):
            assert set(g.users_tagging(h, v)) == {a for a, c, b in T if b == h and c == v}
    for (u, h), vids in g.videos_of_user_hashtag.items():
        assert vids and set(vids) == {v for a, v, b in T if a == u and b == h}
    assert len(g.triples) == len(T)


@given(interaction_sets())
def test_rebuild_is_idempotent_and_order_free(data):
    triples, uploads, n_u, n_v, n_h = data
    g = build_graph(triples, uploads, n_users=n_u, n_videos=n_v, n_hashtags=n_h)
    again = build_graph(list(reversed(triples)) + triples, uploads[::-1], n_users=n_u, n_videos=n_v, n_hashtags=n_h)
    assert again == g
    assert build_graph(g.triples, uploads, n_users=n_u, n_videos=n_v, n_hashtags=n_h) == g


@given(interaction_sets())
def test_flat_arrays_are_consistent(data):
    triples, uploads, n_u, n_v, n_h = data
    g = build_graph(triples, uploads, n_users=n_u, n_videos=n_v, n_hashtags=n_h)
    a = g.arrays
    assert np.array_equal(a.pair_user[a.tri_pair], a.tri_user)
    assert np.array_equal(a.pair_hashtag[a.tri_pair], a.tri_hashtag)
    assert np.array_equal(a.uv_video[a.tri_uv], a.tri_video)
    assert np.array_equal(a.hv_hashtag[a.tri_hv], a.tri_hashtag)
    keys = list(zip(a.tri_user, a.tri_hashtag, a.tri_video))
    assert keys == sorted(keys)


def test_counts_default_to_observed_maximum():
    g = build_graph([(1, 2, 3)], [(1, 2)])
    assert (g.n_users, g.n_videos, g.n_hashtags) == (2, 3, 4)
    assert g.uploader_of_video == (-1, -1, 1)


def test_degree_stats_hand_count():
    g = build_graph([(0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 2)], [(0, 0), (1, 1), (1, 2)])
    s = degree_stats(g)
    assert (s["user_hashtags"].min, s["user_hashtags"].max) == (1, 2)
    assert s["user_hashtags"].mean == 1.5
    assert (s["user_videos"].min, s["user_videos"].mean, s["user_videos"].max) == (2, 2.0, 2)
    assert (s["hashtag_users"].min, s["hashtag_users"].max) == (1, 1)
    assert (s["hashtag_videos"].min, s["hashtag_videos"].max) == (1, 2)
    assert s["video_hashtags"].mean == pytest.approx(4 / 3)
    assert s["video_users"].min == 1


@pytest.mark.parametrize("triples,uploads,match", [
    ([(0, 0, 5)], [(0, 0)], "hashtag index 5"),
    ([(0, 1, 0)], [(0, 0)], "no upload record"),
    ([(0, 0, 0)], [(0, 0), (1, 0)], "two uploaders"),
    ([(-1, 0, 0)], [(0, 0)], "user index -1"),
])
def test_invalid_input_is_rejected(triples, uploads, match):
    with pytest.raises(GraphError, match=match):
        build_graph(triples, uploads, n_users=2, n_videos=2, n_hashtags=3)
