"""Tripartite user / hashtag / micro-video interaction graph.

The graph is built once from ``(user, video, hashtag)`` tagging triples plus
``(user, video)`` upload records and is immutable afterwards.  All neighbour
lists are sorted so that iteration order (and therefore every floating point
reduction downstream) is deterministic.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np


class GraphError(ValueError):
    """Raised when triples or uploads violate the graph contract."""


class EntityKind(enum.Enum):
    USER = "user"
    HASHTAG = "hashtag"
    VIDEO = "video"


class EntityIndex(NamedTuple):
    kind: EntityKind
    index: int


class TaggingTriple(NamedTuple):
    """User ``user`` tagged video ``video`` with hashtag ``hashtag``."""

    user: int
    video: int
    hashtag: int


@dataclass(frozen=True)
class GraphArrays:
    """Flat index arrays used by the vectorised forward/backward pass.

    ``pair_*`` enumerate the distinct user-hashtag edges; they double as the
    softmax groups of both attention sides since each group is "videos that
    user i tagged with hashtag j".  ``tri_*`` enumerate tagging triples sorted
    by (user, hashtag, video).  ``uv_*`` are user-video edges (uploads
    included) and ``hv_*`` hashtag-video edges.
    """

    pair_user: np.ndarray
    pair_hashtag: np.ndarray
    tri_user: np.ndarray
    tri_video: np.ndarray
    tri_hashtag: np.ndarray
    tri_pair: np.ndarray
    tri_uv: np.ndarray
    tri_hv: np.ndarray
    uv_user: np.ndarray
    uv_video: np.ndarray
    hv_hashtag: np.ndarray
    hv_video: np.ndarray
    user_hashtag_count: np.ndarray
    user_video_count: np.ndarray
    hashtag_user_count: np.ndarray
    hashtag_video_count: np.ndarray


@dataclass(frozen=True)
class TripartiteGraph:
    n_users: int
    n_hashtags: int
    n_videos: int
    triples: tuple[TaggingTriple, ...]
    hashtags_of_user: tuple[tuple[int, ...], ...]
    videos_of_user: tuple[tuple[int, ...], ...]
    users_of_hashtag: tuple[tuple[int, ...], ...]
    videos_of_hashtag: tuple[tuple[int, ...], ...]
    videos_of_user_hashtag: dict[tuple[int, int], tuple[int, ...]] = field(repr=False)
    hashtags_of_user_video: dict[tuple[int, int], tuple[int, ...]] = field(repr=False)
    uploader_of_video: tuple[int, ...] = field(repr=False)

    @cached_property
    def arrays(self) -> GraphArrays:
        return _flatten(self)

    def users_tagging(self, hashtag: int, video: int) -> tuple[int, ...]:
        """Users that tagged ``video`` with ``hashtag``."""
        return tuple(
            u for u in self.users_of_hashtag[hashtag]
            if hashtag in self.hashtags_of_user_video.get((u, video), ())
        )


def _check_index(value: int, bound: int, what: str, ctx: object) -> None:
    if not (0 <= value < bound):
        raise GraphError(f"{what} index {value} out of range [0, {bound}) in {ctx!r}")


def build_graph(
    triples: Iterable[tuple[int, int, int]],
    uploads: Iterable[tuple[int, int]],
    n_users: int | None = None,
    n_hashtags: int | None = None,
    n_videos: int | None = None,
) -> TripartiteGraph:
    """Build the tripartite graph.

    Counts default to ``max index + 1`` of what is observed.  Passing them
    explicitly lets callers keep cold entities (present in the vocabulary but
    without training edges) inside the index space.
    """
    tri = sorted({TaggingTriple(int(u), int(v), int(h)) for u, v, h in triples})
    ups = sorted({(int(u), int(v)) for u, v in uploads})

    if n_users is None:
        n_users = 1 + max([t.user for t in tri] + [u for u, _ in ups], default=-1)
    if n_videos is None:
        n_videos = 1 + max([t.video for t in tri] + [v for _, v in ups], default=-1)
    if n_hashtags is None:
        n_hashtags = 1 + max([t.hashtag for t in tri], default=-1)

    for t in tri:
        _check_index(t.user, n_users, "user", t)
        _check_index(t.video, n_videos, "video", t)
        _check_index(t.hashtag, n_hashtags, "hashtag", t)

    uploader: dict[int, int] = {}
    for u, v in ups:
        _check_index(u, n_users, "user", (u, v))
        _check_index(v, n_videos, "video", (u, v))
        if v in uploader and uploader[v] != u:
            raise GraphError(f"video {v} has two uploaders: {uploader[v]} and {u}")
        uploader[v] = u
    for t in tri:
        if t.video not in uploader:
            raise GraphError(f"video {t.video} in triple {t!r} has no upload record")

    h_of_u: list[set[int]] = [set() for _ in range(n_users)]
    v_of_u: list[set[int]] = [set() for _ in range(n_users)]
    u_of_h: list[set[int]] = [set() for _ in range(n_hashtags)]
    v_of_h: list[set[int]] = [set() for _ in range(n_hashtags)]
    v_of_uh: dict[tuple[int, int], set[int]] = defaultdict(set)
    h_of_uv: dict[tuple[int, int], set[int]] = defaultdict(set)
    for u, v, h in tri:
        h_of_u[u].add(h)
        v_of_u[u].add(v)
        u_of_h[h].add(u)
        v_of_h[h].add(v)
        v_of_uh[(u, h)].add(v)
        h_of_uv[(u, v)].add(h)
    for u, v in ups:
        v_of_u[u].add(v)

    def frozen(sets):
        return tuple(tuple(sorted(s)) for s in sets)

    return TripartiteGraph(
        n_users=n_users,
        n_hashtags=n_hashtags,
        n_videos=n_videos,
        triples=tuple(tri),
        hashtags_of_user=frozen(h_of_u),
        videos_of_user=frozen(v_of_u),
        users_of_hashtag=frozen(u_of_h),
        videos_of_hashtag=frozen(v_of_h),
        videos_of_user_hashtag={k: tuple(sorted(s)) for k, s in sorted(v_of_uh.items())},
        hashtags_of_user_video={k: tuple(sorted(s)) for k, s in sorted(h_of_uv.items())},
        uploader_of_video=tuple(uploader.get(v, -1) for v in range(n_videos)),
    )


def _flatten(g: TripartiteGraph) -> GraphArrays:
    i64 = np.int64
    pairs = [(u, h) for u in range(g.n_users) for h in g.hashtags_of_user[u]]
    pair_id = {p: n for n, p in enumerate(pairs)}
    uv = [(u, v) for u in range(g.n_users) for v in g.videos_of_user[u]]
    uv_id = {p: n for n, p in enumerate(uv)}
    hv = [(h, v) for h in range(g.n_hashtags) for v in g.videos_of_hashtag[h]]
    hv_id = {p: n for n, p in enumerate(hv)}

    tri = sorted(g.triples, key=lambda t: (t.user, t.hashtag, t.video))

    def col(rows, n):
        return np.array([r[n] for r in rows], dtype=i64).reshape(-1)

    return GraphArrays(
        pair_user=col(pairs, 0),
        pair_hashtag=col(pairs, 1),
        tri_user=col(tri, 0),
        tri_video=col(tri, 1),
        tri_hashtag=col(tri, 2),
        tri_pair=np.array([pair_id[(t.user, t.hashtag)] for t in tri], dtype=i64),
        tri_uv=np.array([uv_id[(t.user, t.video)] for t in tri], dtype=i64),
        tri_hv=np.array([hv_id[(t.hashtag, t.video)] for t in tri], dtype=i64),
        uv_user=col(uv, 0),
        uv_video=col(uv, 1),
        hv_hashtag=col(hv, 0),
        hv_video=col(hv, 1),
        user_hashtag_count=np.array([len(s) for s in g.hashtags_of_user], dtype=i64),
        user_video_count=np.array([len(s) for s in g.videos_of_user], dtype=i64),
        hashtag_user_count=np.array([len(s) for s in g.users_of_hashtag], dtype=i64),
        hashtag_video_count=np.array([len(s) for s in g.videos_of_hashtag], dtype=i64),
    )


@dataclass(frozen=True)
class DegreeSummary:
    min: int
    mean: float
    max: int


def _summary(counts: list[int]) -> DegreeSummary:
    if not counts:
        return DegreeSummary(0, 0.0, 0)
    return DegreeSummary(min(counts), sum(counts) / len(counts), max(counts))


def degree_stats(g: TripartiteGraph) -> dict[str, DegreeSummary]:
    """Min/mean/max neighbour counts for every (node kind, neighbour kind)."""
    video_users = [0] * g.n_videos
    for v, u in enumerate(g.uploader_of_video):
        if u >= 0:
            video_users[v] = 1
    video_hashtags: list[set[int]] = [set() for _ in range(g.n_videos)]
    for t in g.triples:
        video_hashtags[t.video].add(t.hashtag)
    return {
        "user_hashtags": _summary([len(s) for s in g.hashtags_of_user]),
        "user_videos": _summary([len(s) for s in g.videos_of_user]),
        "hashtag_users": _summary([len(s) for s in g.users_of_hashtag]),
        "hashtag_videos": _summary([len(s) for s in g.videos_of_hashtag]),
        "video_users": _summary(video_users),
        "video_hashtags": _summary([len(s) for s in video_hashtags]),
    }
