"""GCN-PHR forward pass, hand-written backward pass and scoring.

Two code paths compute the same quantities:

* whole-graph functions (:func:`propagate`, :func:`propagate_backward`,
  :func:`score_batch`, :func:`score_batch_backward`) that vectorise message
  passing with the scatter/gather kernels and are used for training and
  evaluation;
* per-entity functions (:func:`user_pref_hashtags`, :func:`attention_weights`,
  :func:`hashtag_representation`, :func:`score`, ...) that follow one user or
  hashtag step by step with the small ops in :mod:`gcnphr.numerics`.

Layer-0 inputs are the learnable ID embeddings; the fused user and hashtag
vectors are the outputs of a single propagation layer.  With
``add_id_embedding`` the output layers see ID embedding + fused vector.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .graph import TripartiteGraph
from .numerics import (
    DTYPE,
    ShapeError,
    concat,
    dot,
    leaky_relu,
    leaky_relu_backward,
    linear,
    linear_backward,
    mean,
    softmax,
    vsum,
)


class Fusion(enum.Enum):
    NEURAL_NET = "nn"
    TRANSFORM_SUM = "sum"


class Variant(enum.Enum):
    FULL = "full"
    NO_ATTENTION = "no-attn"
    NO_USER_PREF_ON_HASHTAG = "no-user-on-hashtag"
    NO_HASHTAG_GUIDANCE_ON_USER = "no-hashtag-on-user"


class Aggregation(enum.Enum):
    SUM = "sum"
    MEAN = "mean"


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 64
    d_v: int = 16
    fusion: Fusion = Fusion.NEURAL_NET
    variant: Variant = Variant.FULL
    leaky_slope: float = 0.01
    aggregate_videos: Aggregation = Aggregation.SUM
    # output layers see ID embedding + propagated vector (layer combination)
    add_id_embedding: bool = True

    def __post_init__(self):
        if self.dim <= 0 or self.d_v <= 0:
            raise ValueError(f"dim and d_v must be positive, got {self.dim}, {self.d_v}")
        if not (0.0 < self.leaky_slope <= 1.0):
            raise ValueError(f"leaky_slope must be in (0, 1], got {self.leaky_slope}")

    @property
    def user_attention(self) -> bool:
        """Hashtags attend over the videos flowing into a user (alpha)."""
        return self.variant in (Variant.FULL, Variant.NO_USER_PREF_ON_HASHTAG)

    @property
    def hashtag_attention(self) -> bool:
        """Users attend over the videos flowing into a hashtag (beta)."""
        return self.variant in (Variant.FULL, Variant.NO_HASHTAG_GUIDANCE_ON_USER)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "d_v": self.d_v,
            "fusion": self.fusion.value,
            "variant": self.variant.value,
            "leaky_slope": self.leaky_slope,
            "aggregate_videos": self.aggregate_videos.value,
            "add_id_embedding": self.add_id_embedding,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            dim=int(d["dim"]),
            d_v=int(d["d_v"]),
            fusion=Fusion(d["fusion"]),
            variant=Variant(d["variant"]),
            leaky_slope=float(d["leaky_slope"]),
            aggregate_videos=Aggregation(d["aggregate_videos"]),
            add_id_embedding=bool(d.get("add_id_embedding", True)),
        )


# -- parameters -------------------------------------------------------------

def param_shapes(config: ModelConfig, n_users: int, n_hashtags: int) -> dict[str, tuple[int, ...]]:
    D, Dv = config.dim, config.d_v
    shapes: dict[str, tuple[int, ...]] = {
        "user_emb": (n_users, D),
        "hashtag_emb": (n_hashtags, D),
        # user side
        "W_h_to_u": (D, D),
        "W_attn_uh": (D, Dv),
        "w_g": (2 * D,),
        "b_g": (1,),
        "W_v_to_u": (D, Dv),
    }
    if config.fusion is Fusion.NEURAL_NET:
        shapes.update({"W_nn": (D, 2 * D), "b_nn": (D,)})
    else:
        shapes.update({"W_v_u_sum": (D, D), "W_h_u_sum": (D, D)})
    shapes.update({
        "W_u_to_h": (D, D),
        "W_attn_hv": (D, Dv),
        "w_g_h": (2 * D,),
        "b_g_h": (1,),
        "W_v_to_h": (D, Dv),
    })
    if config.fusion is Fusion.NEURAL_NET:
        shapes.update({"W_nn_h": (D, 2 * D), "b_nn_h": (D,)})
    else:
        shapes.update({"W_v_h_sum": (D, D), "W_u_h_sum": (D, D)})
    shapes.update({
        "W_v": (D, Dv),
        "W_u_v": (D, D),
        "b_v": (D,),
        "W_h": (D, D),
        "W_u_h": (D, D),
        "b_h": (D,),
    })
    return shapes


def _as_float(v) -> np.ndarray:
    a = np.asarray(v)
    if a.dtype.kind != "f":
        a = a.astype(DTYPE)
    return np.ascontiguousarray(a)


class ModelParams:
    """Ordered bundle of named float64 parameter blocks."""

    def __init__(self, blocks: dict[str, np.ndarray]):
        self.blocks = {k: _as_float(v) for k, v in blocks.items()}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.blocks[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        self.blocks[name] = _as_float(value)

    def __contains__(self, name: object) -> bool:
        return name in self.blocks

    def __iter__(self) -> Iterator[str]:
        return iter(self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def items(self):
        return self.blocks.items()

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.blocks.items()})

    def zeros_like(self) -> "ModelParams":
        return ModelParams({k: np.zeros_like(v) for k, v in self.blocks.items()})

    def squared_norm(self):
        """Sum of squares over all blocks, in the blocks' precision."""
        return sum(np.dot(v.ravel(), v.ravel()) for v in self.blocks.values())

    def astype(self, dtype) -> "ModelParams":
        return ModelParams({k: v.astype(dtype) for k, v in self.blocks.items()})

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.blocks.values())

    def equal(self, other: "ModelParams") -> bool:
        return list(self.blocks) == list(other.blocks) and all(
            np.array_equal(v, other.blocks[k]) for k, v in self.blocks.items()
        )


def init_params(
    config: ModelConfig,
    n_users: int,
    n_hashtags: int,
    rng: np.random.Generator | int = 0,
    std: float = 0.1,
) -> ModelParams:
    """Gaussian initialisation of every block, drawn in a fixed order."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return ModelParams({
        name: rng.normal(0.0, std, size=shape)
        for name, shape in param_shapes(config, n_users, n_hashtags).items()
    })


# -- whole-graph propagation ------------------------------------------------

@dataclass(frozen=True)
class _Side:
    """Parameter names and graph arrays describing one propagation side."""

    self_kind: str
    emb_other: str
    msg: str
    attn: str
    w_sim: str
    b_sim: str
    vid: str
    nn_w: str
    nn_b: str
    sum_vid: str
    sum_nbr: str


_USER_SIDE = _Side("user", "hashtag_emb", "W_h_to_u", "W_attn_uh", "w_g", "b_g", "W_v_to_u",
                   "W_nn", "b_nn", "W_v_u_sum", "W_h_u_sum")
_HASHTAG_SIDE = _Side("hashtag", "user_emb", "W_u_to_h", "W_attn_hv", "w_g_h", "b_g_h", "W_v_to_h",
                      "W_nn_h", "b_nn_h", "W_v_h_sum", "W_u_h_sum")


@dataclass
class SideTrace:
    """Intermediates of one side (user or hashtag) of the propagation layer."""

    nbr_msg: np.ndarray        # projected layer-0 embeddings of the other kind
    nbr_pre: np.ndarray        # mean of neighbour messages, before activation
    nbr: np.ndarray            # u^h (user side) / h^u (hashtag side)
    attn_proj: np.ndarray | None
    attn_scores: np.ndarray | None  # one per tagging triple
    attn: np.ndarray           # alpha / beta per triple (ones when disabled)
    edge_coef: np.ndarray      # summed attention per video edge
    edge_weight: np.ndarray    # coefficient actually applied (after mean scaling)
    vid_msg: np.ndarray        # projected video features
    vid_pre: np.ndarray
    vid: np.ndarray            # u^v / h^v
    fuse_in: np.ndarray | None
    fuse_pre: np.ndarray | None
    out: np.ndarray            # fused vector
    cold: np.ndarray           # bool mask, no neighbours of the other kind


@dataclass
class ForwardTrace:
    """``users`` / ``hashtags`` are the vectors the output layers consume."""

    user: SideTrace
    hashtag: SideTrace
    users: np.ndarray
    hashtags: np.ndarray

    @property
    def alpha(self) -> np.ndarray:
        return self.user.attn

    @property
    def beta(self) -> np.ndarray:
        return self.hashtag.attn


def _side_arrays(g: TripartiteGraph, side: _Side):
    a = g.arrays
    if side.self_kind == "user":
        return dict(
            n_self=g.n_users, n_other=g.n_hashtags,
            pair_self=a.pair_user, pair_other=a.pair_hashtag, nbr_count=a.user_hashtag_count,
            tri_other=a.tri_hashtag, tri_edge=a.tri_uv, n_edges=len(a.uv_user),
            edge_self=a.uv_user, edge_video=a.uv_video, edge_count=a.user_video_count,
        )
    return dict(
        n_self=g.n_hashtags, n_other=g.n_users,
        pair_self=a.pair_hashtag, pair_other=a.pair_user, nbr_count=a.hashtag_user_count,
        tri_other=a.tri_user, tri_edge=a.tri_hv, n_edges=len(a.hv_hashtag),
        edge_self=a.hv_hashtag, edge_video=a.hv_video, edge_count=a.hashtag_video_count,
    )


def _check_features(g: TripartiteGraph, features: np.ndarray, config: ModelConfig) -> None:
    if features.shape != (g.n_videos, config.d_v):
        raise ShapeError(f"features have shape {features.shape}, expected ({g.n_videos}, {config.d_v})")


def _side_forward(params, g, features, config, side: _Side, attention: bool) -> SideTrace:
    ar = _side_arrays(g, side)
    a = g.arrays
    slope, D = config.leaky_slope, config.dim
    emb_other = params[side.emb_other]
    n_pairs = len(a.pair_user)

    # neighbour messages, mean-aggregated
    nbr_msg = linear(params[side.msg], emb_other)
    counts = ar["nbr_count"][ar["pair_self"]].astype(features.dtype)
    w_mean = 1.0 / counts if counts.size else counts
    nbr_pre = kernels.scatter_rows(nbr_msg, ar["pair_other"], w_mean, ar["pair_self"], ar["n_self"])
    nbr = leaky_relu(nbr_pre, slope)

    # attention over the videos in each (user, hashtag) group
    n_tri = len(a.tri_video)
    if attention:
        w = params[side.w_sim]
        attn_proj = linear(params[side.attn], features)
        s = (emb_other @ w[:D])[ar["tri_other"]] + (attn_proj @ w[D:])[a.tri_video] + params[side.b_sim][0]
        attn = kernels.segment_softmax(np.ascontiguousarray(s), a.tri_pair, n_pairs)
    else:
        attn_proj, s = None, None
        attn = np.ones(n_tri, dtype=features.dtype)
    edge_coef = kernels.segment_sum(attn, ar["tri_edge"], ar["n_edges"])
    if config.aggregate_videos is Aggregation.MEAN:
        edge_weight = edge_coef / ar["edge_count"][ar["edge_self"]]
    else:
        edge_weight = edge_coef
    vid_msg = linear(params[side.vid], features)
    vid_pre = kernels.scatter_rows(vid_msg, ar["edge_video"], edge_weight, ar["edge_self"], ar["n_self"])
    vid = leaky_relu(vid_pre, slope)

    if config.fusion is Fusion.NEURAL_NET:
        fuse_in = concat(vid, nbr)
        fuse_pre = linear(params[side.nn_w], fuse_in, params[side.nn_b])
        out = leaky_relu(fuse_pre, slope)
    else:
        fuse_in = fuse_pre = None
        out = linear(params[side.sum_vid], vid) + linear(params[side.sum_nbr], nbr)

    cold = ar["nbr_count"] == 0
    if side.self_kind == "hashtag":
        out = np.where(cold[:, None], 0.0, out)
    return SideTrace(nbr_msg, nbr_pre, nbr, attn_proj, s, attn, edge_coef, edge_weight,
                     vid_msg, vid_pre, vid, fuse_in, fuse_pre, out, cold)


def _side_backward(params, g, features, config, side: _Side, attention: bool,
                   tr: SideTrace, grad_out: np.ndarray, grads: dict[str, np.ndarray]) -> None:
    ar = _side_arrays(g, side)
    a = g.arrays
    slope, D = config.leaky_slope, config.dim
    emb_other = params[side.emb_other]
    n_pairs = len(a.pair_user)
    if side.self_kind == "hashtag":
        grad_out = np.where(tr.cold[:, None], 0.0, grad_out)

    if config.fusion is Fusion.NEURAL_NET:
        g_pre = leaky_relu_backward(tr.fuse_pre, grad_out, slope)
        gW, g_in, gb = linear_backward(params[side.nn_w], tr.fuse_in, g_pre)
        grads[side.nn_w] += gW
        grads[side.nn_b] += gb
        g_vid, g_nbr = g_in[:, :D], g_in[:, D:]
    else:
        gW, g_vid, _ = linear_backward(params[side.sum_vid], tr.vid, grad_out)
        grads[side.sum_vid] += gW
        gW, g_nbr, _ = linear_backward(params[side.sum_nbr], tr.nbr, grad_out)
        grads[side.sum_nbr] += gW

    # video messages
    g_vid_pre = np.ascontiguousarray(leaky_relu_backward(tr.vid_pre, g_vid, slope))
    g_vid_msg = kernels.scatter_rows(g_vid_pre, ar["edge_self"], tr.edge_weight, ar["edge_video"], g.n_videos)
    gW, _, _ = linear_backward(params[side.vid], features, g_vid_msg)
    grads[side.vid] += gW
    if attention:
        g_weight = kernels.gather_dot(tr.vid_msg, ar["edge_video"], g_vid_pre, ar["edge_self"])
        if config.aggregate_videos is Aggregation.MEAN:
            g_weight = g_weight / ar["edge_count"][ar["edge_self"]]
        g_attn = np.ascontiguousarray(g_weight[ar["tri_edge"]])
        g_s = kernels.segment_softmax_backward(tr.attn, g_attn, a.tri_pair, n_pairs)
        w = params[side.w_sim]
        grads[side.b_sim][0] += g_s.sum()
        g_other_s = kernels.segment_sum(g_s, ar["tri_other"], ar["n_other"])
        g_proj_s = kernels.segment_sum(g_s, a.tri_video, g.n_videos)
        grads[side.w_sim][:D] += emb_other.T @ g_other_s
        grads[side.w_sim][D:] += tr.attn_proj.T @ g_proj_s
        grads[side.emb_other] += np.outer(g_other_s, w[:D])
        gW, _, _ = linear_backward(params[side.attn], features, np.outer(g_proj_s, w[D:]))
        grads[side.attn] += gW

    # neighbour messages
    g_nbr_pre = np.ascontiguousarray(leaky_relu_backward(tr.nbr_pre, g_nbr, slope))
    counts = ar["nbr_count"][ar["pair_self"]].astype(features.dtype)
    w_mean = 1.0 / counts if counts.size else counts
    g_msg = kernels.scatter_rows(g_nbr_pre, ar["pair_self"], w_mean, ar["pair_other"], ar["n_other"])
    gW, g_emb, _ = linear_backward(params[side.msg], emb_other, g_msg)
    grads[side.msg] += gW
    grads[side.emb_other] += g_emb


def propagate(params: ModelParams, graph: TripartiteGraph, features: np.ndarray,
              config: ModelConfig) -> ForwardTrace:
    """One propagation layer over the whole graph.

    Returns the trace; ``trace.users`` (N_u x D) and ``trace.hashtags``
    (N_h x D) are the fused representations.
    """
    features = _as_float(features)
    _check_features(graph, features, config)
    user = _side_forward(params, graph, features, config, _USER_SIDE, config.user_attention)
    hashtag = _side_forward(params, graph, features, config, _HASHTAG_SIDE, config.hashtag_attention)
    if config.add_id_embedding:
        return ForwardTrace(user, hashtag, params["user_emb"] + user.out, params["hashtag_emb"] + hashtag.out)
    return ForwardTrace(user, hashtag, user.out, hashtag.out)


def propagate_backward(params: ModelParams, graph: TripartiteGraph, features: np.ndarray,
                       config: ModelConfig, trace: ForwardTrace, grad_users: np.ndarray,
                       grad_hashtags: np.ndarray, grads: ModelParams | None = None) -> ModelParams:
    """Accumulate d(loss)/d(params) given gradients w.r.t. fused user/hashtag vectors."""
    features = _as_float(features)
    if grads is None:
        grads = params.zeros_like()
    if config.add_id_embedding:
        grads.blocks["user_emb"] += grad_users
        grads.blocks["hashtag_emb"] += grad_hashtags
    _side_backward(params, graph, features, config, _USER_SIDE, config.user_attention,
                   trace.user, grad_users, grads.blocks)
    _side_backward(params, graph, features, config, _HASHTAG_SIDE, config.hashtag_attention,
                   trace.hashtag, grad_hashtags, grads.blocks)
    return grads


# -- scoring ----------------------------------------------------------------

@dataclass
class ScoreCache:
    users: np.ndarray
    videos: np.ndarray
    hashtags: np.ndarray
    u: np.ndarray
    x: np.ndarray
    h: np.ndarray
    v_pre: np.ndarray
    v_bar: np.ndarray
    h_pre: np.ndarray
    h_bar: np.ndarray
    scores: np.ndarray = field(repr=False)


def score_batch(params: ModelParams, config: ModelConfig, user_reprs: np.ndarray,
                hashtag_reprs: np.ndarray, features: np.ndarray, users, videos, hashtags) -> ScoreCache:
    """Dot product of user-specific hashtag and video representations, per row."""
    users = np.asarray(users, dtype=np.int64)
    videos = np.asarray(videos, dtype=np.int64)
    hashtags = np.asarray(hashtags, dtype=np.int64)
    slope = config.leaky_slope
    u = user_reprs[users]
    x = _as_float(features)[videos]
    h = hashtag_reprs[hashtags]
    v_pre = linear(params["W_v"], x, params["b_v"]) + linear(params["W_u_v"], u)
    h_pre = linear(params["W_h"], h, params["b_h"]) + linear(params["W_u_h"], u)
    v_bar = leaky_relu(v_pre, slope)
    h_bar = leaky_relu(h_pre, slope)
    scores = np.einsum("ij,ij->i", h_bar, v_bar)
    return ScoreCache(users, videos, hashtags, u, x, h, v_pre, v_bar, h_pre, h_bar, scores)


def score_batch_backward(params: ModelParams, config: ModelConfig, cache: ScoreCache,
                         grad_scores: np.ndarray, n_users: int, n_hashtags: int,
                         grads: ModelParams):
    """Accumulates output-layer gradients into ``grads``.

    Returns ``(grad_user_reprs, grad_hashtag_reprs)`` for :func:`propagate_backward`.
    """
    slope = config.leaky_slope
    gs = _as_float(grad_scores)[:, None]
    g_vpre = leaky_relu_backward(cache.v_pre, gs * cache.h_bar, slope)
    g_hpre = leaky_relu_backward(cache.h_pre, gs * cache.v_bar, slope)
    gW, _, gb = linear_backward(params["W_v"], cache.x, g_vpre)
    grads.blocks["W_v"] += gW
    grads.blocks["b_v"] += gb
    gW, g_u, _ = linear_backward(params["W_u_v"], cache.u, g_vpre)
    grads.blocks["W_u_v"] += gW
    gW, g_h, gb = linear_backward(params["W_h"], cache.h, g_hpre)
    grads.blocks["W_h"] += gW
    grads.blocks["b_h"] += gb
    gW, g_u2, _ = linear_backward(params["W_u_h"], cache.u, g_hpre)
    grads.blocks["W_u_h"] += gW
    g_users = np.zeros((n_users, config.dim), dtype=gs.dtype)
    g_hashtags = np.zeros((n_hashtags, config.dim), dtype=gs.dtype)
    np.add.at(g_users, cache.users, g_u + g_u2)
    np.add.at(g_hashtags, cache.hashtags, g_h)
    return g_users, g_hashtags


# -- per-entity operations --------------------------------------------------

def message_hashtag_to_user(params: ModelParams, hashtag_vec: np.ndarray) -> np.ndarray:
    return linear(params["W_h_to_u"], hashtag_vec)


def message_user_to_hashtag(params: ModelParams, user_vec: np.ndarray) -> np.ndarray:
    return linear(params["W_u_to_h"], user_vec)


def user_pref_hashtags(params: ModelParams, graph: TripartiteGraph, user: int,
                       config: ModelConfig) -> np.ndarray:
    """u^h: activation of the mean hashtag message; zero for a user without hashtags."""
    msgs = [message_hashtag_to_user(params, params["hashtag_emb"][j]) for j in graph.hashtags_of_user[user]]
    return leaky_relu(mean(msgs, config.dim), config.leaky_slope)


def attention_score(params: ModelParams, hashtag_vec: np.ndarray, video_feature: np.ndarray) -> float:
    """Similarity layer: ``w_g . [h, W_attn v] + b_g``."""
    z = concat(hashtag_vec, linear(params["W_attn_uh"], video_feature))
    return dot(params["w_g"], z) + float(params["b_g"][0])


def hashtag_attention_score(params: ModelParams, user_vec: np.ndarray, video_feature: np.ndarray) -> float:
    z = concat(user_vec, linear(params["W_attn_hv"], video_feature))
    return dot(params["w_g_h"], z) + float(params["b_g_h"][0])


def attention_weights(params: ModelParams, graph: TripartiteGraph, features: np.ndarray,
                      user: int, hashtag: int) -> dict[int, float]:
    """alpha over the videos ``user`` tagged with ``hashtag``, keyed by video."""
    videos = graph.videos_of_user_hashtag.get((user, hashtag), ())
    if not videos:
        raise ValueError(f"user {user} never tagged a video with hashtag {hashtag}")
    h = params["hashtag_emb"][hashtag]
    w = softmax(np.array([attention_score(params, h, features[k]) for k in videos]))
    return dict(zip(videos, w.tolist()))


def hashtag_attention_weights(params: ModelParams, graph: TripartiteGraph, features: np.ndarray,
                              user: int, hashtag: int) -> dict[int, float]:
    """beta: how much of ``user``'s videos tagged ``hashtag`` flows into the hashtag."""
    videos = graph.videos_of_user_hashtag.get((user, hashtag), ())
    if not videos:
        raise ValueError(f"user {user} never tagged a video with hashtag {hashtag}")
    u = params["user_emb"][user]
    w = softmax(np.array([hashtag_attention_score(params, u, features[k]) for k in videos]))
    return dict(zip(videos, w.tolist()))


def message_video_to_user(params: ModelParams, graph: TripartiteGraph, features: np.ndarray,
                          user: int, video: int, config: ModelConfig) -> np.ndarray:
    tags = graph.hashtags_of_user_video.get((user, video), ())
    if config.user_attention:
        coef = sum(attention_weights(params, graph, features, user, j)[video] for j in tags)
    else:
        coef = float(len(tags))
    return coef * linear(params["W_v_to_u"], features[video])


def user_pref_videos(params: ModelParams, graph: TripartiteGraph, features: np.ndarray,
                     user: int, config: ModelConfig) -> np.ndarray:
    msgs = [message_video_to_user(params, graph, features, user, k, config) for k in graph.videos_of_user[user]]
    agg = mean(msgs, config.dim) if config.aggregate_videos is Aggregation.MEAN else vsum(msgs, config.dim)
    return leaky_relu(agg, config.leaky_slope)


def _fuse(params, vid, nbr, config, nn_w, nn_b, sum_vid, sum_nbr):
    if config.fusion is Fusion.NEURAL_NET:
        return leaky_relu(linear(params[nn_w], concat(vid, nbr), params[nn_b]), config.leaky_slope)
    return linear(params[sum_vid], vid) + linear(params[sum_nbr], nbr)


def fuse_user(params: ModelParams, u_h: np.ndarray, u_v: np.ndarray, config: ModelConfig) -> np.ndarray:
    return _fuse(params, u_v, u_h, config, "W_nn", "b_nn", "W_v_u_sum", "W_h_u_sum")


def fuse_hashtag(params: ModelParams, h_u: np.ndarray, h_v: np.ndarray, config: ModelConfig) -> np.ndarray:
    return _fuse(params, h_v, h_u, config, "W_nn_h", "b_nn_h", "W_v_h_sum", "W_u_h_sum")


def user_representation(params: ModelParams, graph: TripartiteGraph, features: np.ndarray,
                        user: int, config: ModelConfig) -> np.ndarray:
    """Fused user preference u_i (the propagated, layer-1 vector)."""
    return fuse_user(params, user_pref_hashtags(params, graph, user, config),
                     user_pref_videos(params, graph, features, user, config), config)


def user_output_input(params: ModelParams, graph: TripartiteGraph, features: np.ndarray,
                      user: int, config: ModelConfig) -> np.ndarray:
    """User vector fed to the output layers."""
    u = user_representation(params, graph, features, user, config)
    return params["user_emb"][user] + u if config.add_id_embedding else u


def hashtag_output_input(params: ModelParams, graph: TripartiteGraph, features: np.ndarray,
                         hashtag: int, config: ModelConfig) -> np.ndarray:
    """Hashtag vector fed to the output layers."""
    h = hashtag_representation(params, graph, features, hashtag, config)
    return params["hashtag_emb"][hashtag] + h if config.add_id_embedding else h


def hashtag_representation(params: ModelParams, graph: TripartiteGraph, features: np.ndarray,
                           hashtag: int, config: ModelConfig) -> np.ndarray:
    """Mirror of the user pipeline; an isolated hashtag maps to the zero vector."""
    users = graph.users_of_hashtag[hashtag]
    if not users:
        return np.zeros(config.dim, dtype=DTYPE)
    slope = config.leaky_slope
    h_u = leaky_relu(mean([message_user_to_hashtag(params, params["user_emb"][i]) for i in users],
                          config.dim), slope)
    msgs = []
    for k in graph.videos_of_hashtag[hashtag]:
        taggers = graph.users_tagging(hashtag, k)
        if config.hashtag_attention:
            coef = sum(hashtag_attention_weights(params, graph, features, i, hashtag)[k] for i in taggers)
        else:
            coef = float(len(taggers))
        msgs.append(coef * linear(params["W_v_to_h"], features[k]))
    agg = mean(msgs, config.dim) if config.aggregate_videos is Aggregation.MEAN else vsum(msgs, config.dim)
    return fuse_hashtag(params, h_u, leaky_relu(agg, slope), config)


def user_specific_video_repr(params: ModelParams, user_vec: np.ndarray, video_feature: np.ndarray,
                             config: ModelConfig) -> np.ndarray:
    pre = linear(params["W_v"], video_feature, params["b_v"]) + linear(params["W_u_v"], user_vec)
    return leaky_relu(pre, config.leaky_slope)


def user_specific_hashtag_repr(params: ModelParams, user_vec: np.ndarray, hashtag_vec: np.ndarray,
                               config: ModelConfig) -> np.ndarray:
    pre = linear(params["W_h"], hashtag_vec, params["b_h"]) + linear(params["W_u_h"], user_vec)
    return leaky_relu(pre, config.leaky_slope)


def _check_index(value: int, bound: int, what: str) -> None:
    if not (0 <= value < bound):
        raise IndexError(f"{what} index {value} out of range [0, {bound})")


def score(params: ModelParams, graph: TripartiteGraph, features: np.ndarray, user: int, video: int,
          hashtag: int, config: ModelConfig) -> float:
    _check_index(user, graph.n_users, "user")
    _check_index(video, len(features), "video")
    _check_index(hashtag, graph.n_hashtags, "hashtag")
    u = user_output_input(params, graph, features, user, config)
    h = hashtag_output_input(params, graph, features, hashtag, config)
    return dot(user_specific_hashtag_repr(params, u, h, config),
               user_specific_video_repr(params, u, features[video], config))


def rank_scores(scores: Sequence[float], candidates: Sequence[int], top_k: int | None = None) -> list[tuple[int, float]]:
    """Descending by score, ties by ascending hashtag index."""
    cands = np.asarray(candidates, dtype=np.int64)
    sc = np.asarray(scores, dtype=DTYPE)
    order = np.lexsort((cands, -sc))
    if top_k is not None:
        order = order[:top_k]
    return [(int(cands[n]), float(sc[n])) for n in order]


def score_candidates(params: ModelParams, config: ModelConfig, user_vec: np.ndarray,
                     video_feature: np.ndarray, hashtag_reprs: np.ndarray) -> np.ndarray:
    """Scores of one (user, video) against many hashtag representations."""
    v_bar = user_specific_video_repr(params, user_vec, video_feature, config)
    pre = linear(params["W_h"], hashtag_reprs, params["b_h"]) + linear(params["W_u_h"], user_vec)
    return leaky_relu(pre, config.leaky_slope) @ v_bar


def rank_hashtags(params: ModelParams, graph: TripartiteGraph, features: np.ndarray, user: int,
                  video: int, candidates: Sequence[int], top_k: int | None, config: ModelConfig,
                  trace: ForwardTrace | None = None) -> list[tuple[int, float]]:
    if len(candidates) == 0:
        raise ValueError("no candidate hashtags to rank")
    _check_index(user, graph.n_users, "user")
    _check_index(video, len(features), "video")
    if trace is None:
        trace = propagate(params, graph, features, config)
    cands = np.asarray(candidates, dtype=np.int64)
    scores = score_candidates(params, config, trace.users[user], np.asarray(features[video], dtype=DTYPE),
                              trace.hashtags[cands])
    return rank_scores(scores, cands, top_k)


def with_variant(config: ModelConfig, variant: Variant) -> ModelConfig:
    return replace(config, variant=variant)
