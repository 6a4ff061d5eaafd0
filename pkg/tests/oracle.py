"""Straight-line reference forward pass over raw triples, in plain Python floats.

Shares no code with the package: adjacency, attention, fusion and scoring
are recomputed from the triple list with explicit loops.
"""

import math


def _mv(W, x):
    return [sum(w * xi for w, xi in zip(row, x)) for row in W]


def _add(*vs):
    return [sum(t) for t in zip(*vs)]


def _scale(c, v):
    return [c * x for x in v]


def _lrelu(v, slope):
    return [x if x > 0 else slope * x for x in v]


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _mean(vs, dim):
    if not vs:
        return [0.0] * dim
    return _scale(1.0 / len(vs), _add(*vs)) if len(vs) > 1 else list(vs[0])


def _sum(vs, dim):
    return _add(*vs) if len(vs) > 1 else (list(vs[0]) if vs else [0.0] * dim)


def _softmax(xs):
    m = max(xs)
    e = [math.exp(x - m) for x in xs]
    s = sum(e)
    return [x / s for x in e]


def forward(P, triples, uploads, n_users, n_hashtags, X, dim, fusion="nn", variant="full",
            aggregate="sum", slope=0.01, add_id=True):
    """Return (user vectors, hashtag vectors) fed to the output layers."""
    P = {k: v.tolist() for k, v in P.items()}
    X = [list(map(float, row)) for row in X]
    triples = sorted(set(map(tuple, triples)))
    user_att = variant in ("full", "no-user-on-hashtag")
    tag_att = variant in ("full", "no-hashtag-on-user")
    agg = _sum if aggregate == "sum" else _mean

    def V_ij(i, j):
        return sorted({k for (a, k, b) in triples if a == i and b == j})

    def H_ik(i, k):
        return sorted({b for (a, c, b) in triples if a == i and c == k})

    def fuse(vid, nbr, nn_w, nn_b, s_vid, s_nbr):
        if fusion == "nn":
            return _lrelu(_add(_mv(P[nn_w], vid + nbr), P[nn_b]), slope)
        return _add(_mv(P[s_vid], vid), _mv(P[s_nbr], nbr))

    def alpha(i, j, k):
        ks = V_ij(i, j)
        e = P["hashtag_emb"][j]
        s = [_dot(P["w_g"], e + _mv(P["W_attn_uh"], X[q])) + P["b_g"][0] for q in ks]
        return _softmax(s)[ks.index(k)]

    def beta(i, j, k):
        ks = V_ij(i, j)
        p = P["user_emb"][i]
        s = [_dot(P["w_g_h"], p + _mv(P["W_attn_hv"], X[q])) + P["b_g_h"][0] for q in ks]
        return _softmax(s)[ks.index(k)]

    users = []
    for i in range(n_users):
        H_i = sorted({b for (a, _, b) in triples if a == i})
        V_i = sorted({k for (a, k, _) in triples if a == i} | {k for (a, k) in uploads if a == i})
        u_h = _lrelu(_mean([_mv(P["W_h_to_u"], P["hashtag_emb"][j]) for j in H_i], dim), slope)
        msgs = []
        for k in V_i:
            tags = H_ik(i, k)
            c = sum(alpha(i, j, k) for j in tags) if user_att else float(len(tags))
            msgs.append(_scale(c, _mv(P["W_v_to_u"], X[k])))
        u_v = _lrelu(agg(msgs, dim), slope)
        u = fuse(u_v, u_h, "W_nn", "b_nn", "W_v_u_sum", "W_h_u_sum")
        users.append(_add(P["user_emb"][i], u) if add_id else u)

    hashtags = []
    for j in range(n_hashtags):
        U_j = sorted({a for (a, _, b) in triples if b == j})
        if not U_j:
            h = [0.0] * dim
        else:
            V_j = sorted({k for (_, k, b) in triples if b == j})
            h_u = _lrelu(_mean([_mv(P["W_u_to_h"], P["user_emb"][i]) for i in U_j], dim), slope)
            msgs = []
            for k in V_j:
                taggers = sorted({a for (a, c, b) in triples if b == j and c == k})
                c = sum(beta(i, j, k) for i in taggers) if tag_att else float(len(taggers))
                msgs.append(_scale(c, _mv(P["W_v_to_h"], X[k])))
            h_v = _lrelu(agg(msgs, dim), slope)
            h = fuse(h_v, h_u, "W_nn_h", "b_nn_h", "W_v_h_sum", "W_u_h_sum")
        hashtags.append(_add(P["hashtag_emb"][j], h) if add_id else h)
    return users, hashtags


def score(P, u, h, x, slope=0.01):
    P = {k: v.tolist() for k, v in P.items()}
    x = list(map(float, x))
    v_bar = _lrelu(_add(_mv(P["W_v"], x), _mv(P["W_u_v"], u), P["b_v"]), slope)
    h_bar = _lrelu(_add(_mv(P["W_h"], h), _mv(P["W_u_h"], u), P["b_h"]), slope)
    return _dot(h_bar, v_bar)
