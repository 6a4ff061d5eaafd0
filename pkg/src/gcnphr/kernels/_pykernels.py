"""Pure numpy versions of the compiled kernels (same signatures).

These also accept ``np.longdouble`` arrays, which the gradient checker uses.
"""

import numpy as np


def scatter_rows(table, idx, weight, seg, n_out):
    """``out[seg[p]] += weight[p] * table[idx[p]]``."""
    out = np.zeros((n_out, table.shape[1]), dtype=np.result_type(table, weight))
    np.add.at(out, seg, weight[:, None] * table[idx])
    return out


def gather_dot(a, ia, b, ib):
    """``out[p] = a[ia[p]] . b[ib[p]]``."""
    return np.einsum("ij,ij->i", a[ia], b[ib])


def segment_sum(values, seg, n_out):
    out = np.zeros(n_out, dtype=values.dtype)
    np.add.at(out, seg, values)
    return out


def segment_softmax(scores, seg, n_out):
    mx = np.full(n_out, -np.inf, dtype=scores.dtype)
    np.maximum.at(mx, seg, scores)
    e = np.exp(scores - mx[seg])
    return e / segment_sum(e, seg, n_out)[seg]


def segment_softmax_backward(weights, grad, seg, n_out):
    inner = segment_sum(weights * grad, seg, n_out)
    return weights * (grad - inner[seg])
