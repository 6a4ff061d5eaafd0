"""Small dense linear-algebra toolkit with paired forward/backward functions.

Every ``foo`` has a ``foo_backward`` that takes the upstream gradient and
returns gradients for the inputs.  Matrices and vectors are plain float64
numpy arrays.  ``linear`` and ``leaky_relu`` accept either a single vector or
a stack of row vectors, which lets the model reuse them for whole-graph
batches.
"""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    pass


def as_vector(x) -> np.ndarray:
    return np.asarray(x, dtype=DTYPE).reshape(-1)


def as_matrix(x) -> np.ndarray:
    a = np.asarray(x, dtype=DTYPE)
    if a.ndim != 2:
        raise ShapeError(f"expected a matrix, got shape {a.shape}")
    return a


# -- linear -----------------------------------------------------------------

def linear(W: np.ndarray, x: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """``W @ x + b``; ``x`` may be ``(cols,)`` or ``(n, cols)``."""
    if W.ndim != 2 or x.shape[-1] != W.shape[1]:
        raise ShapeError(f"linear: W{W.shape} incompatible with x{x.shape}")
    y = x @ W.T
    if b is not None:
        if b.shape != (W.shape[0],):
            raise ShapeError(f"linear: bias {b.shape} does not match W{W.shape}")
        y = y + b
    return y


def linear_backward(W: np.ndarray, x: np.ndarray, grad_y: np.ndarray):
    """Returns ``(grad_W, grad_x, grad_b)``; batched inputs are summed over rows."""
    if x.ndim == 1:
        return np.outer(grad_y, x), W.T @ grad_y, grad_y.copy()
    return grad_y.T @ x, grad_y @ W, grad_y.sum(axis=0)


# -- activations ------------------------------------------------------------

def leaky_relu(x: np.ndarray, slope: float = 0.01) -> np.ndarray:
    return np.where(x > 0, x, slope * x)


def leaky_relu_backward(x: np.ndarray, grad_y: np.ndarray, slope: float = 0.01) -> np.ndarray:
    # subgradient at exactly 0 is ``slope``
    return np.where(x > 0, grad_y, slope * grad_y)


def softmax(scores: np.ndarray) -> np.ndarray:
    s = as_vector(scores)
    if s.size == 0:
        raise ShapeError("softmax of an empty vector")
    e = np.exp(s - s.max())
    return e / e.sum()


def softmax_backward(weights: np.ndarray, grad_w: np.ndarray) -> np.ndarray:
    return weights * (grad_w - np.dot(weights, grad_w))


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def sigmoid_backward(x: float, grad_y: float) -> float:
    s = sigmoid(x)
    return grad_y * s * (1.0 - s)


def log_sigmoid(x: float) -> float:
    """``ln(sigmoid(x))`` without overflow for large ``|x|``."""
    return -np.logaddexp(0.0, -x)


# -- reductions -------------------------------------------------------------

def dot(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ShapeError(f"dot: shapes {a.shape} and {b.shape} differ")
    return float(np.dot(a, b))


def dot_backward(a: np.ndarray, b: np.ndarray, grad_y: float):
    return grad_y * b, grad_y * a


def mean(vectors: Sequence[np.ndarray], dim: int) -> np.ndarray:
    if len(vectors) == 0:
        return np.zeros(dim, dtype=DTYPE)
    return np.sum(vectors, axis=0) / len(vectors)


def mean_backward(n: int, grad_y: np.ndarray) -> list[np.ndarray]:
    return [grad_y / n for _ in range(n)]


def vsum(vectors: Sequence[np.ndarray], dim: int) -> np.ndarray:
    if len(vectors) == 0:
        return np.zeros(dim, dtype=DTYPE)
    return np.sum(vectors, axis=0)


def vsum_backward(n: int, grad_y: np.ndarray) -> list[np.ndarray]:
    return [grad_y.copy() for _ in range(n)]


def concat(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.concatenate([a, b], axis=-1)


def concat_backward(len_a: int, grad_y: np.ndarray):
    return grad_y[..., :len_a], grad_y[..., len_a:]


# -- gradient oracle --------------------------------------------------------

def finite_difference_check(
    f: Callable[[Mapping[str, np.ndarray]], float],
    params: Mapping[str, np.ndarray],
    analytic: Mapping[str, np.ndarray],
    eps: float = 1e-5,
) -> float:
    """Max relative error between ``analytic`` and central differences of ``f``.

    ``params`` is perturbed in place one coordinate at a time and restored.
    Relative error per coordinate is ``|a - n| / max(1e-8, |a| + |n|)``.
    """
    worst = 0.0
    f0 = f(params)
    if not np.isfinite(f0):
        raise FloatingPointError("objective is not finite at the base point")
    for name, arr in params.items():
        grad = np.asarray(analytic[name])
        if grad.shape != arr.shape:
            raise ShapeError(f"gradient for {name!r} has shape {grad.shape}, expected {arr.shape}")
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for n in range(flat.size):
            orig = flat[n]
            flat[n] = orig + eps
            fp = f(params)
            flat[n] = orig - eps
            fm = f(params)
            flat[n] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise FloatingPointError(f"objective not finite when perturbing {name}[{n}]")
            numeric = (fp - fm) / (2.0 * eps)
            err = abs(gflat[n] - numeric) / max(1e-8, abs(gflat[n]) + abs(numeric))
            worst = max(worst, err)
    return worst
