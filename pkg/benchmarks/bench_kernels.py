"""Compiled vs numpy kernels, alone and inside one full training step.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--dim 64]

Inputs come from the default planted synthetic dataset (50 users, 500
videos, 40 hashtags), so sizes match a realistic training run.
"""

import argparse
import contextlib
import timeit
import warnings

import numpy as np

from gcnphr import kernels
from gcnphr.data_io import SynthConfig, generate_synthetic
from gcnphr.evaluation import split
from gcnphr.model import ModelConfig, init_params
from gcnphr.training import TrainConfig, epoch_triplets, step

NAMES = ("scatter_rows", "gather_dot", "segment_sum", "segment_softmax", "segment_softmax_backward")


@contextlib.contextmanager
def backend(module):
    saved = {n: getattr(kernels, n) for n in NAMES}
    for n in NAMES:
        setattr(kernels, n, getattr(module, n))
    try:
        yield
    finally:
        for n, f in saved.items():
            setattr(kernels, n, f)


def kernel_cases(g, dim, rng):
    a = g.arrays
    n_tri, n_uv = len(a.tri_user), len(a.uv_user)
    table = rng.normal(size=(g.n_hashtags, dim))
    vids = rng.normal(size=(g.n_videos, dim))
    per_user = rng.normal(size=(g.n_users, dim))
    scores = rng.normal(size=n_tri)
    attn = kernels.python_backend.segment_softmax(scores, a.tri_pair, len(a.pair_user))
    return {
        "scatter_rows": (table, a.pair_hashtag, rng.random(len(a.pair_user)), a.pair_user, g.n_users),
        "gather_dot": (vids, a.uv_video, per_user, a.uv_user),
        "segment_sum": (rng.random(n_tri), a.tri_uv, n_uv),
        "segment_softmax": (scores, a.tri_pair, len(a.pair_user)),
        "segment_softmax_backward": (attn, rng.normal(size=n_tri), a.tri_pair, len(a.pair_user)),
    }


def best_of(fn, repeat):
    number = 5
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--dim", type=int, default=64)
    args = ap.parse_args(argv)

    if kernels.compiled_backend is None:
        print("compiled extension not built; only the numpy backend is available")
    impls = [("numpy", kernels.python_backend)]
    if kernels.compiled_backend is not None:
        impls.append(("cython", kernels.compiled_backend))

    ds = generate_synthetic(SynthConfig())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        parts = split(ds.interactions.triples, seed=0)
    g = ds.interactions.graph(parts.train)
    feats = ds.feature_matrix
    rng = np.random.default_rng(0)
    cases = kernel_cases(g, args.dim, rng)

    print(f"{'operation':<28}" + "".join(f"{name + ' (us)':>16}" for name, _ in impls) + f"{'speedup':>10}")
    for op, inputs in cases.items():
        times = [best_of(lambda: getattr(m, op)(*inputs), args.repeat) * 1e6 for _, m in impls]
        speed = f"{times[0] / times[-1]:.1f}x" if len(times) > 1 else "-"
        print(f"{op:<28}" + "".join(f"{t:>16.1f}" for t in times) + f"{speed:>10}")

    cfg = ModelConfig(dim=args.dim, d_v=feats.shape[1])
    params = init_params(cfg, g.n_users, g.n_hashtags, 0)
    batch = epoch_triplets(g, np.random.default_rng(1))[:256]
    tc = TrainConfig(learning_rate=0.1)
    times = []
    for _, m in impls:
        with backend(m):
            times.append(best_of(lambda: step(params, batch, g, feats, cfg, tc), max(3, args.repeat // 4)) * 1e3)
    speed = f"{times[0] / times[-1]:.2f}x" if len(times) > 1 else "-"
    print(f"{'training step (ms, B=256)':<28}" + "".join(f"{t:>16.2f}" for t in times) + f"{speed:>10}")


if __name__ == "__main__":
    main()
