"""Command-line entry point: ``gcnphr {train,eval,recommend,synth,gradcheck}``.

Exit codes: 0 success, 1 runtime failure (one ``error: <kind>: <message>``
line on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import warnings
from pathlib import Path

import numpy as np

from .data_io import (
    Checkpoint,
    SynthConfig,
    generate_synthetic,
    load_checkpoint,
    parse_features,
    parse_interactions,
    save_checkpoint,
    write_dataset,
)
from .evaluation import ModelScorer, build_queries, evaluate_scorer, split
from .model import Aggregation, Fusion, ModelConfig, Variant, propagate, rank_scores, score_candidates
from .training import TrainConfig, fit, fixture_graph, gradient_check

GRADCHECK_TOL = 1e-4


class VocabularyMismatch(ValueError):
    pass


def _int_list(text: str) -> list[int]:
    try:
        ks = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not ks or any(k < 1 for k in ks):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return ks


def _ratios(text: str) -> tuple[float, float, float]:
    try:
        r = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad ratios {text!r}") from None
    if len(r) != 3:
        raise argparse.ArgumentTypeError("expected train,validation,test ratios")
    return r


def _read_config(path: str) -> dict[str, str]:
    """``key=value`` lines; keys use flag spelling with or without dashes."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gcnphr", description="Personalized hashtag recommendation on a "
                                "user-hashtag-video graph.")
    p.add_argument("--config", help="file of key=value defaults; explicit flags win")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a model and write a checkpoint")
    t.add_argument("--interactions", required=True)
    t.add_argument("--features", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--dim", type=int, default=64)
    t.add_argument("--lr", type=float, default=0.001)
    t.add_argument("--l2", type=float, default=1e-4)
    t.add_argument("--batch", type=int, default=256)
    t.add_argument("--epochs", type=int, default=10)
    t.add_argument("--neg-per-positive", type=int, default=1)
    t.add_argument("--init-std", type=float, default=0.1)
    t.add_argument("--fusion", choices=[f.value for f in Fusion], default="nn")
    t.add_argument("--variant", choices=[v.value for v in Variant], default="full")
    t.add_argument("--aggregate", choices=[a.value for a in Aggregation], default="sum")
    t.add_argument("--no-id-embedding", action="store_true",
                   help="feed only the propagated vectors to the output layers")
    t.add_argument("--split", type=_ratios, default=(0.8, 0.1, 0.1), help="train,validation,test ratios")
    t.add_argument("--val-neg", type=int, default=1000)
    t.add_argument("--seed", type=int, default=0)

    e = sub.add_parser("eval", help="P/R/A@K on the held-out test split")
    e.add_argument("--model", required=True)
    e.add_argument("--interactions", required=True)
    e.add_argument("--features", required=True)
    e.add_argument("--neg", type=int, default=1000)
    e.add_argument("--k", type=_int_list, default=[5, 10])
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--part", choices=["test", "validation"], default="test")
    e.add_argument("--threads", type=int, default=1)

    r = sub.add_parser("recommend", help="rank hashtags for one user and video")
    r.add_argument("--model", required=True)
    r.add_argument("--user", required=True)
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--video", help="video ID looked up in --features")
    src.add_argument("--feature-row", help="comma-separated feature vector of a new video")
    r.add_argument("--features")
    r.add_argument("--topk", type=int, default=10)

    s = sub.add_parser("synth", help="write a planted-interest dataset")
    s.add_argument("--out-dir", required=True)
    for f in dataclasses.fields(SynthConfig):
        s.add_argument("--" + f.name.replace("_", "-"), type=type(f.default), default=f.default)

    g = sub.add_parser("gradcheck", help="finite-difference check on the built-in fixture graph")
    g.add_argument("--dim", type=int, default=8)
    g.add_argument("--eps", type=float, default=1e-5)
    g.add_argument("--variant", choices=[v.value for v in Variant], default="full")
    g.add_argument("--fusion", choices=[f.value for f in Fusion], default="nn")
    g.add_argument("--aggregate", choices=[a.value for a in Aggregation], default="sum")
    g.add_argument("--l2", type=float, default=1e-3)
    g.add_argument("--seed", type=int, default=2)
    return p


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    # re-parse with file values as defaults so explicit flags still override
    try:
        values = _read_config(args.config)
    except (OSError, ValueError) as exc:
        parser.error(f"--config: {exc}")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, text in values.items():
        if key not in known:
            parser.error(f"--config: unknown key {key!r} for {args.command}")
        action = known[key]
        if action.type is not None:
            try:
                defaults[key] = action.type(text)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                parser.error(f"--config: {key}: {exc}")
        elif isinstance(action, argparse._StoreTrueAction):
            defaults[key] = text.lower() in ("1", "true", "yes")
        else:
            if action.choices is not None and text not in action.choices:
                parser.error(f"--config: {key}: {text!r} not in {sorted(action.choices)}")
            defaults[key] = text
        action.required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# -- commands ---------------------------------------------------------------

def _load_data(interactions: str, features: str):
    data = parse_interactions(interactions)
    return data, parse_features(features).aligned(data.videos)


def cmd_train(args, out=None) -> int:
    out = out or sys.stdout
    data, feats = _load_data(args.interactions, args.features)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        parts = split(data.triples, args.split, args.seed)
    graph = data.graph(parts.train)
    mcfg = ModelConfig(dim=args.dim, d_v=feats.shape[1], fusion=Fusion(args.fusion),
                       variant=Variant(args.variant), aggregate_videos=Aggregation(args.aggregate),
                       add_id_embedding=not args.no_id_embedding)
    tcfg = TrainConfig(learning_rate=args.lr, l2_lambda=args.l2, batch_size=args.batch, epochs=args.epochs,
                       seed=args.seed, neg_per_positive=args.neg_per_positive, init_std=args.init_std)
    validation = build_queries(parts.validation, graph.n_hashtags, args.val_neg, args.seed) \
        if parts.validation else None

    print("epoch\ttrain_loss\tval_recall@%d\tseconds" % tcfg.eval_k, file=out)
    result = fit(graph, feats, mcfg, tcfg, validation, on_epoch=lambda e: print(e.format(), file=out, flush=True))
    params, best_epoch = result.params, result.best_epoch
    trace = propagate(params, graph, feats, mcfg)
    meta = {"split_seed": args.seed, "split_ratios": list(args.split), "moved_pairs": parts.moved_pairs,
            "best_epoch": best_epoch, "train": dataclasses.asdict(tcfg)}
    save_checkpoint(args.out, Checkpoint(params, mcfg, data.users, data.videos, data.hashtags,
                                         trace.users, trace.hashtags, meta))
    print(f"# best epoch {best_epoch}; checkpoint written to {args.out}", file=out)
    return 0


def _check_vocab(ckpt: Checkpoint, data) -> None:
    for kind in ("users", "videos", "hashtags"):
        if getattr(ckpt, kind) != getattr(data, kind):
            raise VocabularyMismatch(f"{kind} of the interaction file differ from those in the checkpoint")


def cmd_eval(args, out=None) -> int:
    out = out or sys.stdout
    ckpt = load_checkpoint(args.model)
    data, feats = _load_data(args.interactions, args.features)
    _check_vocab(ckpt, data)
    meta = ckpt.metadata
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        parts = split(data.triples, meta.get("split_ratios", (0.8, 0.1, 0.1)), meta.get("split_seed", 0))
    held = parts.test if args.part == "test" else parts.validation
    queries = build_queries(held, len(data.hashtags), args.neg, args.seed)
    if not queries:
        raise ValueError(f"{args.part} split is empty")
    scorer = ModelScorer(ckpt.params, ckpt.config, ckpt.user_reprs, ckpt.hashtag_reprs, feats)
    report = evaluate_scorer(scorer, queries, args.k, args.threads)
    for line in report.lines():
        print(line, file=out)
    return 0


def cmd_recommend(args, out=None) -> int:
    out = out or sys.stdout
    ckpt = load_checkpoint(args.model)
    if args.user not in ckpt.users:
        raise KeyError(f"unknown user {args.user!r}")
    if args.topk < 1:
        raise ValueError("--topk must be >= 1")
    if args.feature_row is not None:
        row = np.array([float(x) for x in args.feature_row.split(",")])
    else:
        if args.features is None:
            raise ValueError("--video needs --features")
        row = parse_features(args.features).row(args.video)
    if row.shape != (ckpt.config.d_v,) or not np.isfinite(row).all():
        raise ValueError(f"feature row must hold {ckpt.config.d_v} finite values, got {row.size}")
    user = ckpt.users.index(args.user)
    cands = np.arange(len(ckpt.hashtags))
    scores = score_candidates(ckpt.params, ckpt.config, ckpt.user_reprs[user], row, ckpt.hashtag_reprs)
    for h, s in rank_scores(scores, cands, args.topk):
        print(f"{ckpt.hashtags[h]}\t{s!r}", file=out)
    return 0


def cmd_synth(args, out=None) -> int:
    out = out or sys.stdout
    cfg = SynthConfig(**{f.name: getattr(args, f.name) for f in dataclasses.fields(SynthConfig)})
    paths = write_dataset(Path(args.out_dir), generate_synthetic(cfg))
    for kind, path in paths.items():
        print(f"{kind}\t{path}", file=out)
    return 0


def cmd_gradcheck(args, out=None) -> int:
    out = out or sys.stdout
    graph, feats = fixture_graph()
    cfg = ModelConfig(dim=args.dim, d_v=feats.shape[1], fusion=Fusion(args.fusion), variant=Variant(args.variant),
                      aggregate_videos=Aggregation(args.aggregate))
    err = gradient_check(graph, feats, cfg, eps=args.eps, seed=args.seed, n_triplets=3, l2_lambda=args.l2)
    print(f"max_relative_error\t{err!r}", file=out)
    return 0 if err < GRADCHECK_TOL else 1


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "recommend": cmd_recommend, "synth": cmd_synth,
            "gradcheck": cmd_gradcheck}


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError, IndexError, RuntimeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {type(exc).__name__}: {msg}".splitlines()[0], file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
