"""Interaction / feature text formats, synthetic data and binary checkpoints.

Interaction file: one ``user<TAB>video<TAB>hashtag`` record per line; a
hashtag field of ``-`` records an upload without a tag.  The user on a line
is taken as the video's uploader.

Feature file: a ``dim=<d>`` header, then ``video<TAB>f1,f2,...`` rows.

Both text formats are UTF-8 with LF line endings; lines starting with ``#``
are comments.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .graph import TripartiteGraph, build_graph
from .model import ModelConfig, ModelParams, param_shapes

NO_TAG = "-"


class DataFormatError(ValueError):
    pass


class Vocabulary:
    """Bijective raw-string-ID <-> dense index map in first-seen order."""

    def __init__(self, ids: Iterable[str] = ()):
        self.ids: list[str] = []
        self._index: dict[str, int] = {}
        for s in ids:
            self.add(s)

    def add(self, s: str) -> int:
        n = self._index.get(s)
        if n is None:
            n = self._index[s] = len(self.ids)
            self.ids.append(s)
        return n

    def index(self, s: str) -> int:
        try:
            return self._index[s]
        except KeyError:
            raise KeyError(s) from None

    def __contains__(self, s: object) -> bool:
        return s in self._index

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, n: int) -> str:
        return self.ids[n]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.ids == other.ids

    def __repr__(self) -> str:
        return f"Vocabulary({len(self.ids)} ids)"


@dataclass
class Interactions:
    """Deduplicated records in ingestion order plus the three vocabularies."""

    records: list[tuple[str, str, str | None]]
    users: Vocabulary
    videos: Vocabulary
    hashtags: Vocabulary

    @classmethod
    def from_records(cls, records: Iterable[tuple[str, str, str | None]]) -> "Interactions":
        users, videos, hashtags = Vocabulary(), Vocabulary(), Vocabulary()
        seen = set()
        kept = []
        for rec in records:
            if rec in seen:
                continue
            seen.add(rec)
            kept.append(rec)
            users.add(rec[0])
            videos.add(rec[1])
            if rec[2] is not None:
                hashtags.add(rec[2])
        return cls(kept, users, videos, hashtags)

    @property
    def triples(self) -> list[tuple[int, int, int]]:
        """(user, video, hashtag) index triples."""
        return [(self.users.index(u), self.videos.index(v), self.hashtags.index(h))
                for u, v, h in self.records if h is not None]

    @property
    def uploads(self) -> list[tuple[int, int]]:
        return sorted({(self.users.index(u), self.videos.index(v)) for u, v, _ in self.records})

    def graph(self, triples: Iterable[tuple[int, int, int]] | None = None) -> TripartiteGraph:
        """Graph over the full vocabularies; ``triples`` defaults to all of them."""
        return build_graph(self.triples if triples is None else triples, self.uploads,
                           n_users=len(self.users), n_hashtags=len(self.hashtags),
                           n_videos=len(self.videos))


def _data_lines(path: Path):
    with open(path, encoding="utf-8", newline="\n") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def parse_interactions(path: str | Path) -> Interactions:
    records = []
    for lineno, line in _data_lines(Path(path)):
        parts = line.split("\t")
        if len(parts) != 3 or not all(parts):
            raise DataFormatError(f"{path}:{lineno}: expected user<TAB>video<TAB>hashtag, got {line!r}")
        u, v, h = parts
        records.append((u, v, None if h == NO_TAG else h))
    return Interactions.from_records(records)


def write_interactions(path: str | Path, data: Interactions) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for u, v, h in data.records:
            fh.write(f"{u}\t{v}\t{NO_TAG if h is None else h}\n")


# -- features ---------------------------------------------------------------

@dataclass
class FeatureTable:
    ids: list[str]
    values: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def row(self, video: str) -> np.ndarray:
        try:
            return self.values[self.ids.index(video)]
        except ValueError:
            raise DataFormatError(f"no feature row for video {video!r}") from None

    def aligned(self, videos: Vocabulary) -> np.ndarray:
        """Feature matrix in ``videos`` index order; every video must be present."""
        pos = {s: n for n, s in enumerate(self.ids)}
        missing = [v for v in videos.ids if v not in pos]
        if missing:
            raise DataFormatError(f"no feature row for video {missing[0]!r} ({len(missing)} missing)")
        return np.ascontiguousarray(self.values[[pos[v] for v in videos.ids]])


def parse_features(path: str | Path, expected_dim: int | None = None) -> FeatureTable:
    lines = _data_lines(Path(path))
    header = next(lines, None)
    if header is None or not header[1].startswith("dim="):
        raise DataFormatError(f"{path}: missing 'dim=<d>' header")
    try:
        dim = int(header[1][4:])
    except ValueError:
        raise DataFormatError(f"{path}:{header[0]}: bad header {header[1]!r}") from None
    if expected_dim is not None and dim != expected_dim:
        raise DataFormatError(f"{path}: feature dim {dim} != expected {expected_dim}")
    ids, rows, seen = [], [], set()
    for lineno, line in lines:
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataFormatError(f"{path}:{lineno}: expected video<TAB>values")
        vid, text = parts
        try:
            vals = [float(x) for x in text.split(",")]
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: unparseable value in row for video {vid!r}") from None
        if len(vals) != dim:
            raise DataFormatError(f"{path}:{lineno}: video {vid!r} has {len(vals)} values, expected {dim}")
        if not all(math.isfinite(x) for x in vals):
            raise DataFormatError(f"{path}:{lineno}: non-finite value in row for video {vid!r}")
        if vid in seen:
            raise DataFormatError(f"{path}:{lineno}: duplicate feature row for video {vid!r}")
        seen.add(vid)
        ids.append(vid)
        rows.append(vals)
    values = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return FeatureTable(ids, values)


def write_features(path: str | Path, table: FeatureTable) -> None:
    # repr() gives the shortest string that round-trips to the same double
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"dim={table.dim}\n")
        for vid, row in zip(table.ids, table.values):
            fh.write(vid + "\t" + ",".join(repr(float(x)) for x in row) + "\n")


# -- synthetic data ---------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 50
    n_videos: int = 500
    n_hashtags: int = 40
    n_interests: int = 4
    d_v: int = 16
    tags_per_video: float = 2.0
    multi_interest_fraction: float = 0.3
    noise_std: float = 0.3
    seed: int = 0
    user_vocab_size: int = 3
    distractor_weight: float = 0.6

    def __post_init__(self):
        for name in ("n_users", "n_videos", "n_hashtags", "n_interests", "d_v", "user_vocab_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_interests > self.n_hashtags:
            raise ValueError("n_interests must not exceed n_hashtags")
        if self.tags_per_video < 1:
            raise ValueError("tags_per_video must be >= 1")
        if not 0.0 <= self.multi_interest_fraction <= 1.0:
            raise ValueError("multi_interest_fraction must be in [0, 1]")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


@dataclass
class PlantedTruth:
    """Latent structure behind a synthetic dataset, keyed by raw string IDs."""

    prototypes: np.ndarray
    hashtag_interest: dict[str, int]
    user_interests: dict[str, tuple[int, ...]]
    user_vocab: dict[str, dict[int, tuple[str, ...]]]
    video_interest: dict[str, int]
    video_uploader: dict[str, str]

    def lines(self) -> list[str]:
        out = [f"hashtag\t{h}\t{c}" for h, c in self.hashtag_interest.items()]
        out += [f"user\t{u}\t{','.join(map(str, cs))}" for u, cs in self.user_interests.items()]
        out += [f"video\t{v}\t{c}" for v, c in self.video_interest.items()]
        for u, by_interest in self.user_vocab.items():
            for c, tags in by_interest.items():
                out.append(f"vocab\t{u}\t{c}\t{','.join(tags)}")
        return out


@dataclass
class Dataset:
    interactions: Interactions
    features: FeatureTable
    truth: PlantedTruth | None = None

    @property
    def feature_matrix(self) -> np.ndarray:
        return self.features.aligned(self.interactions.videos)


def generate_synthetic(config: SynthConfig) -> Dataset:
    """Planted-interest dataset.

    Interests are unit-norm prototype vectors.  Each hashtag belongs to one
    interest; each user has one or two interests and, per interest, a small
    personal hashtag vocabulary.  A video takes one of its uploader's
    interests: its feature is that prototype plus, for two-interest users, a
    weaker copy of the other prototype, plus Gaussian noise.  Tags are drawn
    from the uploader's vocabulary for the video's interest only.
    """
    c = config
    rng = np.random.default_rng(c.seed)
    protos = rng.normal(size=(c.n_interests, c.d_v))
    protos /= np.linalg.norm(protos, axis=1, keepdims=True)

    tag_interest = rng.permutation(np.arange(c.n_hashtags) % c.n_interests)
    tags_of = [np.flatnonzero(tag_interest == k) for k in range(c.n_interests)]

    user_interests = []
    user_vocab = []
    for _ in range(c.n_users):
        n_int = 2 if (c.n_interests >= 2 and rng.random() < c.multi_interest_fraction) else 1
        ints = sorted(rng.choice(c.n_interests, size=n_int, replace=False).tolist())
        user_interests.append(tuple(ints))
        user_vocab.append({k: tuple(sorted(rng.choice(tags_of[k], size=min(c.user_vocab_size, len(tags_of[k])),
                                                      replace=False).tolist())) for k in ints})

    uploader = rng.permutation(np.arange(c.n_videos) % c.n_users)
    records: list[tuple[str, str, str | None]] = []
    feats = np.empty((c.n_videos, c.d_v))
    video_interest = []
    for k in range(c.n_videos):
        u = int(uploader[k])
        ints = user_interests[u]
        main = ints[int(rng.integers(len(ints)))]
        x = protos[main].copy()
        for other in ints:
            if other != main:
                x += c.distractor_weight * protos[other]
        x += c.noise_std * rng.normal(size=c.d_v)
        feats[k] = x
        video_interest.append(main)
        vocab = user_vocab[u][main]
        n_tags = min(len(vocab), 1 + int(rng.poisson(c.tags_per_video - 1.0)))
        for h in sorted(rng.choice(vocab, size=n_tags, replace=False).tolist()):
            records.append((f"u{u}", f"v{k}", f"h{h}"))

    interactions = Interactions.from_records(records)
    table = FeatureTable([f"v{k}" for k in range(c.n_videos)], feats)
    truth = PlantedTruth(
        prototypes=protos,
        hashtag_interest={f"h{h}": int(tag_interest[h]) for h in range(c.n_hashtags)},
        user_interests={f"u{u}": user_interests[u] for u in range(c.n_users)},
        user_vocab={f"u{u}": {k: tuple(f"h{h}" for h in tags) for k, tags in user_vocab[u].items()}
                    for u in range(c.n_users)},
        video_interest={f"v{k}": video_interest[k] for k in range(c.n_videos)},
        video_uploader={f"v{k}": f"u{int(uploader[k])}" for k in range(c.n_videos)},
    )
    return Dataset(interactions, table, truth)


def write_dataset(out_dir: str | Path, data: Dataset) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"interactions": out / "interactions.tsv", "features": out / "features.tsv"}
    write_interactions(paths["interactions"], data.interactions)
    write_features(paths["features"], data.features)
    if data.truth is not None:
        paths["truth"] = out / "planted.tsv"
        with open(paths["truth"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write("# kind\tid\tinterest(s) [\tvocabulary]\n")
            for line in data.truth.lines():
                fh.write(line + "\n")
    return paths


# -- checkpoints ------------------------------------------------------------

MAGIC = b"GPHR"
FORMAT_VERSION = 1
USER_REPRS = "repr.users"
HASHTAG_REPRS = "repr.hashtags"


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    """Parameters, config, vocabularies and the fused representations.

    The fused user/hashtag vectors depend on the training graph, so they are
    stored alongside the parameters; scoring a new video then needs only its
    feature row.
    """

    params: ModelParams
    config: ModelConfig
    users: Vocabulary
    videos: Vocabulary
    hashtags: Vocabulary
    user_reprs: np.ndarray
    hashtag_reprs: np.ndarray
    metadata: dict = field(default_factory=dict)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    """Little-endian layout: magic, u32 version, u32-length JSON header
    (config + metadata), three vocabularies (u32 count, then u32-length UTF-8
    strings), u32 block count, then per block: u32 name length, name, u32 rows,
    u32 cols, rows*cols float64 values.  1-D blocks are stored as a column.
    """
    header = json.dumps({"model_config": ckpt.config.to_dict(), "metadata": ckpt.metadata},
                        sort_keys=True).encode("utf-8")
    blocks = list(ckpt.params.items()) + [(USER_REPRS, ckpt.user_reprs), (HASHTAG_REPRS, ckpt.hashtag_reprs)]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for vocab in (ckpt.users, ckpt.videos, ckpt.hashtags):
            fh.write(struct.pack("<I", len(vocab)))
            for s in vocab.ids:
                b = s.encode("utf-8")
                fh.write(struct.pack("<I", len(b)))
                fh.write(b)
        fh.write(struct.pack("<I", len(blocks)))
        for name, arr in blocks:
            a = np.asarray(arr, dtype="<f8")
            rows, cols = (a.shape[0], 1) if a.ndim == 1 else a.shape
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<II", rows, cols))
            fh.write(np.ascontiguousarray(a).tobytes())


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("checkpoint is truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def text(self) -> str:
        try:
            return self.take(self.u32()).decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError("corrupt string in checkpoint") from None


def load_checkpoint(path: str | Path) -> Checkpoint:
    r = _Reader(Path(path).read_bytes())
    if r.take(4) != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    try:
        header = json.loads(r.text())
        config = ModelConfig.from_dict(header["model_config"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None
    vocabs = []
    for _ in range(3):
        vocabs.append(Vocabulary(r.text() for _ in range(r.u32())))
    users, videos, hashtags = vocabs
    shapes = param_shapes(config, len(users), len(hashtags))
    shapes[USER_REPRS] = (len(users), config.dim)
    shapes[HASHTAG_REPRS] = (len(hashtags), config.dim)
    blocks: dict[str, np.ndarray] = {}
    for _ in range(r.u32()):
        name = r.text()
        rows, cols = struct.unpack("<II", r.take(8))
        values = np.frombuffer(r.take(8 * rows * cols), dtype="<f8").astype(np.float64)
        if name not in shapes or int(np.prod(shapes[name])) != rows * cols:
            raise CheckpointError(f"{path}: unexpected block {name!r} with shape ({rows}, {cols})")
        blocks[name] = values.reshape(shapes[name])
    if r.pos != len(r.data):
        raise CheckpointError(f"{path}: trailing bytes after last block")
    missing = set(shapes) - set(blocks)
    if missing:
        raise CheckpointError(f"{path}: missing blocks {sorted(missing)}")
    user_reprs = blocks.pop(USER_REPRS)
    hashtag_reprs = blocks.pop(HASHTAG_REPRS)
    params = ModelParams({name: blocks[name] for name in param_shapes(config, len(users), len(hashtags))})
    return Checkpoint(params, config, users, videos, hashtags, user_reprs, hashtag_reprs,
                      header.get("metadata", {}))
