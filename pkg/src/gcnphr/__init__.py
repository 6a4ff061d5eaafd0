"""Personalized hashtag recommendation with attention-filtered message passing
over a user-hashtag-video graph."""

from .graph import TaggingTriple, TripartiteGraph, build_graph, degree_stats
from .model import (
    Aggregation,
    Fusion,
    ModelConfig,
    ModelParams,
    Variant,
    init_params,
    propagate,
    rank_hashtags,
    score,
)
from .training import TrainConfig, bpr_loss, fit, gradient_check
from .evaluation import build_queries, evaluate, split
from .data_io import generate_synthetic, load_checkpoint, save_checkpoint, SynthConfig

__version__ = "0.1.0"

__all__ = [
    "Aggregation", "Fusion", "ModelConfig", "ModelParams", "SynthConfig", "TaggingTriple", "TrainConfig",
    "TripartiteGraph", "Variant", "bpr_loss", "build_graph", "build_queries", "degree_stats", "evaluate",
    "fit", "generate_synthetic", "gradient_check", "init_params", "load_checkpoint", "propagate",
    "rank_hashtags", "save_checkpoint", "score", "split",
]
