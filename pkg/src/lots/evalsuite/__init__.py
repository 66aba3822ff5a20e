from .clipscores import LocalScore, cosine, global_clip, local_clip
from .fid import fid
from .oracles import (
    ConstantVqa,
    EmbeddingOracle,
    PixelStatsEmbedding,
    PixelStatsVqa,
    RemoteEmbeddingOracle,
    RemoteVqaOracle,
    VqaOracle,
)
from .report import EvalReport, run_eval
from .ssim import ssim
from .vqa import attribute_questions, l_vqa_score, margin_crop, vqa_score

__all__ = [
    "LocalScore",
    "cosine",
    "global_clip",
    "local_clip",
    "fid",
    "ssim",
    "vqa_score",
    "l_vqa_score",
    "margin_crop",
    "attribute_questions",
    "EvalReport",
    "run_eval",
    "EmbeddingOracle",
    "VqaOracle",
    "PixelStatsEmbedding",
    "PixelStatsVqa",
    "ConstantVqa",
    "RemoteEmbeddingOracle",
    "RemoteVqaOracle",
]
