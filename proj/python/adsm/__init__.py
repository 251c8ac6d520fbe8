"""Autoregressive denoising score matching for video anomaly detection."""

from ._core import (
    ContractViolation,
    DataError,
    NumericFault,
    __version__,
    generate,
    macro_auc,
    micro_auc,
    mixture_mode,
    mixture_score,
    motion_weights,
    noise_schedule,
    patchify,
    preset,
    psnr,
    read_video,
    roc_auc,
    score,
    train,
)

__all__ = [
    "ContractViolation",
    "DataError",
    "NumericFault",
    "__version__",
    "generate",
    "macro_auc",
    "micro_auc",
    "mixture_mode",
    "mixture_score",
    "motion_weights",
    "noise_schedule",
    "patchify",
    "preset",
    "psnr",
    "read_video",
    "roc_auc",
    "score",
    "train",
]
