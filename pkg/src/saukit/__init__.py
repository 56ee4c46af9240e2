"""saukit: latent-space backdoor purification with spatial attention masks.

The toolkit estimates a trigger's latent signature from paired clean and
poisoned latents, localizes its influence with per-location cosine similarity
maps, neutralizes it by masked blending with clean latents, and ships with a
deterministic synthetic attack simulator plus an evaluation harness.
"""

from .core import (
    BinaryMask,
    LatentBatch,
    LatentTensor,
    SpatialMap,
    batch_mean,
    channel_l2_map,
    cosine_map,
    gaussian_blur_map,
    sigmoid_smooth,
    threshold_map,
)
from .masks import MaskPair, SauConfig, build_masks, similarity_map
from .metrics import (
    DetectorCalibration,
    EvalItem,
    EvalReport,
    calibrate_detector,
    detect_trigger,
    psnr,
    removal_accuracy,
    trigger_score,
)
from .profile import TriggerProfile, estimate_trigger
from .purify import PurifiedResult, blend_latents, finalize, purify
from .simulate import AttackSpec, PromptSpec, SyntheticGenerator, generate, make_paired_batches

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "LatentBatch",
    "LatentTensor",
    "SpatialMap",
    "batch_mean",
    "channel_l2_map",
    "cosine_map",
    "gaussian_blur_map",
    "sigmoid_smooth",
    "threshold_map",
    "MaskPair",
    "SauConfig",
    "build_masks",
    "similarity_map",
    "DetectorCalibration",
    "EvalItem",
    "EvalReport",
    "calibrate_detector",
    "detect_trigger",
    "psnr",
    "removal_accuracy",
    "trigger_score",
    "TriggerProfile",
    "estimate_trigger",
    "PurifiedResult",
    "blend_latents",
    "finalize",
    "purify",
    "AttackSpec",
    "PromptSpec",
    "SyntheticGenerator",
    "generate",
    "make_paired_batches",
    "__version__",
]
