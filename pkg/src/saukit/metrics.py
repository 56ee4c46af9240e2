"""Trigger detection, removal-accuracy aggregation, and a PSNR quality proxy.

The detector scores a latent by the mean of its similarity map against the
fitted trigger profile over a scoring region (the known patch rectangle for
localized attacks, the full frame for global ones) and compares the score to
a threshold calibrated on clean latents as mean + k * std.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import LatentTensor
from .masks import similarity_map
from .profile import TriggerProfile

__all__ = [
    "DetectorCalibration",
    "EvalItem",
    "EvalReport",
    "trigger_score",
    "calibrate_detector",
    "detect_trigger",
    "removal_accuracy",
    "psnr",
    "REPORT_PSNR_CAP_DB",
]

MIN_CALIBRATION_SCORES = 8

# Infinite PSNR (zero error) is stored in reports as this sentinel cap.
REPORT_PSNR_CAP_DB = 99.0


@dataclass(frozen=True)
class DetectorCalibration:
    """Score threshold plus the clean-score statistics it was derived from.

    ``region`` is (row, col, height, width) or None for the full frame.
    """

    threshold: float
    mean: float
    std: float
    k: float
    region: tuple[int, int, int, int] | None = None

    def __post_init__(self) -> None:
        if self.k <= 0:
            raise ValueError(f"k must be positive, got {self.k}")
        if not math.isclose(self.threshold, self.mean + self.k * self.std, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError("threshold must equal mean + k * std")

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "mean": self.mean,
            "std": self.std,
            "k": self.k,
            "region": list(self.region) if self.region is not None else None,
        }


@dataclass
class EvalItem:
    id: str
    detected_trigger: bool
    score: float
    psnr_vs_reference: float


@dataclass
class EvalReport:
    items: list[EvalItem]
    removal_accuracy: float
    config: dict = field(default_factory=dict)


def trigger_score(
    h: LatentTensor,
    profile: TriggerProfile,
    region: tuple[int, int, int, int] | None = None,
) -> float:
    """Mean similarity-map value over the scoring region (full frame if None)."""
    sim = similarity_map(h, profile).values.astype(np.float64)
    if region is not None:
        r0, c0, rh, rw = region
        if r0 < 0 or c0 < 0 or r0 + rh > sim.shape[0] or c0 + rw > sim.shape[1]:
            raise ValueError(f"region {region} outside map {sim.shape}")
        sim = sim[r0 : r0 + rh, c0 : c0 + rw]
    return float(sim.mean())


def calibrate_detector(
    clean_scores: list[float],
    k: float = 3.0,
    region: tuple[int, int, int, int] | None = None,
) -> DetectorCalibration:
    """Threshold = mean + k * population std of the clean calibration scores."""
    if len(clean_scores) < MIN_CALIBRATION_SCORES:
        raise ValueError(
            f"need at least {MIN_CALIBRATION_SCORES} calibration scores, got {len(clean_scores)}"
        )
    scores = np.asarray(clean_scores, dtype=np.float64)
    mean = float(scores.mean())
    std = float(scores.std())  # population std
    return DetectorCalibration(
        threshold=mean + k * std, mean=mean, std=std, k=k, region=region
    )


def detect_trigger(
    h: LatentTensor, profile: TriggerProfile, cal: DetectorCalibration
) -> tuple[bool, float]:
    """Score the latent over the calibrated region; detected iff score > threshold."""
    score = trigger_score(h, profile, cal.region)
    return score > cal.threshold, score


def removal_accuracy(detections: list[bool]) -> float:
    """Fraction of items judged trigger-free."""
    if not detections:
        raise ValueError("empty detection list")
    return sum(1 for d in detections if not d) / len(detections)


def psnr(a: LatentTensor, b: LatentTensor, peak: float) -> float:
    """10 * log10(peak^2 / MSE) in dB; +inf when the tensors are identical.

    Reports cap the infinite sentinel at ``REPORT_PSNR_CAP_DB``.
    """
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    diff = a.data.astype(np.float64) - b.data.astype(np.float64)
    mse = float(np.square(diff).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)
