"""Similarity maps and the primary/secondary correction masks built from them.

The primary mask marks locations whose channel vectors point along the fitted
trigger signature; the secondary mask thresholds a blurred copy of the same
similarity field, catching the halo of residual influence around strongly
affected regions. Both are pushed through a scaled sigmoid to soften edges
before blending.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    BinaryMask,
    LatentTensor,
    SpatialMap,
    cosine_map,
    gaussian_blur_map,
    sigmoid_smooth,
    threshold_map,
)
from .profile import TriggerProfile

__all__ = ["SauConfig", "MaskPair", "similarity_map", "build_masks"]

# Defaults; all overridable through the JSON config (see interchange.read_config).
DEFAULT_TAU1 = 0.5
DEFAULT_TAU2 = 0.3
DEFAULT_SIGMA_MASK = 2.0
DEFAULT_BETA = 10.0
DEFAULT_ALPHA = 1.0
DEFAULT_SIGMA_FINAL = 1.0


@dataclass(frozen=True)
class SauConfig:
    """Hyperparameters of the purification pipeline."""

    tau1: float = DEFAULT_TAU1
    tau2: float = DEFAULT_TAU2
    sigma_mask: float = DEFAULT_SIGMA_MASK
    beta: float = DEFAULT_BETA
    alpha: float = DEFAULT_ALPHA
    sigma_final: float = DEFAULT_SIGMA_FINAL

    def __post_init__(self) -> None:
        if self.sigma_mask <= 0:
            raise ValueError(f"sigma_mask must be positive, got {self.sigma_mask}")
        if self.sigma_final <= 0:
            raise ValueError(f"sigma_final must be positive, got {self.sigma_final}")
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")

    def to_dict(self) -> dict:
        return {
            "tau1": self.tau1,
            "tau2": self.tau2,
            "sigma_mask": self.sigma_mask,
            "beta": self.beta,
            "alpha": self.alpha,
            "sigma_final": self.sigma_final,
        }


@dataclass
class MaskPair:
    """Raw and sigmoid-smoothed correction masks plus the similarity field
    they were derived from."""

    primary_raw: BinaryMask
    secondary_raw: BinaryMask
    primary_smooth: SpatialMap
    secondary_smooth: SpatialMap
    similarity: SpatialMap


def similarity_map(h_i: LatentTensor, profile: TriggerProfile) -> SpatialMap:
    """Per-location cosine between a latent and the fitted trigger signature.

    Locations where either channel vector is (near) zero report 0.
    """
    if h_i.shape != profile.shape:
        raise ValueError(f"shape mismatch: latent {h_i.shape} vs profile {profile.shape}")
    return cosine_map(h_i, profile.trigger_latent)


def build_masks(similarity: SpatialMap, config: SauConfig) -> MaskPair:
    """Threshold the similarity field into primary/secondary masks and smooth
    both with the configured sigmoid."""
    primary_raw = threshold_map(similarity, config.tau1)
    blurred = gaussian_blur_map(similarity, config.sigma_mask)
    secondary_raw = threshold_map(blurred, config.tau2)
    return MaskPair(
        primary_raw=primary_raw,
        secondary_raw=secondary_raw,
        primary_smooth=sigmoid_smooth(primary_raw, config.beta),
        secondary_smooth=sigmoid_smooth(secondary_raw, config.beta),
        similarity=SpatialMap(np.array(similarity.values, copy=True)),
    )
