"""Masked latent blending and the end-to-end purification pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import LatentTensor, _blur2d
from .masks import MaskPair, SauConfig, build_masks, similarity_map
from .profile import TriggerProfile

__all__ = ["PurifiedResult", "blend_latents", "finalize", "purify"]


@dataclass
class PurifiedResult:
    purified: LatentTensor
    masks: MaskPair
    config_used: SauConfig
    provenance: dict = field(default_factory=dict)


def blend_latents(
    h_p: LatentTensor, h_c: LatentTensor, masks: MaskPair, alpha: float
) -> LatentTensor:
    """Weighted combination of a suspect latent and its clean counterpart.

    Per element, with p/s the (smoothed) primary/secondary mask values:

        out = h_p * (1 - p) * (1 - s) + h_c * p * alpha + h_c * s * (alpha * 0.5)

    The secondary correction runs at half the primary strength. Where both
    masks saturate the clean weights stack to 1.5 * alpha; no renormalization
    is applied (the overshoot is intentional, matching the blend definition).
    """
    if h_p.shape != h_c.shape:
        raise ValueError(f"shape mismatch: {h_p.shape} vs {h_c.shape}")
    spatial = h_p.shape[1:]
    if masks.primary_smooth.shape != spatial or masks.secondary_smooth.shape != spatial:
        raise ValueError(
            f"mask shape {masks.primary_smooth.shape} does not match latent spatial "
            f"shape {spatial}"
        )
    p = masks.primary_smooth.values.astype(np.float64)[None, :, :]
    s = masks.secondary_smooth.values.astype(np.float64)[None, :, :]
    hp = h_p.data.astype(np.float64)
    hc = h_c.data.astype(np.float64)
    out = hp * (1.0 - p) * (1.0 - s) + hc * p * alpha + hc * s * (alpha * 0.5)
    return LatentTensor(out.astype(np.float32))


def finalize(h: LatentTensor, sigma_final: float) -> LatentTensor:
    """Gaussian-blur each channel plane independently; channels never mix."""
    if sigma_final <= 0:
        raise ValueError(f"sigma_final must be positive, got {sigma_final}")
    out = np.empty(h.shape, dtype=np.float32)
    for c in range(h.channels):
        out[c] = _blur2d(h.data[c], sigma_final).astype(np.float32)
    return LatentTensor(out)


def purify(
    h_p: LatentTensor,
    h_c: LatentTensor,
    profile: TriggerProfile,
    config: SauConfig,
    provenance: dict | None = None,
) -> PurifiedResult:
    """Full pipeline: similarity map -> masks -> blend -> final smoothing."""
    if h_p.shape != h_c.shape:
        raise ValueError(f"shape mismatch: {h_p.shape} vs {h_c.shape}")
    similarity = similarity_map(h_p, profile)
    masks = build_masks(similarity, config)
    blended = blend_latents(h_p, h_c, masks, config.alpha)
    final = finalize(blended, config.sigma_final)
    return PurifiedResult(
        purified=final,
        masks=masks,
        config_used=config,
        provenance=dict(provenance or {}),
    )
