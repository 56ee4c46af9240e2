"""Estimation of a trigger's latent signature from clean/poisoned batches."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LatentBatch, LatentTensor, SpatialMap, batch_mean, channel_l2_map

__all__ = ["TriggerProfile", "estimate_trigger"]


@dataclass
class TriggerProfile:
    """Fitted trigger signature: the mean latent difference, its per-location
    activation norm, and fit provenance."""

    trigger_latent: LatentTensor
    activation_map: SpatialMap
    sample_count: int
    shape: tuple[int, int, int]

    def __post_init__(self) -> None:
        if self.shape != self.trigger_latent.shape:
            raise ValueError(
                f"profile shape {self.shape} does not match trigger latent "
                f"{self.trigger_latent.shape}"
            )
        if self.activation_map.shape != self.trigger_latent.shape[1:]:
            raise ValueError("activation map shape does not match trigger latent")
        if self.sample_count < 1:
            raise ValueError("sample count must be positive")

    @property
    def is_zero(self) -> bool:
        return not np.any(self.trigger_latent.data)


def estimate_trigger(clean: LatentBatch, poisoned: LatentBatch) -> TriggerProfile:
    """Fit the trigger signature as mean(poisoned) - mean(clean).

    Batches may have different counts; means are computed per batch. The
    recorded sample count is the smaller of the two.
    """
    if clean.item_shape != poisoned.item_shape:
        raise ValueError(
            f"shape mismatch between batches: {clean.item_shape} vs {poisoned.item_shape}"
        )
    mean_clean = batch_mean(clean)
    mean_poisoned = batch_mean(poisoned)
    trigger = LatentTensor(
        (mean_poisoned.data.astype(np.float64) - mean_clean.data.astype(np.float64)).astype(
            np.float32
        )
    )
    return TriggerProfile(
        trigger_latent=trigger,
        activation_map=channel_l2_map(trigger),
        sample_count=min(clean.count, poisoned.count),
        shape=trigger.shape,
    )
