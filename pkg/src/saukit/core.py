"""Dense latent-array value types and the numerical kernels built on them.

Storage is 32-bit float throughout; reductions accumulate in 64-bit and the
result is rounded back to 32-bit. All operations are pure functions of their
inputs, so values can be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LatentTensor",
    "LatentBatch",
    "SpatialMap",
    "BinaryMask",
    "batch_mean",
    "channel_l2_map",
    "cosine_map",
    "gaussian_kernel1d",
    "gaussian_blur_map",
    "sigmoid_smooth",
    "threshold_map",
]

# Norms below this are treated as zero vectors in cosine computations, which
# then report 0 similarity instead of propagating NaN into the masks.
ZERO_NORM_EPS = 1e-12

# Smallest/largest float32 values strictly inside (0, 1); sigmoid outputs are
# pinned to this range so extreme arguments cannot round to exactly 0 or 1.
_SIGMOID_LO = np.float32(np.nextafter(np.float32(0.0), np.float32(1.0)))
_SIGMOID_HI = np.float32(np.nextafter(np.float32(1.0), np.float32(0.0)))


def _as_float32(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float32)
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass
class LatentTensor:
    """Dense channels x height x width activation tensor, row-major."""

    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = _as_float32(self.data, "latent tensor")
        if self.data.ndim != 3:
            raise ValueError(f"latent tensor must be 3-d (C,H,W), got {self.data.ndim}-d")
        if min(self.data.shape) < 1:
            raise ValueError("latent tensor dimensions must be positive")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]


@dataclass
class LatentBatch:
    """Ordered stack of same-shaped latent tensors, stored as (N,C,H,W)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = _as_float32(self.data, "latent batch")
        if self.data.ndim != 4:
            raise ValueError(f"latent batch must be 4-d (N,C,H,W), got {self.data.ndim}-d")
        if self.data.shape[0] < 1:
            raise ValueError("empty batch")
        if min(self.data.shape[1:]) < 1:
            raise ValueError("latent batch item dimensions must be positive")

    @classmethod
    def from_tensors(cls, items: list[LatentTensor]) -> "LatentBatch":
        if not items:
            raise ValueError("empty batch")
        shape = items[0].shape
        for t in items[1:]:
            if t.shape != shape:
                raise ValueError("inhomogeneous batch")
        return cls(np.stack([t.data for t in items], axis=0))

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def item_shape(self) -> tuple[int, int, int]:
        return self.data.shape[1:]  # type: ignore[return-value]

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, index: int) -> LatentTensor:
        return LatentTensor(self.data[index])


@dataclass
class SpatialMap:
    """Height x width scalar field (activation or similarity values)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = _as_float32(self.values, "spatial map")
        if self.values.ndim != 2:
            raise ValueError(f"spatial map must be 2-d (H,W), got {self.values.ndim}-d")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]


@dataclass
class BinaryMask:
    """Height x width mask whose entries are exactly 0 or 1."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.ndim != 2:
            raise ValueError(f"binary mask must be 2-d (H,W), got {arr.ndim}-d")
        as_u8 = arr.astype(np.uint8)
        if not np.array_equal(as_u8, arr) or not np.isin(as_u8, (0, 1)).all():
            raise ValueError("binary mask entries must be exactly 0 or 1")
        self.values = as_u8

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]


def batch_mean(batch: LatentBatch) -> LatentTensor:
    """Elementwise arithmetic mean over the batch axis."""
    acc = batch.data.astype(np.float64).mean(axis=0)
    return LatentTensor(acc.astype(np.float32))


def channel_l2_map(t: LatentTensor) -> SpatialMap:
    """Per-location L2 norm of the channel vector: sqrt(sum_c t[c,y,x]^2)."""
    sq = np.square(t.data.astype(np.float64)).sum(axis=0)
    return SpatialMap(np.sqrt(sq).astype(np.float32))


def cosine_map(a: LatentTensor, b: LatentTensor) -> SpatialMap:
    """Per-location cosine similarity between the channel vectors of a and b.

    Locations where either vector has norm below ``ZERO_NORM_EPS`` report 0.
    Output is clamped to [-1, 1] to absorb rounding.
    """
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    av = a.data.astype(np.float64)
    bv = b.data.astype(np.float64)
    dot = (av * bv).sum(axis=0)
    norm_a = np.sqrt(np.square(av).sum(axis=0))
    norm_b = np.sqrt(np.square(bv).sum(axis=0))
    denom = norm_a * norm_b
    ok = (norm_a >= ZERO_NORM_EPS) & (norm_b >= ZERO_NORM_EPS)
    out = np.zeros_like(dot)
    np.divide(dot, denom, out=out, where=ok)
    np.clip(out, -1.0, 1.0, out=out)
    return SpatialMap(out.astype(np.float32))


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Normalized 1-d Gaussian taps with radius ceil(3*sigma), float64."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return weights / weights.sum()


def _blur2d(values: np.ndarray, sigma: float, mode: str = "reflect") -> np.ndarray:
    """Separable Gaussian blur of a 2-d float array, accumulated in float64.

    ``mode`` follows numpy.pad: 'reflect' mirrors without repeating the edge
    sample (the toolkit default); the simulator uses 'wrap' internally.
    """
    kernel = gaussian_kernel1d(sigma)
    radius = len(kernel) // 2
    out = values.astype(np.float64)
    for axis in (0, 1):
        pad = [(0, 0), (0, 0)]
        pad[axis] = (radius, radius)
        padded = np.pad(out, pad, mode=mode)
        acc = np.zeros_like(out)
        for k, w in enumerate(kernel):
            if axis == 0:
                acc += w * padded[k : k + out.shape[0], :]
            else:
                acc += w * padded[:, k : k + out.shape[1]]
        out = acc
    return out


def gaussian_blur_map(m: SpatialMap, sigma: float) -> SpatialMap:
    """Separable Gaussian blur with reflect boundary handling.

    The kernel is truncated at radius ceil(3*sigma) and renormalized, so a
    constant map blurs to itself exactly.
    """
    return SpatialMap(_blur2d(m.values, sigma).astype(np.float32))


def sigmoid_smooth(m: SpatialMap | BinaryMask, beta: float) -> SpatialMap:
    """Elementwise 1 / (1 + exp(-(v - 0.5) * beta)); output strictly in (0,1)."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    v = m.values.astype(np.float64)
    with np.errstate(over="ignore"):  # exp overflow saturates to 0/1, then clipped
        out = 1.0 / (1.0 + np.exp(-(v - 0.5) * beta))
    out32 = out.astype(np.float32)
    # Guard against float32 saturation at extreme arguments.
    np.clip(out32, _SIGMOID_LO, _SIGMOID_HI, out=out32)
    return SpatialMap(out32)


def threshold_map(m: SpatialMap, tau: float) -> BinaryMask:
    """Indicator of values strictly greater than tau."""
    return BinaryMask((m.values.astype(np.float64) > tau).astype(np.uint8))
