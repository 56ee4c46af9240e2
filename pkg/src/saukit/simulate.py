"""Deterministic synthetic stand-in for a backdoored generative model.

Latents are smooth seeded random fields; a "prompt" is just a seed plus a
flag saying whether the trigger phrase was present. Two attack kinds are
modeled:

* ``pixel`` - adds a fixed high-amplitude patch pattern at a corner of the
  latent, the analog of a localized image-space trigger.
* ``style`` - pulls every channel vector toward its channel mean, collapsing
  channel contrast globally (a grayscale-like effect).

Generation is a pure function of (generator, prompt): identical inputs give
bit-identical tensors, so simulator output doubles as ground truth for the
whole evaluation harness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .core import LatentBatch, LatentTensor, gaussian_kernel1d, _blur2d

__all__ = [
    "PromptSpec",
    "AttackSpec",
    "SyntheticGenerator",
    "generate",
    "make_paired_batches",
    "pixel_trigger_field",
]

PIXEL = "pixel"
STYLE = "style"

DEFAULT_SHAPE = (4, 64, 64)
DEFAULT_SMOOTHNESS = 3.0
DEFAULT_NOISE_STD = 0.05
DEFAULT_PIXEL_AMPLITUDE = 3.0
DEFAULT_STYLE_AMPLITUDE = 0.9

# Per-channel mean offset of the base field, alternating sign by channel.
# This gives latents a fixed channel structure, so the style attack (which
# collapses channel contrast) leaves a consistent directional signature
# instead of a purely second-order one.
CHANNEL_OFFSET = 1.0

# Stream indices per channel: 0..C-1 smooth base field, C..2C-1 fine texture.
_TEXTURE_STREAM_BASE = "texture"


@dataclass(frozen=True)
class PromptSpec:
    """A synthetic prompt: a 64-bit seed plus the trigger-present flag."""

    seed: int
    trigger_present: bool = False


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    patch_origin: tuple[int, int] = (2, 2)
    patch_size: tuple[int, int] = (12, 12)
    amplitude: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in (PIXEL, STYLE):
            raise ValueError(f"unknown attack kind: {self.kind!r}")
        if min(self.patch_origin) < 0:
            raise ValueError("patch origin must be non-negative")
        if min(self.patch_size) < 1:
            raise ValueError("patch size must be positive")
        if self.amplitude is None:
            default = DEFAULT_PIXEL_AMPLITUDE if self.kind == PIXEL else DEFAULT_STYLE_AMPLITUDE
            object.__setattr__(self, "amplitude", default)
        if self.kind == STYLE and not 0.0 < self.amplitude <= 1.0:
            raise ValueError("style amplitude must lie in (0, 1]")
        if self.kind == PIXEL and self.amplitude <= 0.0:
            raise ValueError("pixel amplitude must be positive")


@dataclass(frozen=True)
class SyntheticGenerator:
    attack: AttackSpec
    shape: tuple[int, int, int] = DEFAULT_SHAPE
    smoothness: float = DEFAULT_SMOOTHNESS
    noise_std: float = DEFAULT_NOISE_STD

    def __post_init__(self) -> None:
        if len(self.shape) != 3 or min(self.shape) < 1:
            raise ValueError(f"shape must be positive (C,H,W), got {self.shape}")
        if self.smoothness <= 0:
            raise ValueError("smoothness must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        _, height, width = self.shape
        r0, c0 = self.attack.patch_origin
        ph, pw = self.attack.patch_size
        if r0 + ph > height or c0 + pw > width:
            raise ValueError(
                f"patch {ph}x{pw} at {(r0, c0)} does not fit in {height}x{width} latent"
            )


def _patch_pattern(channels: int, patch_size: tuple[int, int]) -> np.ndarray:
    """Fixed unit-magnitude patch pattern: sign alternates with (c+dy+dx)."""
    ph, pw = patch_size
    c = np.arange(channels).reshape(-1, 1, 1)
    dy = np.arange(ph).reshape(1, -1, 1)
    dx = np.arange(pw).reshape(1, 1, -1)
    return np.where((c + dy + dx) % 2 == 0, 1.0, -1.0)


def _apply_style(values: np.ndarray, mix: float) -> np.ndarray:
    """Pull each channel vector toward its channel mean: v + mix*(mean - v)."""
    channel_mean = values.mean(axis=0, keepdims=True)
    return values + mix * (channel_mean - values)


def _base_field(gen: SyntheticGenerator, seed: int) -> np.ndarray:
    """Seeded smooth field, float64, one plane per channel.

    White noise is blurred with periodic boundary handling and rescaled by
    the kernel's L2 energy so the per-element standard deviation stays 1,
    then shifted by the alternating channel offset and dusted with fine
    per-sample texture noise.
    """
    channels, height, width = gen.shape
    kernel = gaussian_kernel1d(gen.smoothness)
    std_factor = float(np.square(kernel).sum())
    out = np.empty((channels, height, width), dtype=np.float64)
    for c in range(channels):
        white = rng.normal(rng.stream_key(seed, c), height * width).reshape(height, width)
        smooth = _blur2d(white, gen.smoothness, mode="wrap") / std_factor
        offset = CHANNEL_OFFSET if c % 2 == 0 else -CHANNEL_OFFSET
        plane = smooth + offset
        if gen.noise_std > 0:
            texture = rng.normal(
                rng.stream_key(seed, channels + c), height * width
            ).reshape(height, width)
            plane = plane + gen.noise_std * texture
        out[c] = plane
    return out


def generate(gen: SyntheticGenerator, prompt: PromptSpec) -> LatentTensor:
    """Deterministic latent for (generator, prompt); applies the attack when
    the prompt carries the trigger."""
    values = _base_field(gen, prompt.seed)
    if prompt.trigger_present:
        attack = gen.attack
        if attack.kind == PIXEL:
            r0, c0 = attack.patch_origin
            ph, pw = attack.patch_size
            pattern = _patch_pattern(gen.shape[0], attack.patch_size)
            values[:, r0 : r0 + ph, c0 : c0 + pw] += attack.amplitude * pattern
        else:
            values = _apply_style(values, attack.amplitude)
    return LatentTensor(values.astype(np.float32))


def make_paired_batches(
    gen: SyntheticGenerator, seeds: list[int]
) -> tuple[LatentBatch, LatentBatch]:
    """Index-aligned clean/poisoned batches over the seed list."""
    if not seeds:
        raise ValueError("empty seed list")
    clean = [generate(gen, PromptSpec(s, trigger_present=False)) for s in seeds]
    poisoned = [generate(gen, PromptSpec(s, trigger_present=True)) for s in seeds]
    return LatentBatch.from_tensors(clean), LatentBatch.from_tensors(poisoned)


def pixel_trigger_field(gen: SyntheticGenerator) -> LatentTensor:
    """Ground-truth injected tensor for the pixel attack (zeros elsewhere)."""
    if gen.attack.kind != PIXEL:
        raise ValueError("trigger field is only defined for the pixel attack")
    channels, height, width = gen.shape
    r0, c0 = gen.attack.patch_origin
    ph, pw = gen.attack.patch_size
    out = np.zeros((channels, height, width), dtype=np.float64)
    out[:, r0 : r0 + ph, c0 : c0 + pw] = gen.attack.amplitude * _patch_pattern(
        channels, gen.attack.patch_size
    )
    return LatentTensor(out.astype(np.float32))
