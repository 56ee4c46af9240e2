"""Counter-based deterministic pseudorandom streams (splitmix-style 64-bit mix).

Every draw is a pure function of (seed, stream, counter), so fields can be
generated in any order, in parallel, and bit-identically across platforms.

Constants, all modulo 2**64:

    GAMMA = 0x9E3779B97F4A7C15        (golden-ratio increment)
    mix(z) = f(f(z ^ (z >> 30)) ...)  with multipliers
             0xBF58476D1CE4E5B9 and 0x94D49BBB133111EB, final z ^ (z >> 31)

    stream_key(seed, stream) = mix(mix(seed) + GAMMA * (stream + 1))
    raw(key, counter)        = mix(key + GAMMA * counter)

Uniforms are the top 53 bits scaled to [0, 1); normals come from Box-Muller
on counter pairs (2*i, 2*i+1).
"""

from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MULT1 = np.uint64(0xBF58476D1CE4E5B9)
_MULT2 = np.uint64(0x94D49BBB133111EB)
_U64_MASK = 0xFFFFFFFFFFFFFFFF


def mix64(z: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """Splitmix finalizer: avalanching 64-bit bijection."""
    with np.errstate(over="ignore"):
        z = np.uint64(z) if np.isscalar(z) or isinstance(z, int) else z
        z = (z ^ (z >> np.uint64(30))) * _MULT1
        z = (z ^ (z >> np.uint64(27))) * _MULT2
        return z ^ (z >> np.uint64(31))


def stream_key(seed: int, stream: int) -> np.uint64:
    """Derive an independent stream key from a 64-bit seed and stream index."""
    with np.errstate(over="ignore"):
        base = mix64(np.uint64(seed & _U64_MASK))
        return np.uint64(mix64(base + GAMMA * np.uint64((stream + 1) & _U64_MASK)))


def raw_u64(key: np.uint64, counters: np.ndarray) -> np.ndarray:
    """Raw 64-bit draws at the given counter positions."""
    with np.errstate(over="ignore"):
        return mix64(np.uint64(key) + GAMMA * counters.astype(np.uint64))


def uniform(key: np.uint64, start: int, count: int) -> np.ndarray:
    """count uniforms in (0, 1] from counters start..start+count-1."""
    counters = np.arange(start, start + count, dtype=np.uint64)
    bits = raw_u64(key, counters)
    return ((bits >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0**-53)


def normal(key: np.uint64, count: int) -> np.ndarray:
    """count standard normals via Box-Muller over counter pairs."""
    pairs = (count + 1) // 2
    u1 = uniform(key, 0, pairs)
    u2 = uniform(key, pairs, pairs)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.empty(2 * pairs, dtype=np.float64)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[:count]
