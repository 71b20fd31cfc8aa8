"""Deterministic Gaussian streams for the per-edge link disturbances.

The mapping from seed to sample sequence is part of the external contract so
that trace fixtures stay portable; no library RNG appears anywhere in it.

Uniform layer
    SplitMix64 in counter form: output ``m`` (1-based) is ``mix(seed + m *
    0x9E3779B97F4A7C15)`` with the standard finalizer (two xor-shift/multiply
    rounds and a final xor-shift), all modulo 2**64.  A uniform double is the
    top 53 bits: ``u = (output >> 11) * 2**-53``.

Gaussian layer
    Marsaglia's polar method on consecutive uniform pairs ``(u, v)``: with
    ``a = 2u - 1``, ``b = 2v - 1``, ``s = a^2 + b^2``, pairs with
    ``0 < s < 1`` are accepted and yield the two normals ``a * r`` then
    ``b * r`` with ``r = sqrt(-2 ln(s) / s)``; rejected pairs are skipped.
    The first ``count`` values of that scan are returned, so prefixes agree
    for any count.

Per-edge seeds
    Edge ``k`` (0-based, canonical edge order) of a network seeded with
    ``seed`` uses the ``(k+1)``-th SplitMix64 output of ``seed`` as its own
    stream seed.
"""

from __future__ import annotations

import numpy as np

__all__ = ["uniforms", "normals", "edge_seed_sequence"]

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _outputs(seed: int, start: int, count: int) -> np.ndarray:
    """SplitMix64 outputs ``start+1 .. start+count`` as uint64."""
    if count < 0:
        raise ValueError(f"count must be nonnegative, got {count}")
    index = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = np.uint64(int(seed) & _MASK) + index * np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def uniforms(seed: int, count: int, start: int = 0) -> np.ndarray:
    """``count`` uniform doubles in [0, 1) from the documented SplitMix64
    stream, beginning after the first ``start`` outputs."""
    return (_outputs(seed, start, count) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def normals(seed: int, count: int) -> np.ndarray:
    """First ``count`` standard normals of the documented polar-method scan.

    Prefix stable: ``normals(seed, m)`` equals ``normals(seed, n)[:m]`` for
    ``m <= n``.
    """
    if count < 0:
        raise ValueError(f"count must be nonnegative, got {count}")
    out = np.empty(count)
    filled = 0
    consumed = 0
    while filled < count:
        # acceptance rate is pi/4, each accepted pair yields two normals
        pairs = max(16, int(0.75 * (count - filled)) + 8)
        u = uniforms(seed, 2 * pairs, start=consumed)
        consumed += 2 * pairs
        a = 2.0 * u[0::2] - 1.0
        b = 2.0 * u[1::2] - 1.0
        s = a * a + b * b
        ok = (s > 0.0) & (s < 1.0)
        radius = np.sqrt(-2.0 * np.log(s[ok]) / s[ok])
        pair_values = np.empty(2 * radius.size)
        pair_values[0::2] = a[ok] * radius
        pair_values[1::2] = b[ok] * radius
        take = min(pair_values.size, count - filled)
        out[filled:filled + take] = pair_values[:take]
        filled += take
    return out


def edge_seed_sequence(seed: int, count: int) -> list[int]:
    """Per-edge stream seeds derived from a network-level seed."""
    return [int(v) for v in _outputs(seed, 0, count)]
