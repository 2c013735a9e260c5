"""Counter-based random words.

Every random word is a pure function of ``(seed, stream, sim, unit)`` built
from the SplitMix64 finalizer, so a simulation's draws do not depend on how
simulation indices are chunked or scheduled across workers.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_STREAM = 0xD1B54A32D192ED03
_UNIT = 0xC2B2AE3D27D4EB4F


def mix64_int(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *keys: int) -> int:
    """Fold integer keys into a 64-bit seed. Negative keys are taken mod 2**64."""
    h = mix64_int(int(seed) & MASK64)
    for k in keys:
        h = mix64_int(h ^ mix64_int((int(k) + _GOLDEN) & MASK64))
    return h


def stream_key(seed: int, stream: int = 0) -> int:
    return mix64_int(mix64_int(int(seed) & MASK64) + (int(stream) * _STREAM & MASK64))


def words(seed: int, sims: np.ndarray, n_units: int, stream: int = 0) -> np.ndarray:
    """Random 64-bit words of shape ``(len(sims), n_units)``."""
    key = np.uint64(stream_key(seed, stream))
    sims = np.asarray(sims, dtype=np.uint64)
    units = np.arange(1, n_units + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        rows = mix64(key + (sims + np.uint64(1)) * np.uint64(_GOLDEN))
        return mix64(rows[:, None] + units[None, :] * np.uint64(_UNIT))


def bounded(w: np.ndarray, k: int) -> np.ndarray:
    """Map words to integers in ``[0, k)`` from their top 32 bits.

    The multiply-shift bias is below ``k / 2**32``; for ``k = 2`` the result
    is exactly the top bit.
    """
    hi = w >> np.uint64(32)
    return ((hi * np.uint64(k)) >> np.uint64(32)).astype(np.int64)
