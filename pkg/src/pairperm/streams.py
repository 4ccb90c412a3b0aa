"""Counter-based random streams for resampling replicates.

Replicate ``b`` of a run seeded with ``seed`` owns a SplitMix64 sequence
whose starting state is a hash of ``(seed, b)``. Its ``k``-th output is a pure
function of ``(seed, b, k)``, so any subset of replicates can be generated in
any order, by any number of workers, with identical results. Everything is
vectorized over replicates.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SEED_SALT = np.uint64(0x5851F42D4C957F2D)
_MASK64 = (1 << 64) - 1


def _mix64(z):
    """SplitMix64 output finalizer (uint64 in, uint64 out, wrapping)."""
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def replicate_keys(seed: int, start: int, stop: int) -> np.ndarray:
    """Stream keys of replicates ``start .. stop - 1`` for ``seed``."""
    seed_word = np.uint64(int(seed) & _MASK64)
    with np.errstate(over="ignore"):
        base = _mix64(np.array([seed_word ^ _SEED_SALT], dtype=np.uint64))[0]
        b = np.arange(start, stop, dtype=np.uint64)
        return _mix64(base + (b + np.uint64(1)) * _GOLDEN)


def raw_words(keys: np.ndarray, count: int) -> np.ndarray:
    """First ``count`` SplitMix64 outputs of each key, shape ``(len(keys), count)``."""
    k = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(keys[:, None] + k[None, :] * _GOLDEN)


def uniforms(keys: np.ndarray, count: int) -> np.ndarray:
    """Doubles in ``[0, 1)`` with 53 random bits, shape ``(len(keys), count)``."""
    words = raw_words(keys, count)
    return (words >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def draw_group_elements(n_pairs: int, n_pooled: int, seed: int, start: int, stop: int):
    """Randomization draws for replicates ``start .. stop - 1``.

    Each replicate first consumes ``n_pooled - 1`` uniforms for a Fisher-Yates
    shuffle of the pooled unpaired slots, then ``n_pairs`` uniforms whose
    comparison with 1/2 decides the component flips.

    Returns
    -------
    flips : ndarray of bool, shape (B, n_pairs)
    arrangements : ndarray of intp, shape (B, n_pooled)
    """
    keys = replicate_keys(seed, start, stop)
    rows = keys.shape[0]
    n_shuffle = max(n_pooled - 1, 0)
    u = uniforms(keys, n_shuffle + n_pairs)

    perm = np.empty((rows, n_pooled), dtype=np.intp)
    perm[:] = np.arange(n_pooled)
    idx = np.arange(rows)
    for step, i in enumerate(range(n_pooled - 1, 0, -1)):
        j = (u[:, step] * (i + 1)).astype(np.intp)
        held = perm[idx, j]
        perm[idx, j] = perm[:, i]
        perm[:, i] = held
    flips = u[:, n_shuffle:] < 0.5
    return flips, perm
