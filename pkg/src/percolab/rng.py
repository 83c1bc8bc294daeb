"""Counter-based keyed uniform deviates.

Every uniform U_i is a pure function of (master_seed, replica_id, index),
independent of query order.  The construction is a splitmix64-style
finalizer chained over the key words, documented here bit-exactly:

    z := mix64(master_seed)
    for w in (domain_tag, replica_id, *index_words):
        z := mix64(z XOR (w + 0x9e3779b97f4a7c15 mod 2^64))
    U  := (z >> 11) * 2^-53

with  mix64(z) = let z ^= z>>30; z *= 0xbf58476d1ce4e5b9;
                     z ^= z>>27; z *= 0x94d049bb133111eb;
                     z ^= z>>31  (all mod 2^64).

Negative coordinates enter as their two's-complement 64-bit value.
Domain tags keep vertex indices (tag 0) and space-time indices (tag 1)
in disjoint streams.
"""

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

TAG_VERTEX = 0
TAG_SPACETIME = 1

_INV53 = 2.0 ** -53


def mix64(z: int) -> int:
    z &= _MASK
    z ^= z >> 30
    z = (z * _M1) & _MASK
    z ^= z >> 27
    z = (z * _M2) & _MASK
    z ^= z >> 31
    return z


def key_uniform(master_seed: int, tag: int, replica_id: int, *words: int) -> float:
    """Scalar uniform in [0, 1) for one index."""
    z = mix64(master_seed)
    for w in (tag, replica_id, *words):
        z = mix64(z ^ ((int(w) + _GOLDEN) & _MASK))
    return (z >> 11) * _INV53


def _mix64_arr(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_M1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_M2)
    z = z ^ (z >> np.uint64(31))
    return z


def key_state_array(master_seed: int, tag: int, replica_id, *words) -> np.ndarray:
    """Partially chained key state (uint64 array); feed the remaining
    words through key_uniform_from_state.  Splitting the chain at any
    point is bit-identical to the one-shot path."""
    shape = np.broadcast_shapes(
        *(np.shape(w) for w in (replica_id, *words) if np.ndim(w) > 0)
    ) or ()
    z = np.full(shape, mix64(master_seed), dtype=np.uint64)
    golden = np.uint64(_GOLDEN)
    for w in (tag, replica_id, *words):
        wa = np.asarray(w).astype(np.int64).astype(np.uint64)
        z = _mix64_arr(z ^ (wa + golden))
    return z


def key_uniform_from_state(state: np.ndarray, *words) -> np.ndarray:
    """Finish a chain started by key_state_array with the final words."""
    z = state
    golden = np.uint64(_GOLDEN)
    for w in words:
        wa = np.asarray(w).astype(np.int64).astype(np.uint64)
        z = _mix64_arr(z ^ (wa + golden))
    return (z >> np.uint64(11)).astype(np.float64) * _INV53


def key_uniform_array(master_seed: int, tag: int, replica_id, *words) -> np.ndarray:
    """Vectorized twin of key_uniform.

    replica_id and each word may be ints or broadcastable integer arrays;
    bit-identical to the scalar path.
    """
    return key_uniform_from_state(
        key_state_array(master_seed, tag, replica_id, *words))
