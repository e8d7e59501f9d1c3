"""Keyed random streams.

All randomness is drawn from streams derived from ``(seed, *keys)`` so a
result never depends on the order in which sites, trees or nodes are visited.
"""
import hashlib

import numba
import numpy as np

_MASK64 = (1 << 64) - 1


def stable_hash64(key) -> int:
    """Platform-independent 64-bit hash of an int or string key."""
    if isinstance(key, (bool, np.bool_)):
        raise TypeError("boolean stream keys are ambiguous")
    if isinstance(key, (int, np.integer)):
        token = f"i:{int(key)}"
    elif isinstance(key, str):
        token = f"s:{key}"
    else:
        raise TypeError(f"unsupported stream key type: {type(key).__name__}")
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream_key(seed: int, *keys) -> int:
    """Fold ``seed`` and ``keys`` into a single 64-bit integer."""
    h = hashlib.blake2b(digest_size=8)
    h.update((int(seed) & _MASK64).to_bytes(8, "little"))
    for key in keys:
        h.update(stable_hash64(key).to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


def stream(seed: int, *keys) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stream_key(seed, *keys)))


@numba.njit(cache=True, nogil=True)
def _splitmix64(state):
    z = state + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, nogil=True)
def draw_node_features(key, tree_id, node_id, n_features, k):
    # Partial Fisher-Yates keyed on (key, tree, node); sorted so scans run
    # in ascending feature order.
    state = _splitmix64(np.uint64(key) ^ _splitmix64(np.uint64(tree_id)))
    state = _splitmix64(state ^ _splitmix64(np.uint64(node_id) + np.uint64(0x632BE59BD9B4E019)))
    perm = np.arange(n_features)
    for i in range(k):
        state = _splitmix64(state)
        j = i + np.int64(state % np.uint64(n_features - i))
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    return np.sort(perm[:k])


def node_features(seed: int, tree_id: int, node_id: int, n_features: int, k: int) -> np.ndarray:
    """Candidate feature subset for one tree node; identical for every party."""
    if not 1 <= k <= n_features:
        raise ValueError(f"cannot draw {k} of {n_features} features")
    return draw_node_features(np.uint64(stream_key(seed, "node-features")), tree_id, node_id, n_features, k)
