"""Compiled inner loop for Wilson's algorithm on indexed wired balls.

The kernel walks on an integer adjacency table (row per inner vertex, one
column per support move, the root as index n) and performs cycle popping:
overwriting a successor table along the walk is exactly chronological loop
erasure. Randomness comes from an inline splitmix64 stream whose 64-bit
seed is drawn from the caller's per-trial generator, keeping runs
deterministic and independent of scheduling.
"""

from __future__ import annotations

import numpy as np
from numba import int64, njit, uint64

_INV_2_64 = 1.0 / 18446744073709551616.0  # 2**-64


@njit(cache=True, inline="always")
def _splitmix64(state):
    state = state + uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
    return state, z ^ (z >> uint64(31))


@njit(cache=True)
def wilson_parents(adjacency, order, cum_probs, uniform, seed):
    """Sample a uniform spanning tree of the wired multigraph, rooted at n.

    adjacency: (n, deg) int64, entries in [0, n] with n meaning the root.
    order:     visit order over vertex indices.
    cum_probs: (deg,) cumulative move probabilities (used when not uniform).
    Returns the (n,) parent array; every entry lies in [0, n].
    """
    n = adjacency.shape[0]
    deg = adjacency.shape[1]
    parent = np.full(n, -1, np.int64)
    in_tree = np.zeros(n + 1, np.uint8)
    in_tree[n] = 1
    succ = np.full(n, -1, np.int64)
    state = uint64(seed)
    for oi in range(order.shape[0]):
        v = order[oi]
        if in_tree[v] == 1:
            continue
        u = v
        while in_tree[u] == 0:
            state, z = _splitmix64(state)
            if uniform:
                j = int64(z % uint64(deg))
            else:
                x = float(z) * _INV_2_64
                j = 0
                while cum_probs[j] < x:
                    j += 1
            w = adjacency[u, j]
            succ[u] = w
            u = w
        u = v
        while in_tree[u] == 0:
            w = succ[u]
            parent[u] = w
            in_tree[u] = 1
            u = w
    return parent
