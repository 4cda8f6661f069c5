"""Compiled helpers shared by the two simulators."""

from __future__ import annotations

import numba

jit = numba.njit(cache=True, nogil=True)


@jit
def pick_neighbour(node, n_nodes, complete, offsets, indices, rng):
    if complete:
        other = rng.integers(0, n_nodes - 1)
        if other >= node:
            other += 1
        return other
    lo = offsets[node]
    deg = offsets[node + 1] - lo
    return indices[lo + rng.integers(0, deg)]


@jit
def sample_row(cumulative, source, u):
    target = 0
    while target < 3 and u >= cumulative[source, target]:
        target += 1
    return target
