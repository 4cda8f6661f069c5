"""Simulation of the pair-chain model.

Each node carries only two flags: whether it currently holds the tracked item
and whether it has held it at the end of some round. A shuffle between an
initiator and a neighbour resamples their joint flags from the transition
matrix row of their current joint state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from shuffle_gossip._jit import jit, pick_neighbour, sample_row
from shuffle_gossip.pair_chain import PairTransitionMatrix
from shuffle_gossip.protocol_sim import RoundMetrics
from shuffle_gossip.topology import Topology


@jit
def _model_round(has, n_nodes, complete, offsets, indices, cumulative, rng):
    order = rng.permutation(n_nodes)
    for idx in range(n_nodes):
        a = order[idx]
        b = pick_neighbour(a, n_nodes, complete, offsets, indices, rng)
        src = 2 * has[a] + has[b]
        if src == 0:
            continue
        dst = sample_row(cumulative, src, rng.random())
        has[a] = dst >> 1
        has[b] = dst & 1


@jit
def _model_run(has, seen, rounds, n_nodes, complete, offsets, indices, cumulative, rng,
               replication, coverage):
    for t in range(1, rounds + 1):
        _model_round(has, n_nodes, complete, offsets, indices, cumulative, rng)
        held = 0
        covered = 0
        for v in range(n_nodes):
            if has[v]:
                seen[v] = 1
                held += 1
            covered += seen[v]
        replication[t] = held / n_nodes
        coverage[t] = covered / n_nodes


@dataclass
class ModelState:
    """Per-node flags; ``has`` and ``seen`` are uint8 arrays of length N."""

    has: np.ndarray
    seen: np.ndarray

    @classmethod
    def single_holder(cls, n_nodes: int, rng: np.random.Generator) -> "ModelState":
        has = np.zeros(n_nodes, dtype=np.uint8)
        has[rng.integers(0, n_nodes)] = 1
        return cls(has=has, seen=has.copy())

    def metrics(self) -> RoundMetrics:
        n_nodes = len(self.has)
        return RoundMetrics(replication=float(np.count_nonzero(self.has)) / n_nodes,
                            coverage=float(np.count_nonzero(self.seen)) / n_nodes)


def run_model_round(state: ModelState, topology: Topology, matrix: PairTransitionMatrix,
                    rng: np.random.Generator) -> RoundMetrics:
    """One round: N initiations in random order, then latch ``seen``."""
    _model_round(state.has, topology.size, topology.is_complete, topology.offsets,
                 topology.indices, matrix.cumulative, rng)
    state.seen |= state.has
    return state.metrics()


def simulate_model(topology: Topology, matrix: PairTransitionMatrix, rounds: int,
                   rng: np.random.Generator,
                   state: ModelState | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Run ``rounds`` rounds from a single random holder (or ``state``).

    Returns replication and coverage arrays of length ``rounds + 1``; index 0
    is the state before the first round. Consumes the generator exactly as
    repeated :func:`run_model_round` calls would.
    """
    if state is None:
        state = ModelState.single_holder(topology.size, rng)
    replication = np.empty(rounds + 1)
    coverage = np.empty(rounds + 1)
    m = state.metrics()
    replication[0], coverage[0] = m.replication, m.coverage
    _model_run(state.has, state.seen, rounds, topology.size, topology.is_complete,
               topology.offsets, topology.indices, matrix.cumulative, rng,
               replication, coverage)
    return replication, coverage
