"""Cache-level simulator of the shuffle protocol.

Each node owns a cache of at most ``c`` distinct item ids. In a shuffle both
partners pick ``min(|cache|, s)`` items uniformly from their pre-exchange
cache and send copies. Received duplicates are discarded; the remaining items
are added, and if the cache overflows the owner evicts uniformly among the
items it sent but did not also receive.

Warm-up items are ``0..n-1``; the tracked item is ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from shuffle_gossip._jit import jit, pick_neighbour
from shuffle_gossip.params import ParameterError, ProtocolParams
from shuffle_gossip.topology import Topology, TopologyError

# stats slots
DROP_TRIALS, DROP_HITS, VIOLATIONS, SHUFFLES = range(4)
N_STATS = 4
# per-shuffle record columns
(REC_A, REC_B, REC_MA, REC_MB, REC_NEW_A, REC_NEW_B,
 REC_DROP_A, REC_DROP_B) = range(8)


class WarmUpError(RuntimeError):
    """Caches were still not full when warm-up ended."""


@dataclass(frozen=True)
class RoundMetrics:
    replication: float
    coverage: float


@dataclass(frozen=True)
class ShuffleTranscript:
    initiator: int
    contacted: int
    sent_by_initiator: frozenset[int]
    sent_by_contacted: frozenset[int]
    dropped_by_initiator: frozenset[int]
    dropped_by_contacted: frozenset[int]
    duplicates_at_contacted: int
    duplicates_at_initiator: int

    def line(self, round_index: int) -> str:
        dropped = ";".join(str(i) for i in sorted(self.dropped_by_initiator))
        dropped_b = ";".join(str(i) for i in sorted(self.dropped_by_contacted))
        return (f"{round_index},{self.initiator},{self.contacted},"
                f"{self.duplicates_at_contacted},{dropped},{dropped_b}")


@jit
def _select(caches, pos, node, m, size, rng, out):
    row = caches[node]
    for t in range(m):
        r = rng.integers(t, size)
        if r != t:
            x = row[t]
            y = row[r]
            row[t] = y
            row[r] = x
            pos[node, y] = t
            pos[node, x] = r
        out[t] = row[t]


@jit
def _remove(caches, sizes, pos, copies, node, item):
    i = pos[node, item]
    last = sizes[node] - 1
    y = caches[node, last]
    caches[node, i] = y
    pos[node, y] = i
    caches[node, last] = -1
    pos[node, item] = -1
    sizes[node] = last
    copies[item] -= 1


@jit
def _append(caches, sizes, pos, copies, node, item):
    i = sizes[node]
    caches[node, i] = item
    pos[node, item] = i
    sizes[node] = i + 1
    copies[item] += 1


@jit
def _integrate(caches, sizes, pos, copies, stats, node, c, eligible, n_eligible,
               incoming, n_incoming, dropped, rng):
    overflow = sizes[node] + n_incoming - c
    if overflow > n_eligible:
        raise RuntimeError("eviction set smaller than overflow")
    marked = eligible[0] if n_eligible > 0 else -1
    n_drop = overflow if overflow > 0 else 0
    hit = 0
    for t in range(n_drop):
        r = rng.integers(t, n_eligible)
        x = eligible[r]
        eligible[r] = eligible[t]
        eligible[t] = x
        dropped[t] = x
        if x == marked:
            hit = 1
        _remove(caches, sizes, pos, copies, node, x)
    for t in range(n_incoming):
        _append(caches, sizes, pos, copies, node, incoming[t])
    if n_eligible > 0:
        stats[DROP_TRIALS] += 1
        stats[DROP_HITS] += hit
    return n_drop


@jit
def _shuffle(caches, sizes, pos, copies, mark, stats, pair_counts, probe,
             a, b, s, c, rng, sa, sb, elig_a, elig_b, new_a, new_b, drop_a, drop_b, info):
    pre = 0
    if probe >= 0:
        pre = (2 if pos[a, probe] >= 0 else 0) + (1 if pos[b, probe] >= 0 else 0)

    ma = min(sizes[a], s)
    mb = min(sizes[b], s)
    _select(caches, pos, a, ma, sizes[a], rng, sa)
    _select(caches, pos, b, mb, sizes[b], rng, sb)

    for t in range(mb):
        mark[sb[t]] = 1
    ea = 0
    for t in range(ma):
        if mark[sa[t]] == 0:
            elig_a[ea] = sa[t]
            ea += 1
    for t in range(mb):
        mark[sb[t]] = 0
    for t in range(ma):
        mark[sa[t]] = 1
    eb = 0
    for t in range(mb):
        if mark[sb[t]] == 0:
            elig_b[eb] = sb[t]
            eb += 1
    for t in range(ma):
        mark[sa[t]] = 0

    # duplicates are judged against the caches as they were before the exchange
    na = 0
    for t in range(mb):
        if pos[a, sb[t]] < 0:
            new_a[na] = sb[t]
            na += 1
    nb = 0
    for t in range(ma):
        if pos[b, sa[t]] < 0:
            new_b[nb] = sa[t]
            nb += 1

    nda = _integrate(caches, sizes, pos, copies, stats, a, c, elig_a, ea, new_a, na, drop_a, rng)
    ndb = _integrate(caches, sizes, pos, copies, stats, b, c, elig_b, eb, new_b, nb, drop_b, rng)

    # both partners are integrated before checking: every evicted item was sent
    for t in range(nda):
        if copies[drop_a[t]] == 0:
            stats[VIOLATIONS] += 1
    for t in range(ndb):
        if copies[drop_b[t]] == 0:
            stats[VIOLATIONS] += 1

    if probe >= 0:
        post = (2 if pos[a, probe] >= 0 else 0) + (1 if pos[b, probe] >= 0 else 0)
        pair_counts[pre, post] += 1
    stats[SHUFFLES] += 1
    info[REC_A] = a
    info[REC_B] = b
    info[REC_MA] = ma
    info[REC_MB] = mb
    info[REC_NEW_A] = na
    info[REC_NEW_B] = nb
    info[REC_DROP_A] = nda
    info[REC_DROP_B] = ndb


@jit
def _round(caches, sizes, pos, copies, mark, stats, pair_counts, probe, s, c,
           n_nodes, complete, offsets, indices, rng,
           rec_sa, rec_sb, rec_ea, rec_eb, rec_na, rec_nb, rec_da, rec_db, rec_info):
    order = rng.permutation(n_nodes)
    for idx in range(n_nodes):
        a = order[idx]
        b = pick_neighbour(a, n_nodes, complete, offsets, indices, rng)
        _shuffle(caches, sizes, pos, copies, mark, stats, pair_counts, probe,
                 a, b, s, c, rng, rec_sa[idx], rec_sb[idx], rec_ea[idx], rec_eb[idx],
                 rec_na[idx], rec_nb[idx], rec_da[idx], rec_db[idx], rec_info[idx])


class ShuffleNetwork:
    """Network state for the faithful protocol simulator.

    ``caches[v, :sizes[v]]`` lists the items of node ``v``; ``pos[v, x]`` is the
    slot of item ``x`` in that row or -1. ``copies[x]`` counts cache entries
    holding ``x`` network-wide.
    """

    def __init__(self, params: ProtocolParams, topology: Topology):
        if topology.size != params.N:
            raise TopologyError(f"topology has {topology.size} nodes but N={params.N}")
        if params.n > params.N * params.c:
            raise ParameterError(
                f"n={params.n} items cannot fit in N·c={params.N * params.c} cache slots")
        self.params = params
        self.topology = topology
        self.item = params.n
        N, c, s = params.N, params.c, params.s
        n_ids = params.n + 1
        self.caches = np.full((N, c), -1, dtype=np.int64)
        self.sizes = np.zeros(N, dtype=np.int64)
        self.pos = np.full((N, n_ids), -1, dtype=np.int64)
        self.copies = np.zeros(n_ids, dtype=np.int64)
        self.seen = np.zeros(N, dtype=bool)
        self.tracking = False
        self.rounds_completed = 0
        self.stats = np.zeros(N_STATS, dtype=np.int64)
        self.pair_counts = np.zeros((4, 4), dtype=np.int64)
        self._mark = np.zeros(n_ids, dtype=np.uint8)
        self._rec = [np.full((N, s), -1, dtype=np.int64) for _ in range(8)]
        self._info = np.zeros((N, 8), dtype=np.int64)

    # construction -------------------------------------------------------

    def place_items(self, rng: np.random.Generator, mode: str = "single") -> "ShuffleNetwork":
        """Publish items ``0..n-1``.

        ``single`` puts one copy of each item on a uniformly chosen node that
        still has room. ``uniform`` fills every cache with an independent
        uniform c-subset of the items (the stationary picture assumed by the
        analysis; with n == c every cache holds everything).
        """
        n, c, N = self.params.n, self.params.c, self.params.N
        if mode == "single":
            for item in range(n):
                node = int(rng.integers(0, N))
                while self.sizes[node] >= c:
                    node = int(rng.integers(0, N))
                self._add(node, item)
        elif mode == "uniform":
            for node in range(N):
                for item in rng.choice(n, size=c, replace=False):
                    self._add(node, int(item))
        else:
            raise ValueError(f"unknown placement mode {mode!r}")
        return self

    def load_caches(self, contents: list[list[int]] | dict[int, list[int]]) -> "ShuffleNetwork":
        """Set cache contents explicitly; used for hand-traced scenarios."""
        items = contents.items() if isinstance(contents, dict) else enumerate(contents)
        for node, cache in items:
            if len(set(cache)) != len(cache) or len(cache) > self.params.c:
                raise ValueError(f"cache of node {node} is not a set of at most c items")
            for item in cache:
                if not 0 <= item <= self.params.n:
                    raise ValueError(f"item id {item} outside 0..{self.params.n}")
                self._add(node, int(item))
        return self

    def _add(self, node: int, item: int) -> None:
        _append(self.caches, self.sizes, self.pos, self.copies, node, item)

    # protocol -----------------------------------------------------------

    def shuffle(self, initiator: int, contacted: int,
                rng: np.random.Generator) -> ShuffleTranscript:
        if not self.topology.are_neighbours(initiator, contacted):
            raise TopologyError(f"nodes {initiator} and {contacted} are not neighbours")
        s = self.params.s
        bufs = [np.full(s, -1, dtype=np.int64) for _ in range(8)]
        info = np.zeros(8, dtype=np.int64)
        _shuffle(self.caches, self.sizes, self.pos, self.copies, self._mark, self.stats,
                 self.pair_counts, self._probe, initiator, contacted, s, self.params.c, rng,
                 *bufs, info)
        return _transcript(info, *bufs)

    def run_round(self, rng: np.random.Generator,
                  on_shuffle: Callable[[ShuffleTranscript], None] | None = None) -> RoundMetrics:
        """Every node initiates one shuffle, in uniformly random order."""
        topo = self.topology
        _round(self.caches, self.sizes, self.pos, self.copies, self._mark, self.stats,
               self.pair_counts, self._probe, self.params.s, self.params.c, self.params.N,
               topo.is_complete, topo.offsets, topo.indices, rng, *self._rec, self._info)
        self.rounds_completed += 1
        if on_shuffle is not None:
            for idx in range(self.params.N):
                on_shuffle(_transcript(self._info[idx], *(r[idx] for r in self._rec)))
        if self.tracking:
            self.seen |= self.holders()
        return self.metrics()

    def warm_up(self, rounds: int, rng: np.random.Generator) -> "ShuffleNetwork":
        for _ in range(rounds):
            self.run_round(rng)
        if not self.all_full():
            short = int(np.count_nonzero(self.sizes < self.params.c))
            raise WarmUpError(f"{short} caches not full after {rounds} warm-up rounds")
        return self

    def insert_and_track(self, rng: np.random.Generator) -> "TrackedRun":
        """Place the fresh item on a random node, replacing a random entry."""
        if self.tracking:
            raise RuntimeError("tracked item already inserted")
        node = int(rng.integers(0, self.params.N))
        if self.sizes[node] >= self.params.c:
            victim = int(self.caches[node, rng.integers(0, self.sizes[node])])
            _remove(self.caches, self.sizes, self.pos, self.copies, node, victim)
        self._add(node, self.item)
        self.tracking = True
        self.seen[node] = True
        return TrackedRun(network=self, node=node)

    # observation --------------------------------------------------------

    @property
    def _probe(self) -> int:
        return self.item if self.tracking else -1

    def holders(self) -> np.ndarray:
        return self.pos[:, self.item] >= 0

    def metrics(self) -> RoundMetrics:
        N = self.params.N
        return RoundMetrics(replication=float(np.count_nonzero(self.holders())) / N,
                            coverage=float(np.count_nonzero(self.seen)) / N)

    def cache(self, node: int) -> frozenset[int]:
        return frozenset(int(x) for x in self.caches[node, :self.sizes[node]])

    def distinct_items(self) -> np.ndarray:
        """Sorted distinct ids present anywhere, computed from the raw caches."""
        return np.unique(self.caches[self.caches >= 0])

    def all_full(self) -> bool:
        return bool(np.all(self.sizes == self.params.c))

    @property
    def conservation_violations(self) -> int:
        return int(self.stats[VIOLATIONS])

    @property
    def drop_frequency(self) -> tuple[int, int]:
        """(trials, evictions) of marked sent-and-not-received items."""
        return int(self.stats[DROP_TRIALS]), int(self.stats[DROP_HITS])

    def reset_counters(self) -> None:
        self.stats[:] = 0
        self.pair_counts[:] = 0

    def check_integrity(self) -> None:
        """Raise AssertionError if internal bookkeeping is inconsistent."""
        c = self.params.c
        counts = np.zeros_like(self.copies)
        for v in range(self.params.N):
            size = int(self.sizes[v])
            assert 0 <= size <= c, f"node {v} holds {size} > c items"
            row = self.caches[v, :size]
            assert len(set(row.tolist())) == size, f"duplicate item in cache of node {v}"
            assert np.all(self.caches[v, size:] == -1)
            assert np.all(self.pos[v, row] == np.arange(size))
            assert np.count_nonzero(self.pos[v] >= 0) == size
            counts[row] += 1
        assert np.array_equal(counts, self.copies), "copy counters out of sync"


def _transcript(info, sa, sb, ea, eb, na, nb, da, db) -> ShuffleTranscript:
    ma, mb = int(info[REC_MA]), int(info[REC_MB])
    new_a, new_b = int(info[REC_NEW_A]), int(info[REC_NEW_B])
    return ShuffleTranscript(
        initiator=int(info[REC_A]),
        contacted=int(info[REC_B]),
        sent_by_initiator=frozenset(sa[:ma].tolist()),
        sent_by_contacted=frozenset(sb[:mb].tolist()),
        dropped_by_initiator=frozenset(da[:int(info[REC_DROP_A])].tolist()),
        dropped_by_contacted=frozenset(db[:int(info[REC_DROP_B])].tolist()),
        duplicates_at_contacted=ma - new_b,
        duplicates_at_initiator=mb - new_a,
    )


@dataclass
class TrackedRun:
    """Replication and coverage history of the tracked item from t = 0."""

    network: ShuffleNetwork
    node: int
    replication: list[float] = field(default_factory=list)
    coverage: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        m = self.network.metrics()
        self.replication.append(m.replication)
        self.coverage.append(m.coverage)

    def step(self, rng: np.random.Generator, **kwargs) -> RoundMetrics:
        m = self.network.run_round(rng, **kwargs)
        self.replication.append(m.replication)
        self.coverage.append(m.coverage)
        return m

    def run(self, rounds: int, rng: np.random.Generator, **kwargs) -> "TrackedRun":
        for _ in range(rounds):
            self.step(rng, **kwargs)
        return self
