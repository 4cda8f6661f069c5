"""Neighbour structures shared by both simulators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    """Grid (optionally toroidal) or complete graph over nodes 0..N-1.

    Grid node ``(row, col)`` has id ``row * width + col``. For the complete
    graph no adjacency is materialised; the kernels draw a uniform partner
    among the other N - 1 nodes.
    """

    kind: str
    size: int
    width: int = 0
    height: int = 0
    torus: bool = False
    offsets: np.ndarray = field(init=False, repr=False, compare=False)
    indices: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind == "complete":
            if self.size < 2:
                raise TopologyError("complete topology needs at least 2 nodes")
            offsets = np.zeros(1, dtype=np.int64)
            indices = np.zeros(0, dtype=np.int64)
        elif self.kind == "grid":
            if self.width < 1 or self.height < 1 or self.width * self.height != self.size:
                raise TopologyError(
                    f"grid {self.width}x{self.height} does not have {self.size} nodes")
            if self.size < 2:
                raise TopologyError("grid topology needs at least 2 nodes")
            offsets, indices = _grid_adjacency(self.width, self.height, self.torus)
        else:
            raise TopologyError(f"unknown topology kind {self.kind!r}")
        offsets.setflags(write=False)
        indices.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "indices", indices)

    @classmethod
    def grid(cls, width: int, height: int | None = None, torus: bool = False) -> "Topology":
        height = width if height is None else height
        return cls(kind="grid", size=width * height, width=width, height=height, torus=torus)

    @classmethod
    def complete(cls, size: int) -> "Topology":
        return cls(kind="complete", size=size)

    @property
    def is_complete(self) -> bool:
        return self.kind == "complete"

    def neighbours(self, node: int) -> tuple[int, ...]:
        self._check_node(node)
        if self.is_complete:
            return tuple(v for v in range(self.size) if v != node)
        return tuple(int(v) for v in self.indices[self.offsets[node]:self.offsets[node + 1]])

    def degree(self, node: int) -> int:
        self._check_node(node)
        if self.is_complete:
            return self.size - 1
        return int(self.offsets[node + 1] - self.offsets[node])

    def are_neighbours(self, u: int, v: int) -> bool:
        self._check_node(u)
        self._check_node(v)
        if u == v:
            return False
        if self.is_complete:
            return True
        return v in self.neighbours(u)

    def describe(self) -> str:
        if self.is_complete:
            return f"complete({self.size})"
        return f"grid({self.width}x{self.height}{', torus' if self.torus else ''})"

    def _check_node(self, node: int) -> None:
        if not 0 <= node < self.size:
            raise TopologyError(f"node {node} outside 0..{self.size - 1}")


def _grid_adjacency(width: int, height: int, torus: bool) -> tuple[np.ndarray, np.ndarray]:
    offsets = [0]
    indices: list[int] = []
    for r in range(height):
        for col in range(width):
            nbrs = []
            for dr, dc in ((-1, 0), (1, 0), (0, 1), (0, -1)):  # N, S, E, W
                rr, cc = r + dr, col + dc
                if torus:
                    rr, cc = rr % height, cc % width
                elif not (0 <= rr < height and 0 <= cc < width):
                    continue
                v = rr * width + cc
                if v != r * width + col and v not in nbrs:
                    nbrs.append(v)
            indices.extend(nbrs)
            offsets.append(len(indices))
    return np.asarray(offsets, dtype=np.int64), np.asarray(indices, dtype=np.int64)
