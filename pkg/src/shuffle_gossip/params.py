"""Protocol parameters shared by every layer."""

from __future__ import annotations

from dataclasses import dataclass


class ParameterError(ValueError):
    """A parameter lies outside the domain of a formula or simulator."""


@dataclass(frozen=True)
class ProtocolParams:
    """The tuple (n, c, s, N).

    Attributes:
        n: number of distinct items in the network
        c: cache size per node
        s: exchange-buffer size
        N: number of nodes
    """

    n: int
    c: int
    s: int
    N: int = 2

    def __post_init__(self) -> None:
        for name in ("n", "c", "s", "N"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ParameterError(f"{name} must be an integer, got {value!r}")
        if not 1 <= self.c <= self.n:
            raise ParameterError(f"c must satisfy 1 ≤ c ≤ n (c={self.c}, n={self.n})")
        if not 1 <= self.s <= self.c:
            raise ParameterError(f"s must satisfy 1 ≤ s ≤ c (s={self.s}, c={self.c})")
        if self.N < 2:
            raise ParameterError(f"N must be at least 2 (N={self.N})")

    @property
    def stationary_replication(self) -> float:
        return self.c / self.n
