"""Pair-state transition chain for a single tracked item.

A pair state records whether the initiator (``a``) and the contacted node
(``b``) hold the item. States are encoded as ``2*a + b`` so that the fixed
ordering 00, 01, 10, 11 is also the row/column order of the matrix.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from shuffle_gossip.analytic import DropVariant, p_drop, p_select
from shuffle_gossip.params import ProtocolParams


class PairState(enum.IntEnum):
    S00 = 0
    S01 = 1
    S10 = 2
    S11 = 3

    @classmethod
    def from_flags(cls, a: int | bool, b: int | bool) -> "PairState":
        return cls(2 * int(bool(a)) + int(bool(b)))

    @classmethod
    def parse(cls, label: str) -> "PairState":
        if len(label) != 2 or set(label) - {"0", "1"}:
            raise ValueError(f"pair state must be one of 00, 01, 10, 11, got {label!r}")
        return cls.from_flags(int(label[0]), int(label[1]))

    @property
    def a(self) -> int:
        return self.value >> 1

    @property
    def b(self) -> int:
        return self.value & 1

    @property
    def label(self) -> str:
        return f"{self.a}{self.b}"

    def swapped(self) -> "PairState":
        return PairState.from_flags(self.b, self.a)


STATES = tuple(PairState)


@dataclass(frozen=True)
class PairTransitionMatrix:
    """Row-stochastic 4x4 matrix of P(target | source).

    ``exact`` keeps the rational entries; ``probabilities`` and
    ``cumulative`` are their float images used for sampling.
    """

    exact: tuple[tuple[Fraction, ...], ...]
    variant: DropVariant
    params: ProtocolParams | None = None
    probabilities: np.ndarray = field(init=False, repr=False, compare=False)
    cumulative: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.exact) != 4 or any(len(row) != 4 for row in self.exact):
            raise ValueError("transition matrix must be 4x4")
        for row in self.exact:
            if any(p < 0 or p > 1 for p in row) or sum(row) != 1:
                raise ValueError(f"row {row} is not a probability distribution")
        probs = np.array([[float(p) for p in row] for row in self.exact], dtype=np.float64)
        cum = np.cumsum(probs, axis=1)
        cum[:, -1] = 1.0
        probs.setflags(write=False)
        cum.setflags(write=False)
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "cumulative", cum)

    def probability(self, source: PairState, target: PairState) -> float:
        return float(self.probabilities[source, target])

    def exact_probability(self, source: PairState, target: PairState) -> Fraction:
        return self.exact[source][target]

    @property
    def entries(self) -> dict[tuple[PairState, PairState], float]:
        return {(a, b): self.probability(a, b) for a in STATES for b in STATES}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["variant", "n", "c", "s", "source"] + [f"p{t.label}" for t in STATES])
        p = self.params
        meta = [p.n, p.c, p.s] if p is not None else ["", "", ""]
        for src in STATES:
            writer.writerow([self.variant.value, *meta, src.label]
                            + [f"{self.probabilities[src, t]:.10g}" for t in STATES])
        return buf.getvalue()


def build_matrix(params: ProtocolParams,
                 variant: DropVariant | str = DropVariant.SIMPLIFIED) -> PairTransitionMatrix:
    variant = DropVariant(variant)
    sel = p_select(params)
    drop = p_drop(params, variant)
    keep_unsel = 1 - sel
    zero, one = Fraction(0), Fraction(1)

    row01 = (zero, keep_unsel, sel * drop, sel * (1 - drop))
    row10 = (zero, sel * drop, keep_unsel, sel * (1 - drop))
    lost_one = sel * drop * keep_unsel
    both = keep_unsel * keep_unsel + sel * sel + 2 * sel * keep_unsel * (1 - drop)
    row11 = (zero, lost_one, lost_one, both)
    rows = ((one, zero, zero, zero), row01, row10, row11)
    return PairTransitionMatrix(exact=rows, variant=variant, params=params)


def sample_transition(matrix: PairTransitionMatrix, source: PairState | int,
                      rng: np.random.Generator) -> PairState:
    """Draw the post-shuffle state by inverse CDF over 00, 01, 10, 11."""
    u = rng.random()
    row = matrix.cumulative[int(source)]
    return PairState(int(np.searchsorted(row, u, side="right")))
