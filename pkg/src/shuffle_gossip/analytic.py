"""Selection and drop probabilities of the shuffle protocol.

Every quantity here is an exact :class:`fractions.Fraction`. Floating point
only appears in :func:`optimal_s`, whose optimum is irrational in general.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from shuffle_gossip.params import ParameterError, ProtocolParams

Rational = Fraction


class DropVariant(str, enum.Enum):
    EXACT = "exact"
    SIMPLIFIED = "simplified"
    CORRECTED = "corrected"


class UndefinedPointError(ArithmeticError):
    """The inverse-difference sequence is undefined because E == S at ``n``."""

    def __init__(self, n: int):
        super().__init__(f"exact and simplified drop probabilities coincide at n={n}; "
                         "inverse difference undefined")
        self.n = n


def binom(m: int, l: int) -> int:
    """Binomial coefficient, zero outside ``0 <= l <= m``."""
    if l < 0 or m < 0 or l > m:
        return 0
    return math.comb(m, l)


def p_select(params: ProtocolParams) -> Fraction:
    return Fraction(params.s, params.c)


def prob_k_duplicates(params: ProtocolParams, k: int) -> Fraction:
    """Probability that exactly ``k`` items of S_A are already in C_B."""
    n, c, s = params.n, params.c, params.s
    if not 0 <= k <= s:
        raise ParameterError(f"k must satisfy 0 ≤ k ≤ s (k={k}, s={s})")
    return Fraction(binom(c, k) * binom(n - c, s - k), binom(n, s))


def prob_shared_given_k(params: ProtocolParams, k: int, s_hat: int) -> Fraction:
    """Probability that |S_A ∩ S_B| = ``s_hat`` given ``k`` duplicates."""
    c, s = params.c, params.s
    if not 0 <= s_hat <= k <= s:
        raise ParameterError(
            f"need 0 ≤ s_hat ≤ k ≤ s (s_hat={s_hat}, k={k}, s={s})")
    return Fraction(binom(s, s_hat) * binom(c - s, k - s_hat), binom(c, k))


def drop_given_overlaps(s: int, k: int, s_hat: int) -> Fraction:
    """Share of S_B \\ S_A overwritten when k duplicates and s_hat shared items."""
    if not 0 <= s_hat <= k <= s:
        raise ParameterError(
            f"need 0 ≤ s_hat ≤ k ≤ s (s_hat={s_hat}, k={k}, s={s})")
    if s == s_hat:
        return Fraction(0)
    return Fraction(s - k, s - s_hat)


def p_drop_exact(params: ProtocolParams) -> Fraction:
    """Hypergeometric expectation of the drop probability.

    Both truncations are applied: k starts at max(0, s + c - n) and s_hat at
    max(0, s + k - c). The zero-extended binomials make the skipped terms
    vanish anyway, the bounds just avoid evaluating them.
    """
    n, c, s = params.n, params.c, params.s
    total = Fraction(0)
    for k in range(max(0, s + c - n), s + 1):
        weight_k = prob_k_duplicates(params, k)
        if weight_k == 0:
            continue
        inner = Fraction(0)
        for s_hat in range(max(0, s + k - c), k + 1):
            inner += drop_given_overlaps(s, k, s_hat) * prob_shared_given_k(params, k, s_hat)
        total += weight_k * inner
    return total


def p_drop_reduced(params: ProtocolParams) -> Fraction:
    """Closed rearrangement of the exact expectation for 2s ≤ c ≤ n - s.

    Kept as an independent evaluation path of the same quantity; it cancels
    the C(c, k) factors and pulls (n - c) out of the outer sum.
    """
    n, c, s = params.n, params.c, params.s
    if not (2 * s <= c <= n - s):
        raise ParameterError(f"reduced form needs 2s ≤ c ≤ n - s (n={n}, c={c}, s={s})")
    outer = Fraction(0)
    for k in range(s):
        inner = sum(Fraction(binom(c - s, k - j) * binom(s, j), s - j) for j in range(k + 1))
        outer += binom(n - c - 1, s - k - 1) * inner
    return Fraction(n - c, binom(n, s)) * outer


def p_drop_simplified(params: ProtocolParams) -> Fraction:
    n, c, s = params.n, params.c, params.s
    if n == s:
        raise ParameterError("simplified drop probability (n-c)/(n-s) undefined for n = s")
    return Fraction(n - c, n - s)


@dataclass(frozen=True)
class CorrectionFactor:
    gamma: Fraction
    theta: Fraction


def correction_gamma(n: int, s: int) -> CorrectionFactor:
    """γ = Σ_{d<s} C(n, d) / (s · C(s-1, d)), and θ = 1/γ."""
    if not 1 <= s <= n:
        raise ParameterError(f"need 1 ≤ s ≤ n (s={s}, n={n})")
    gamma = sum(Fraction(binom(n, d), s * binom(s - 1, d)) for d in range(s))
    return CorrectionFactor(gamma=gamma, theta=1 / gamma)


def correction_gamma_product(n: int, s: int) -> Fraction:
    """Second form of γ: C(n, s) / (n - s + 1) · Σ_{d<s} 1 / C(n - d, s - 1 - d)."""
    if not 1 <= s <= n:
        raise ParameterError(f"need 1 ≤ s ≤ n (s={s}, n={n})")
    tail = sum(Fraction(1, binom(n - d, s - 1 - d)) for d in range(s))
    return Fraction(binom(n, s), n - s + 1) * tail


def p_drop_corrected(params: ProtocolParams) -> Fraction:
    n, c, s = params.n, params.c, params.s
    theta = correction_gamma(n, s).theta
    return (n - c) / ((n - s) + theta)


def p_drop(params: ProtocolParams, variant: DropVariant | str) -> Fraction:
    variant = DropVariant(variant)
    if variant is DropVariant.EXACT:
        return p_drop_exact(params)
    if variant is DropVariant.SIMPLIFIED:
        return p_drop_simplified(params)
    return p_drop_corrected(params)


def difference_sequence(c: int, s: int, n_values: Iterable[int]) -> list[Fraction]:
    """e_{c,s}(n) = (E(n,c,s)^-1 - S(n,c,s)^-1)^-1 for each n.

    Raises:
        UndefinedPointError: at the first n where E == S (for instance n = c,
            where both vanish).
    """
    out = []
    for n in n_values:
        params = ProtocolParams(n=n, c=c, s=s)
        exact = p_drop_exact(params)
        simple = p_drop_simplified(params) if n > s else None
        if exact == 0 or simple is None or simple == 0 or exact == simple:
            raise UndefinedPointError(n)
        out.append(1 / (1 / exact - 1 / simple))
    return out


def forward_difference(values: Sequence[Fraction], order: int = 1) -> list[Fraction]:
    """Apply Δf(i) = f(i+1) - f(i) ``order`` times."""
    if order < 0:
        raise ValueError("order must be non-negative")
    out = list(values)
    for _ in range(order):
        out = [b - a for a, b in zip(out, out[1:])]
    return out


def optimal_s(n: int, c: int) -> tuple[float, int]:
    """Buffer size maximising (s/c)(c-s)/(n-s): real root and clamped integer."""
    if not 1 <= c <= n:
        raise ParameterError(f"c must satisfy 1 ≤ c ≤ n (c={c}, n={n})")
    real = n - math.sqrt(n * (n - c))
    return real, min(max(round(real), 1), c)
